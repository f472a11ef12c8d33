//! Detrending a GHI series into the clear-sky index and reconstructing it.

use ghi_committee::data::{compute_clear_sky_index, reconstruct_ghi, LagPolicy, DEFAULT_THRESHOLD};
use ghi_committee::synth::{generate, GeneratorKind, SyntheticSpec};

fn main() -> ghi_committee::Result<()> {
    let spec = SyntheticSpec {
        phi0: 0.14,
        phi: vec![0.8],
        noise: 0.12,
        ..SyntheticSpec::new(GeneratorKind::CloudModulatedClearsky, 24 * 7, 3)
    };
    let fixture = generate(&spec)?;
    let ghi = fixture.ghi_series();
    let cls = fixture.clear_sky_series();
    let k = compute_clear_sky_index(&ghi, &cls, DEFAULT_THRESHOLD)?;

    println!("{} hours, {} valid (clear sky >= {DEFAULT_THRESHOLD} Wh/m2)", k.len(), k.valid_count());
    for policy in [LagPolicy::Contiguous, LagPolicy::Bridge] {
        let segs = k.segments(policy);
        println!("{policy:?}: {} lag chains, longest {}", segs.len(), segs.iter().map(Vec::len).max().unwrap_or(0));
    }

    let mut worst: f64 = 0.0;
    for i in 0..k.len() {
        if k.valid_mask()[i] {
            let g = ghi.values()[i].unwrap();
            let back = reconstruct_ghi(k.values()[i], cls.values()[i]);
            worst = worst.max((back - g).abs() / g.max(1e-12));
        }
    }
    println!("largest relative round-trip error: {worst:.3e}");

    println!("\nfirst daylight hours:");
    for i in (0..48).filter(|&i| k.valid_mask()[i]).take(6) {
        println!(
            "{}  ghi {:7.1}  clear sky {:7.1}  k {:.3}",
            k.timestamps()[i].format("%Y-%m-%d %H:%M"),
            ghi.values()[i].unwrap(),
            cls.values()[i],
            k.values()[i]
        );
    }
    Ok(())
}
