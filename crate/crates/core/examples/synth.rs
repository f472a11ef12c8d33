//! Seeded fixtures of every generator kind, written to a temporary directory.

use ghi_committee::pipeline::cmd_synth;
use ghi_committee::synth::{generate, GeneratorKind, SyntheticSpec, TeacherSpec};

fn main() -> ghi_committee::Result<()> {
    let specs = [
        SyntheticSpec { phi0: 0.3, phi: vec![0.7], ..SyntheticSpec::new(GeneratorKind::Ar, 1000, 1) },
        SyntheticSpec {
            phi0: 0.1,
            phi: vec![0.5, 0.3],
            theta: vec![0.4],
            ..SyntheticSpec::new(GeneratorKind::Arma, 1000, 2)
        },
        SyntheticSpec {
            teacher: Some(TeacherSpec { p: 3, h: 4, weights: None }),
            noise: 0.02,
            ..SyntheticSpec::new(GeneratorKind::TeacherMlp, 1000, 3)
        },
        SyntheticSpec {
            phi0: 0.14,
            phi: vec![0.8],
            noise: 0.12,
            ..SyntheticSpec::new(GeneratorKind::CloudModulatedClearsky, 24 * 365, 4)
        },
    ];
    let dir = std::env::temp_dir().join("ghi-committee-synth");
    for spec in &specs {
        let s = generate(spec)?;
        let n = s.kcls.len() as f64;
        let mean = s.kcls.iter().sum::<f64>() / n;
        let sd = (s.kcls.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let name = format!("{:?}", spec.kind).to_lowercase();
        let out = dir.join(format!("{name}.csv"));
        let side = cmd_synth(spec, &out)?;
        println!(
            "{name:<24} n {:>5}  index mean {mean:.3} sd {sd:.3}  -> {} (+ {})",
            spec.n,
            out.display(),
            side.display()
        );
    }
    Ok(())
}
