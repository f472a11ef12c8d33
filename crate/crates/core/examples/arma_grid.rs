//! BIC grid search over ARMA orders on a simulated AR(2) clear-sky index.

use ghi_committee::arma::{grid_search, FitOptions};
use ghi_committee::synth::{generate, GeneratorKind, SyntheticSpec};

fn main() -> ghi_committee::Result<()> {
    let spec = SyntheticSpec {
        phi0: 0.21,
        phi: vec![0.6, 0.1],
        noise: 0.05,
        ..SyntheticSpec::new(GeneratorKind::Ar, 5000, 11)
    };
    let y = generate(&spec)?.kcls;
    let g = grid_search(&[y], 1..=5, 0..=5, &FitOptions::default())?;

    println!("{} structures fitted, {} failed", g.cells.len(), g.failures().count());
    println!("rank  spec        BIC");
    for (i, (s, bic)) in g.ranked.iter().take(8).enumerate() {
        println!("{:>4}  {:<10}  {bic:.6}", i + 1, s.to_string());
    }
    let m = &g.best;
    println!("\nselected {}: phi0 = {:.4}, phi = {:?}, theta = {:?}", m.spec, m.phi0, m.phi, m.theta);
    println!("sigma2 = {:.6}, n = {}, stationary = {}", m.sigma2, m.n_train, m.stationary);
    println!("true: phi0 = 0.21, phi = [0.6, 0.1], sigma2 = {:.6}", 0.05f64.powi(2));
    Ok(())
}
