//! Error metrics and the two persistence baselines on one clear day.

use ghi_committee::eval::{mbe, nrmse, persistence_forecast, rmse, Observation, PersistenceMode};

fn main() -> ghi_committee::Result<()> {
    let f = [0.0, 3.0];
    let m = [4.0, 3.0];
    println!("rmse {:.4}  mbe {:.4}  nrmse(mean 383.7) {:.2}%", rmse(&f, &m)?, mbe(&f, &m)?, nrmse(&f, &m, 383.7)?);

    // A clear day: k = 1 every hour, GHI follows the clear sky.
    let cls = [0.0, 120.0, 340.0, 560.0, 700.0, 740.0, 690.0, 540.0, 320.0, 100.0, 0.0];
    let mut history = Vec::new();
    let (mut se_ghi, mut se_k, mut n) = (0.0, 0.0, 0);
    for &c in cls.iter().filter(|c| **c > 0.0) {
        if !history.is_empty() {
            let g = persistence_forecast(&history, c, PersistenceMode::Ghi)?;
            let k = persistence_forecast(&history, c, PersistenceMode::Kcls)?;
            se_ghi += (g - c).powi(2);
            se_k += (k - c).powi(2);
            n += 1;
        }
        history.push(Observation { ghi: c, kcls: 1.0 });
    }
    println!(
        "clear day persistence RMSE: ghi mode {:.1}, kcls mode {:.1}",
        (se_ghi / n as f64).sqrt(),
        (se_k / n as f64).sqrt()
    );

    let improvement: f64 = (24.96 - 22.60) / 24.96;
    println!("nRMSE 24.96% -> 22.60% is a {:.2}% relative reduction", 100.0 * improvement);
    Ok(())
}
