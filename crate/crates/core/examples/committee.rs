//! Posterior model probabilities from BICs and the combined forecast.

use ghi_committee::arma::ArmaModel;
use ghi_committee::committee::{combine, evidence_factors, pmp_from_bics, Committee, CommitteeMember};

fn main() -> ghi_committee::Result<()> {
    let bics = [-2.33, -2.59];
    let e = evidence_factors(&bics);
    let w = pmp_from_bics(&bics, None)?;
    println!("BIC          {:>8.2} {:>8.2}", bics[0], bics[1]);
    println!("exp(-BIC/2)  {:>8.3} {:>8.3}", e[0], e[1]);
    println!("PMP          {:>8.4} {:>8.4}", w[0], w[1]);

    let f = [0.62, 0.71];
    println!("\nmember forecasts {f:?} -> committee {:.5}", combine(&w, &f)?);

    let prior = pmp_from_bics(&bics, Some(&[0.8, 0.2]))?;
    println!("with priors (0.8, 0.2): PMP {:.4} {:.4}", prior[0], prior[1]);

    let persistence = ArmaModel::from_coefficients(0.0, vec![1.0], vec![], 0.02, 1000)?;
    let mean = ArmaModel::from_coefficients(0.7, vec![0.0], vec![], 0.03, 1000)?;
    let c = Committee::new(vec![
        CommitteeMember::new("persistence", persistence.bic(), Box::new(persistence)),
        CommitteeMember::new("mean", mean.bic(), Box::new(mean)),
    ])?;
    println!("\ncommittee {:?} with PMPs {:.4?}", c.names(), c.pmps());
    println!("last k = 0.9 -> forecast {:.4}", c.forecast(&[0.9, 0.7])?);
    Ok(())
}
