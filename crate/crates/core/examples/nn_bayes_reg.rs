//! Bayesian-regularized network training on data from a known teacher
//! network, then BIC selection over lags and hidden units.

use ghi_committee::nn::{select_nn, train_bayes_reg_traced, BicParamCount, MlpSpec, Samples, TrainOptions};
use ghi_committee::synth::{generate, teacher_model, GeneratorKind, SyntheticSpec, TeacherSpec};

fn main() -> ghi_committee::Result<()> {
    let spec = SyntheticSpec {
        teacher: Some(TeacherSpec { p: 2, h: 3, weights: None }),
        noise: 0.02,
        ..SyntheticSpec::new(GeneratorKind::TeacherMlp, 3000, 5)
    };
    let fixture = generate(&spec)?;
    let teacher = teacher_model(&fixture.spec)?;
    let (train, fresh) = fixture.kcls.split_at(2000);

    let samples = Samples::from_segments(&[train.to_vec()], 2);
    let (model, trace) = train_bayes_reg_traced(&samples, MlpSpec::new(2, 6)?, &TrainOptions::default())?;
    println!("outer  alpha        beta         gamma");
    for (i, s) in trace.iter().enumerate().take(10) {
        println!("{:>5}  {:<11.4e}  {:<11.4e}  {:.2}", i + 1, s.reg_alpha, s.reg_beta, s.gamma);
    }
    println!(
        "{} of {} parameters well determined; noise std estimate {:.4} (true 0.02)",
        model.gamma_eff.round(),
        model.n_params(),
        model.reg_beta.recip().sqrt()
    );

    let test = Samples::from_segments(&[fresh.to_vec()], 2);
    let mut se = 0.0;
    let mut se_teacher = 0.0;
    for k in 0..test.len() {
        se += (model.forward(test.row(k)) - test.targets[k]).powi(2);
        se_teacher += (teacher.forward(test.row(k)) - test.targets[k]).powi(2);
    }
    let n = test.len() as f64;
    println!("fresh-sample RMSE: student {:.4}, teacher {:.4}", (se / n).sqrt(), (se_teacher / n).sqrt());

    let sel = select_nn(&[train.to_vec()], &[1, 2, 3], &[1, 3, 6], &TrainOptions::default(), BicParamCount::Total)?;
    println!("\nrank  spec            BIC");
    for (i, (s, bic)) in sel.ranked.iter().enumerate() {
        println!("{:>4}  {:<14}  {bic:.5}", i + 1, s.to_string());
    }
    Ok(())
}
