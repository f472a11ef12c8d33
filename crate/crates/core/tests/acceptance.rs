//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any FAIL.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::{Duration as Hours, TimeZone, Utc};
use ghi_committee::arma::{grid_search, ArmaModel, FitOptions};
use ghi_committee::committee::{combine, evidence_factors, pmp_from_bics, Committee, CommitteeMember};
use ghi_committee::config::{RunConfig, DEFAULT_TEMPLATE};
use ghi_committee::data::{compute_clear_sky_index, reconstruct_ghi, ClearSkySeries, IrradianceSeries};
use ghi_committee::eval::ForecastEvaluation;
use ghi_committee::nn::{train_bayes_reg, InputScaling, MlpModel, MlpSpec, Samples, TrainOptions};
use ghi_committee::pipeline::{cmd_evaluate, cmd_fit, cmd_forecast, cmd_synth, default_model_paths, EvaluateSettings};
use ghi_committee::synth::{GeneratorKind, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ac1_pmp_anchor() -> Outcome {
    let bics = [-2.33, -2.59];
    let pmp = pmp_from_bics(&bics, None).unwrap();
    let ev = evidence_factors(&bics);
    let pass = (pmp[0] - 0.4663).abs() <= 0.002
        && (pmp[1] - 0.5337).abs() <= 0.002
        && (ev[0] - 3.20).abs() <= 0.01
        && (ev[1] - 3.66).abs() <= 0.01;
    outcome(pass, format!("PMP ({:.4}, {:.4}), exp(-BIC/2) ({:.3}, {:.3})", pmp[0], pmp[1], ev[0], ev[1]))
}

fn constant_member(name: &str, level: f64) -> CommitteeMember {
    let m = ArmaModel::from_coefficients(level, vec![0.0], vec![], 0.01, 1000).unwrap();
    CommitteeMember::new(name, m.bic(), Box::new(m))
}

fn ac2_committee_equation() -> Outcome {
    let (w_nn, w_arma) = (0.5337, 0.4663);
    let committee =
        Committee::with_weights(vec![constant_member("nn", 0.0), constant_member("arma", 0.0)], vec![w_nn, w_arma])
            .unwrap();
    let hand = [(0.62, 0.58), (1.0, 0.0), (0.0, 1.0), (0.3137, 0.9021), (1.2, 0.05)];
    let mut worst: f64 = 0.0;
    for (nn, arma) in hand {
        let expected = w_nn * nn + w_arma * arma;
        worst = worst.max((committee.forecast(&[nn, arma]).unwrap() - expected).abs());
        worst = worst.max((combine(&[w_nn, w_arma], &[nn, arma]).unwrap() - expected).abs());
    }
    outcome(worst <= 1e-12, format!("max |difference| {worst:.3e} over {} hand inputs", hand.len()))
}

fn ar2(n: usize, seed: u64) -> Vec<f64> {
    let (phi0, phi1, phi2) = (0.1, 0.5, 0.3);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = phi0 / (1.0 - phi1 - phi2);
    let mut y = vec![mean, mean];
    for _ in 0..n + 500 {
        let l = y.len();
        y.push(phi0 + phi1 * y[l - 1] + phi2 * y[l - 2] + noise.sample(&mut rng));
    }
    y.split_off(502)
}

fn ac3_grid_cardinality() -> Outcome {
    let g = grid_search(&[ar2(5000, 99)], 1..=10, 0..=10, &FitOptions::default()).unwrap();
    let attempted = g.cells.len();
    let w = MlpSpec::new(3, 12).unwrap().n_params();
    outcome(attempted == 110 && w == 61, format!("{attempted} ARMA fits attempted, NN(p=3, h=12) has {w} parameters"))
}

fn ac4_arma_recovery() -> Outcome {
    let t = Instant::now();
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let g = grid_search(&[ar2(5000, seed)], 1..=10, 0..=10, &FitOptions::default()).unwrap();
        if g.best.spec.p == 2 && g.best.spec.q == 0 {
            hits += 1;
            let b = &g.best;
            worst = worst.max((b.phi0 - 0.1).abs()).max((b.phi[0] - 0.5).abs()).max((b.phi[1] - 0.3).abs());
        }
    }
    let elapsed = t.elapsed();
    let pass = hits >= 18 && worst <= 0.05 && elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!("(2,0) selected in {hits}/20 seeds, max coefficient error {worst:.4}, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn ac5_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let spec = MlpSpec::new(rng.random_range(1..6), rng.random_range(1..9)).unwrap();
        let mut model = MlpModel::zeros(spec);
        let w: Vec<f64> = (0..spec.n_params()).map(|_| rng.random_range(-1.5..1.5)).collect();
        model.set_params(&w);
        model.input_scaling = InputScaling {
            mean: (0..spec.p).map(|_| rng.random_range(-0.5..0.5)).collect(),
            scale: (0..spec.p).map(|_| rng.random_range(0.5..2.0)).collect(),
        };
        model.reg_alpha = rng.random_range(0.01..2.0);
        model.reg_beta = rng.random_range(0.5..50.0);
        let n = rng.random_range(1..40);
        let inputs = (0..n * spec.p).map(|_| rng.random_range(-0.2..1.3)).collect();
        let targets = (0..n).map(|_| rng.random_range(-0.2..1.2)).collect();
        let batch = Samples::new(spec.p, inputs, targets).unwrap();
        let (_, grad) = model.loss_and_gradient(&batch);
        // Fourth-order central stencil.
        let h = 1e-4;
        let loss_at = |k: usize, dx: f64| {
            let mut wp = w.clone();
            wp[k] += dx;
            let mut m = model.clone();
            m.set_params(&wp);
            m.loss_and_gradient(&batch).0
        };
        for k in 0..w.len() {
            let fd =
                (-loss_at(k, 2.0 * h) + 8.0 * loss_at(k, h) - 8.0 * loss_at(k, -h) + loss_at(k, -2.0 * h)) / (12.0 * h);
            worst = worst.max((fd - grad[k]).abs() / grad[k].abs().max(fd.abs()).max(1e-2));
        }
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e} over 100 models"))
}

fn ac6_teacher_student() -> Outcome {
    let t = Instant::now();
    let mut teacher = MlpModel::zeros(MlpSpec::new(2, 2).unwrap());
    teacher.set_params(&[2.0, -1.5, -1.0, 2.5, -0.5, 0.3, 0.8, -0.6, 0.4]);
    let sigma = 0.01;
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut draw = |n: usize| {
        let inputs: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.0..1.2)).collect();
        let targets = (0..n).map(|k| teacher.forward(&inputs[2 * k..2 * k + 2]) + noise.sample(&mut rng)).collect();
        Samples::new(2, inputs, targets).unwrap()
    };
    let train = draw(2000);
    let fresh = draw(2000);
    let student = train_bayes_reg(&train, MlpSpec::new(2, 2).unwrap(), &TrainOptions::default()).unwrap();
    let se: f64 = (0..fresh.len()).map(|k| (student.forward(fresh.row(k)) - fresh.targets[k]).powi(2)).sum();
    let r = (se / fresh.len() as f64).sqrt();
    let elapsed = t.elapsed();
    outcome(
        r <= 2.0 * sigma && elapsed < Duration::from_secs(120),
        format!("fresh RMSE {r:.5} vs noise {sigma} (limit {:.3}), {:.1} s", 2.0 * sigma, elapsed.as_secs_f64()),
    )
}

fn ac7_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t0 = Utc.with_ymd_and_hms(2005, 1, 1, 0, 0, 0).unwrap();
    let threshold = 20.0;
    let mut checked = 0;
    let mut near = 0;
    let mut worst: f64 = 0.0;
    let mut mask_ok = true;
    for _ in 0..200 {
        let n = rng.random_range(1..300);
        let ts: Vec<_> = (0..n).map(|i| t0 + Hours::hours(i as i64)).collect();
        let cls: Vec<f64> = (0..n)
            .map(|_| match rng.random_range(0..4) {
                0 => threshold * (1.0 + rng.random_range(-1e-9..1e-9)),
                1 => threshold + rng.random_range(0.0..1e-3),
                2 => rng.random_range(0.0..threshold),
                _ => rng.random_range(threshold..1100.0),
            })
            .collect();
        let ghi: Vec<Option<f64>> =
            cls.iter().map(|c| (rng.random_range(0.0..1.0) > 0.05).then(|| c * rng.random_range(0.0..1.3))).collect();
        let k = compute_clear_sky_index(
            &IrradianceSeries::new(ts.clone(), ghi.clone()).unwrap(),
            &ClearSkySeries::new(ts, cls.clone()).unwrap(),
            threshold,
        )
        .unwrap();
        for i in 0..n {
            let expect_valid = ghi[i].is_some() && cls[i] >= threshold;
            mask_ok &= k.valid_mask()[i] == expect_valid;
            if !k.valid_mask()[i] {
                continue;
            }
            let g = ghi[i].unwrap();
            let back = reconstruct_ghi(k.values()[i], cls[i]);
            let err = if g == 0.0 { back.abs() } else { (back - g).abs() / g };
            worst = worst.max(err);
            checked += 1;
            if cls[i] < threshold + 1e-3 {
                near += 1;
            }
        }
    }
    outcome(
        mask_ok && worst <= 1e-9 && near > 0,
        format!("{checked} valid samples ({near} within 1e-3 of the threshold), max relative error {worst:.2e}"),
    )
}

fn ac9_metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();
    for case in 0..2000 {
        let n = rng.random_range(1..200);
        let measured: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1000.0)).collect();
        let bias = rng.random_range(-100.0..100.0);
        let forecast: Vec<f64> = measured.iter().map(|m| m + bias + rng.random_range(-150.0..150.0)).collect();
        let mean = rng.random_range(1.0..800.0);
        let e = ForecastEvaluation::compute("m", &forecast, &measured, mean).unwrap();
        if e.rmse * e.rmse < e.mbe * e.mbe * (1.0 - 1e-12) {
            failures.push(format!("case {case}: rmse^2 < mbe^2"));
        }
        let c = rng.random_range(0.1..10.0);
        let scaled = ForecastEvaluation::compute("m", &forecast, &measured, c * mean).unwrap();
        if (scaled.nrmse * c - e.nrmse).abs() > 1e-9 * e.nrmse.max(1.0) {
            failures.push(format!("case {case}: nrmse does not scale inversely"));
        }
        let zero = ForecastEvaluation::compute("m", &measured, &measured, mean).unwrap();
        if zero.rmse != 0.0 || zero.nrmse != 0.0 || zero.mbe != 0.0 {
            failures.push(format!("case {case}: zero-error row not all zero"));
        }
    }
    let detail = match failures.first() {
        None => "2000 randomized cases".to_string(),
        Some(f) => format!("{} violations, first: {f}", failures.len()),
    };
    outcome(failures.is_empty(), detail)
}

/// Runs synth, fit, forecast and evaluate on the cloud-modulated fixture in
/// `dir` with the default configuration.
fn run_pipeline(dir: &Path) -> ghi_committee::Result<ghi_committee::eval::Evaluation> {
    let spec = SyntheticSpec {
        phi0: 0.14,
        phi: vec![0.8],
        noise: 0.12,
        ..SyntheticSpec::new(GeneratorKind::CloudModulatedClearsky, 2 * 8760, 7)
    };
    cmd_synth(&spec, &dir.join("fixture.csv"))?;
    let mut cfg =
        RunConfig::from_toml_with_overrides(DEFAULT_TEMPLATE, &["input.clearsky_column=\"clearsky\"".into()])?;
    cfg.base_dir = dir.to_path_buf();
    cmd_fit(&cfg)?;
    let fc = cmd_forecast(&cfg, &default_model_paths(&cfg))?;
    Ok(cmd_evaluate(&fc.path, &cfg.output_dir(), &EvaluateSettings::from(&cfg))?.evaluation)
}

fn ac8_end_to_end(dir: &Path) -> Outcome {
    let t = Instant::now();
    let e = match run_pipeline(dir) {
        Ok(e) => e,
        Err(err) => return outcome(false, format!("pipeline failed: {err}")),
    };
    let elapsed = t.elapsed();
    let get = |m: &str| e.row(m).map(|r| r.nrmse).unwrap_or(f64::NAN);
    let (c, a, n, p) = (get("committee"), get("arma"), get("nn"), get("persistence"));
    let pass = c <= a.min(n) + 0.3 && c < p && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "test nRMSE committee {c:.2}%, ARMA {a:.2}%, NN {n:.2}%, persistence {p:.2}%, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let bytes = std::fs::read(&p).unwrap();
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn ac10_determinism(first: &Path) -> Outcome {
    let second = tempfile::tempdir().unwrap();
    if let Err(err) = run_pipeline(second.path()) {
        return outcome(false, format!("second run failed: {err}"));
    }
    let (a, b) = (files(first), files(second.path()));
    let names = |v: &[(PathBuf, Vec<u8>)]| v.iter().map(|f| f.0.clone()).collect::<Vec<_>>();
    if names(&a) != names(&b) {
        return outcome(false, "runs wrote different file sets".into());
    }
    let differing: Vec<String> =
        a.iter().zip(&b).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.display().to_string()).collect();
    let bytes: usize = a.iter().map(|f| f.1.len()).sum();
    if differing.is_empty() {
        outcome(true, format!("{} files, {bytes} bytes identical across two runs", a.len()))
    } else {
        outcome(false, format!("differing files: {}", differing.join(", ")))
    }
}

fn main() {
    let first = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, &str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        ("AC1", "PMP arithmetic anchor", Box::new(ac1_pmp_anchor)),
        ("AC2", "committee equation anchor", Box::new(ac2_committee_equation)),
        ("AC3", "grid cardinality", Box::new(ac3_grid_cardinality)),
        ("AC4", "ARMA recovery oracle", Box::new(ac4_arma_recovery)),
        ("AC5", "NN gradient check", Box::new(ac5_gradient_check)),
        ("AC6", "NN teacher-student oracle", Box::new(ac6_teacher_student)),
        ("AC7", "transform round trip", Box::new(ac7_round_trip)),
        ("AC8", "end-to-end improvement", Box::new(|| ac8_end_to_end(first.path()))),
        ("AC9", "metric identities", Box::new(ac9_metric_identities)),
        ("AC10", "determinism", Box::new(|| ac10_determinism(first.path()))),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {id} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
