//! Single-hidden-layer autoregressive network with tanh hidden units:
//!
//! ```text
//! y_t = α0 + Σ_j α_j · tanh(β0_j + Σ_i β_ij · x_{t−i})
//! ```
//!
//! where `x` are the standardized lags. Training uses Bayesian
//! regularization in the evidence framework: Levenberg–Marquardt steps on
//! `β·E_D + α·E_W`, then the hyperparameters are re-estimated with
//! `γ = Σ λ_i / (λ_i + α)`, `α ← γ / 2E_W`, `β ← (n − γ) / 2E_D`, where `λ_i`
//! are the eigenvalues of the Gauss–Newton data Hessian `β·JᵀJ`.
//!
//! The packed parameter vector is `[β_ij (hidden-major), β0_j, α_j, α0]`,
//! `(p + 2)·h + 1` values in total.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::committee::bic_per_observation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Lagged inputs.
    pub p: usize,
    /// Hidden units.
    pub h: usize,
}

impl MlpSpec {
    pub fn new(p: usize, h: usize) -> Result<Self> {
        if p == 0 || h == 0 {
            return Err(Error::InvalidParameter(format!("MLP needs p >= 1 and h >= 1, got p={p}, h={h}")));
        }
        Ok(MlpSpec { p, h })
    }

    pub fn n_params(&self) -> usize {
        (self.p + 2) * self.h + 1
    }
}

impl std::fmt::Display for MlpSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NN(p={},h={})", self.p, self.h)
    }
}

/// Per-lag affine normalization `x = (lag − mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaling {
    pub fn identity(p: usize) -> Self {
        InputScaling { mean: vec![0.0; p], scale: vec![1.0; p] }
    }

    fn fit(samples: &Samples) -> Self {
        let (n, p) = (samples.len() as f64, samples.p);
        let mut mean = vec![0.0; p];
        let mut scale = vec![0.0; p];
        for row in samples.inputs.chunks(p) {
            for i in 0..p {
                mean[i] += row[i] / n;
            }
        }
        for row in samples.inputs.chunks(p) {
            for i in 0..p {
                scale[i] += (row[i] - mean[i]).powi(2) / n;
            }
        }
        let scale = scale.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        InputScaling { mean, scale }
    }
}

/// Which parameter count enters the network's BIC penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BicParamCount {
    /// `(p + 2)·h + 1`.
    #[default]
    Total,
    /// The effective number of parameters γ from training.
    Effective,
}

/// A trained network with its evidence-framework state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub spec: MlpSpec,
    pub alpha0: f64,
    /// Output weights α_j.
    pub alpha: Vec<f64>,
    /// Hidden biases β0_j.
    pub beta0: Vec<f64>,
    /// Hidden weights, `beta[j * p + i]` connects lag `i + 1` to unit `j`.
    pub beta: Vec<f64>,
    /// Weight-decay hyperparameter.
    pub reg_alpha: f64,
    /// Noise precision hyperparameter.
    pub reg_beta: f64,
    /// Effective number of parameters.
    pub gamma_eff: f64,
    /// `2·E_D / n` on the training samples.
    pub sigma2: f64,
    pub n_train: usize,
    pub input_scaling: InputScaling,
    pub log_evidence: f64,
    pub seed: u64,
    pub converged: bool,
    pub outer_iterations: usize,
}

/// Lagged input/target pairs. `inputs` is row-major `n × p`, with the
/// most recent lag first in each row.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub p: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Samples {
    pub fn new(p: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if p == 0 || inputs.len() != p * targets.len() {
            return Err(Error::LengthMismatch { left: inputs.len(), right: p * targets.len() });
        }
        Ok(Samples { p, inputs, targets })
    }

    /// All `(lags, target)` pairs with a complete window inside a segment.
    pub fn from_segments(segments: &[Vec<f64>], p: usize) -> Self {
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for seg in segments {
            for t in p..seg.len() {
                inputs.extend((1..=p).map(|i| seg[t - i]));
                targets.push(seg[t]);
            }
        }
        Samples { p, inputs, targets }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.inputs[k * self.p..(k + 1) * self.p]
    }
}

impl MlpModel {
    /// A model with all weights zero, identity input scaling and unit
    /// hyperparameters.
    pub fn zeros(spec: MlpSpec) -> Self {
        MlpModel {
            spec,
            alpha0: 0.0,
            alpha: vec![0.0; spec.h],
            beta0: vec![0.0; spec.h],
            beta: vec![0.0; spec.h * spec.p],
            reg_alpha: 1.0,
            reg_beta: 1.0,
            gamma_eff: 0.0,
            sigma2: 1.0,
            n_train: 0,
            input_scaling: InputScaling::identity(spec.p),
            log_evidence: f64::NAN,
            seed: 0,
            converged: false,
            outer_iterations: 0,
        }
    }

    pub fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.n_params());
        w.extend_from_slice(&self.beta);
        w.extend_from_slice(&self.beta0);
        w.extend_from_slice(&self.alpha);
        w.push(self.alpha0);
        w
    }

    pub fn set_params(&mut self, w: &[f64]) {
        let (p, h) = (self.spec.p, self.spec.h);
        assert_eq!(w.len(), self.n_params());
        self.beta.copy_from_slice(&w[..h * p]);
        self.beta0.copy_from_slice(&w[h * p..h * p + h]);
        self.alpha.copy_from_slice(&w[h * p + h..h * p + 2 * h]);
        self.alpha0 = w[h * p + 2 * h];
    }

    fn scale_into(&self, lags: &[f64], x: &mut [f64]) {
        let s = &self.input_scaling;
        for i in 0..self.spec.p {
            x[i] = (lags[i] - s.mean[i]) / s.scale[i];
        }
    }

    /// Network output for `lags` (`lags[0]` is the most recent value).
    pub fn forward(&self, lags: &[f64]) -> f64 {
        assert_eq!(lags.len(), self.spec.p, "forward expects exactly p lags");
        let mut x = vec![0.0; self.spec.p];
        self.scale_into(lags, &mut x);
        let p = self.spec.p;
        let mut out = self.alpha0;
        for j in 0..self.spec.h {
            let z = self.beta0[j] + (0..p).map(|i| self.beta[j * p + i] * x[i]).sum::<f64>();
            out += self.alpha[j] * z.tanh();
        }
        out
    }

    /// Output and its derivative with respect to every packed parameter.
    fn output_and_jacobian_row(&self, lags: &[f64], x: &mut [f64], row: &mut [f64]) -> f64 {
        let (p, h) = (self.spec.p, self.spec.h);
        self.scale_into(lags, x);
        let mut out = self.alpha0;
        for j in 0..h {
            let z = self.beta0[j] + (0..p).map(|i| self.beta[j * p + i] * x[i]).sum::<f64>();
            let a = z.tanh();
            out += self.alpha[j] * a;
            let dz = self.alpha[j] * (1.0 - a * a);
            for i in 0..p {
                row[j * p + i] = dz * x[i];
            }
            row[h * p + j] = dz;
            row[h * p + h + j] = a;
        }
        row[h * p + 2 * h] = 1.0;
        out
    }

    /// Regularized objective `β·Σr²/2 + α·Σw²/2` and its gradient over the
    /// packed parameters.
    pub fn loss_and_gradient(&self, batch: &Samples) -> (f64, Vec<f64>) {
        assert_eq!(batch.p, self.spec.p);
        let w = self.params();
        let m = w.len();
        let mut grad = vec![0.0; m];
        let mut row = vec![0.0; m];
        let mut x = vec![0.0; self.spec.p];
        let mut ed = 0.0;
        for k in 0..batch.len() {
            let r = self.output_and_jacobian_row(batch.row(k), &mut x, &mut row) - batch.targets[k];
            ed += 0.5 * r * r;
            for (g, d) in grad.iter_mut().zip(&row) {
                *g += self.reg_beta * r * d;
            }
        }
        let ew: f64 = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        for (g, wi) in grad.iter_mut().zip(&w) {
            *g += self.reg_alpha * wi;
        }
        (self.reg_beta * ed + self.reg_alpha * ew, grad)
    }

    /// One-step forecasts along a lag segment; `None` for the first `p`
    /// positions.
    pub fn segment_forecasts(&self, segment: &[f64]) -> Vec<Option<f64>> {
        let p = self.spec.p;
        let mut lags = vec![0.0; p];
        (0..segment.len())
            .map(|t| {
                if t < p {
                    return None;
                }
                for i in 0..p {
                    lags[i] = segment[t - 1 - i];
                }
                Some(self.forward(&lags))
            })
            .collect()
    }

    /// `ln(σ̂²) + m·ln(n)/n` with `m = (p + 2)·h + 1`.
    pub fn bic(&self) -> f64 {
        self.bic_with(BicParamCount::Total)
    }

    pub fn bic_with(&self, count: BicParamCount) -> f64 {
        let n = self.n_train as f64;
        let m = match count {
            BicParamCount::Total => self.n_params() as f64,
            BicParamCount::Effective => self.gamma_eff,
        };
        bic_per_observation(self.sigma2, 0, self.n_train) + m * n.ln() / n
    }
}

/// Training knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub seed: u64,
    pub max_outer_iterations: usize,
    /// Maximum accepted Levenberg–Marquardt steps per hyperparameter update.
    pub max_inner_steps: usize,
    /// Relative change of α, β and the objective that ends training.
    pub tolerance: f64,
    pub initial_alpha: f64,
    /// Independent initializations; the one with the largest log evidence
    /// wins.
    pub restarts: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            seed: 1,
            max_outer_iterations: 200,
            max_inner_steps: 10,
            tolerance: 1e-5,
            initial_alpha: 10.0,
            restarts: 1,
        }
    }
}

/// Evidence-framework state after one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterStep {
    pub reg_alpha: f64,
    pub reg_beta: f64,
    pub gamma: f64,
    /// Objective values of the accepted inner steps, in order.
    pub objective_start: f64,
    pub objective_end: f64,
    pub monotone: bool,
}

struct Workspace {
    jac: DMatrix<f64>,
    resid: DVector<f64>,
}

fn residuals_and_jacobian(model: &MlpModel, data: &Samples, ws: &mut Workspace) -> f64 {
    let m = model.n_params();
    let mut row = vec![0.0; m];
    let mut x = vec![0.0; model.spec.p];
    let mut ed = 0.0;
    for k in 0..data.len() {
        let r = model.output_and_jacobian_row(data.row(k), &mut x, &mut row) - data.targets[k];
        ws.resid[k] = r;
        ed += 0.5 * r * r;
        for c in 0..m {
            ws.jac[(k, c)] = row[c];
        }
    }
    ed
}

fn data_error(model: &MlpModel, data: &Samples) -> f64 {
    (0..data.len()).map(|k| 0.5 * (model.forward(data.row(k)) - data.targets[k]).powi(2)).sum()
}

fn weight_error(w: &[f64]) -> f64 {
    0.5 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Trains a network with Bayesian regularization.
pub fn train_bayes_reg(train: &Samples, spec: MlpSpec, opts: &TrainOptions) -> Result<MlpModel> {
    train_bayes_reg_traced(train, spec, opts).map(|(m, _)| m)
}

/// Like [`train_bayes_reg`], also returning the per-iteration evidence
/// trace of the winning restart.
pub fn train_bayes_reg_traced(
    train: &Samples,
    spec: MlpSpec,
    opts: &TrainOptions,
) -> Result<(MlpModel, Vec<OuterStep>)> {
    let spec = MlpSpec::new(spec.p, spec.h)?;
    if train.p != spec.p {
        return Err(Error::InvalidParameter(format!("samples have {} lags, spec wants {}", train.p, spec.p)));
    }
    let n = train.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if train.inputs.iter().chain(&train.targets).any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite training sample".into()));
    }
    let mean = train.targets.iter().sum::<f64>() / n as f64;
    let var = train.targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n as f64;
    if var < 1e-14 {
        return Err(Error::DegenerateData("targets have zero variance".into()));
    }
    if n < 10 * spec.n_params() {
        log::warn!("{spec}: {n} samples for {} parameters (fewer than 10 per parameter)", spec.n_params());
    }
    let scaling = InputScaling::fit(train);
    let mut best: Option<(MlpModel, Vec<OuterStep>)> = None;
    for r in 0..opts.restarts.max(1) {
        let seed = opts.seed.wrapping_add(r as u64);
        let cand = train_once(train, spec, opts, seed, scaling.clone(), var)?;
        let better = match &best {
            None => true,
            Some((b, _)) => cand.0.log_evidence > b.log_evidence,
        };
        if better {
            best = Some(cand);
        }
    }
    let (mut model, trace) = best.expect("at least one restart");
    model.seed = opts.seed;
    if !model.converged {
        log::warn!("{spec}: evidence iterations did not converge in {} steps", opts.max_outer_iterations);
    }
    Ok((model, trace))
}

fn init_weights(spec: MlpSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, h) = (spec.p, spec.h);
    let hidden = 1.0 / (p as f64).sqrt();
    let output = 1.0 / (h as f64).sqrt();
    let mut w = Vec::with_capacity(spec.n_params());
    for _ in 0..h * p + h {
        w.push(rng.random_range(-hidden..=hidden));
    }
    for _ in 0..h + 1 {
        w.push(rng.random_range(-output..=output));
    }
    w
}

fn train_once(
    data: &Samples,
    spec: MlpSpec,
    opts: &TrainOptions,
    seed: u64,
    scaling: InputScaling,
    target_var: f64,
) -> Result<(MlpModel, Vec<OuterStep>)> {
    let n = data.len();
    let m = spec.n_params();
    let mut model = MlpModel::zeros(spec);
    model.input_scaling = scaling;
    model.set_params(&init_weights(spec, seed));
    model.reg_alpha = opts.initial_alpha;
    model.reg_beta = 1.0 / target_var;

    let mut ws = Workspace { jac: DMatrix::zeros(n, m), resid: DVector::zeros(n) };
    let mut mu = 0.01;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut gamma = 0.0;
    let mut outer = 0;
    let mut prev_objective = f64::NAN;

    while outer < opts.max_outer_iterations {
        outer += 1;
        let (a, b) = (model.reg_alpha, model.reg_beta);
        let mut w = model.params();
        let mut ed = residuals_and_jacobian(&model, data, &mut ws);
        let mut objective = b * ed + a * weight_error(&w);
        let objective_start = objective;
        let mut monotone = true;

        for _ in 0..opts.max_inner_steps {
            let jtj = ws.jac.tr_mul(&ws.jac);
            let wv = DVector::from_column_slice(&w);
            let grad = ws.jac.tr_mul(&ws.resid) * b + &wv * a;
            let mut accepted = false;
            while mu < 1e10 {
                let mut lhs = &jtj * b;
                for k in 0..m {
                    lhs[(k, k)] += a + mu;
                }
                let Some(chol) = lhs.cholesky() else {
                    mu *= 10.0;
                    continue;
                };
                let step = chol.solve(&(-&grad));
                let cand: Vec<f64> = w.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
                let mut trial = model.clone();
                trial.set_params(&cand);
                let cand_ed = data_error(&trial, data);
                let cand_obj = b * cand_ed + a * weight_error(&cand);
                if cand_obj.is_finite() && cand_obj < objective {
                    monotone &= cand_obj <= objective;
                    let rel = (objective - cand_obj) / objective.max(f64::MIN_POSITIVE);
                    model = trial;
                    w = cand;
                    objective = cand_obj;
                    mu = (mu / 10.0).max(1e-12);
                    accepted = true;
                    ed = residuals_and_jacobian(&model, data, &mut ws);
                    if rel < 1e-9 {
                        accepted = false;
                    }
                    break;
                }
                mu *= 10.0;
            }
            if !accepted {
                break;
            }
        }
        if mu >= 1e10 {
            mu = 1.0;
        }

        // Evidence updates at the current weights.
        let jtj = ws.jac.tr_mul(&ws.jac) * b;
        let eig = SymmetricEigen::new(jtj);
        let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        gamma = lambdas.iter().map(|l| l / (l + a)).sum::<f64>().clamp(0.0, m as f64);
        let ew = weight_error(&w);
        let new_alpha = if ew > 0.0 { (gamma / (2.0 * ew)).clamp(1e-10, 1e10) } else { a };
        let new_beta = if ed > 0.0 { ((n as f64 - gamma) / (2.0 * ed)).clamp(1e-10, 1e14) } else { b };
        model.reg_alpha = new_alpha;
        model.reg_beta = new_beta;
        model.log_evidence = log_evidence(&lambdas, a, b, ew, ed, n);

        trace.push(OuterStep {
            reg_alpha: new_alpha,
            reg_beta: new_beta,
            gamma,
            objective_start,
            objective_end: objective,
            monotone,
        });

        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE);
        let obj_now = ed / n as f64;
        if rel(new_alpha, a) < opts.tolerance
            && rel(new_beta, b) < opts.tolerance
            && (prev_objective.is_nan() || rel(obj_now, prev_objective) < opts.tolerance)
        {
            converged = true;
            break;
        }
        prev_objective = obj_now;
    }

    let ed = data_error(&model, data);
    model.sigma2 = 2.0 * ed / n as f64;
    model.gamma_eff = gamma;
    model.n_train = n;
    model.seed = seed;
    model.converged = converged;
    model.outer_iterations = outer;
    if !model.sigma2.is_finite() || model.params().iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(format!("{spec}: training produced non-finite weights")));
    }
    Ok((model, trace))
}

/// Gaussian-approximation log evidence `ln p(D | α, β)`.
fn log_evidence(lambdas: &[f64], alpha: f64, beta: f64, ew: f64, ed: f64, n: usize) -> f64 {
    let w = lambdas.len() as f64;
    let log_det: f64 = lambdas.iter().map(|l| (l + alpha).ln()).sum();
    -alpha * ew - beta * ed - 0.5 * log_det + 0.5 * w * alpha.ln() + 0.5 * n as f64 * beta.ln()
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// One candidate of an architecture search.
#[derive(Debug)]
pub struct NnCell {
    pub spec: MlpSpec,
    pub outcome: Result<MlpModel>,
}

#[derive(Debug)]
pub struct NnSelection {
    /// Every attempted candidate, in (p, h) order.
    pub cells: Vec<NnCell>,
    /// Successful candidates by ascending BIC.
    pub ranked: Vec<(MlpSpec, f64)>,
    pub best: MlpModel,
}

/// Seed used for candidate `spec` under base seed `seed`.
pub fn candidate_seed(seed: u64, spec: MlpSpec) -> u64 {
    seed.wrapping_add(1000 * spec.p as u64 + spec.h as u64)
}

/// Trains every `(p, h)` candidate on the lag segments and ranks by BIC.
pub fn select_nn(
    segments: &[Vec<f64>],
    p_candidates: &[usize],
    h_candidates: &[usize],
    opts: &TrainOptions,
    bic_count: BicParamCount,
) -> Result<NnSelection> {
    if p_candidates.is_empty() || h_candidates.is_empty() {
        return Err(Error::InvalidParameter("empty NN candidate set".into()));
    }
    let specs: Vec<MlpSpec> =
        p_candidates.iter().flat_map(|&p| h_candidates.iter().map(move |&h| MlpSpec { p, h })).collect();
    let mut cells: Vec<NnCell> = specs
        .par_iter()
        .map(|&spec| {
            let samples = Samples::from_segments(segments, spec.p);
            let o = TrainOptions { seed: candidate_seed(opts.seed, spec), ..*opts };
            NnCell { spec, outcome: train_bayes_reg(&samples, spec, &o) }
        })
        .collect();
    cells.sort_by_key(|c| c.spec);
    let mut ranked: Vec<(MlpSpec, f64)> =
        cells.iter().filter_map(|c| c.outcome.as_ref().ok().map(|m| (c.spec, m.bic_with(bic_count)))).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.n_params().cmp(&b.0.n_params())));
    let best_spec = ranked.first().map(|r| r.0).ok_or(Error::AllFitsFailed { attempted: cells.len() })?;
    let best = cells
        .iter()
        .find(|c| c.spec == best_spec)
        .and_then(|c| c.outcome.as_ref().ok())
        .cloned()
        .expect("ranked spec has a model");
    Ok(NnSelection { cells, ranked, best })
}
