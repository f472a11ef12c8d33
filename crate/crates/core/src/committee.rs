//! Bayesian model averaging over one-step forecasters.
//!
//! Each member carries a BIC computed on its training fit. Posterior model
//! probabilities follow from `p(M_k | D) ∝ p(M_k) · exp(−BIC_k / 2)`, and the
//! committee forecast is the PMP-weighted mean of member forecasts on the
//! clear-sky-index scale, frozen for the whole test period.

use std::io::{Read, Write};

use crate::arma::SIGMA2_FLOOR;
use crate::data::{
    check_hourly, format_timestamp, parse_timestamp, reconstruct_ghi, ClearSkyIndexSeries, ClearSkySeries,
    IrradianceSeries, LagPolicy, Timestamp,
};
use crate::error::{Error, Result};

/// Tag identifying the BIC form `ln(σ̂²) + m·ln(n)/n`. Model documents carry
/// it so members scored under different conventions are never mixed.
pub const BIC_CONVENTION: &str = "per-observation";

/// `ln(σ̂²) + m·ln(n)/n`, with `σ̂²` floored at [`SIGMA2_FLOOR`].
pub fn bic_per_observation(sigma2: f64, n_params: usize, n: usize) -> f64 {
    let n = n as f64;
    sigma2.max(SIGMA2_FLOOR).ln() + n_params as f64 * n.ln() / n
}

/// `exp(−BIC/2)` for each BIC, unnormalized.
pub fn evidence_factors(bics: &[f64]) -> Vec<f64> {
    bics.iter().map(|b| (-b / 2.0).exp()).collect()
}

/// Posterior model probabilities from BICs and prior model probabilities.
/// `priors = None` means uniform.
pub fn pmp_from_bics(bics: &[f64], priors: Option<&[f64]>) -> Result<Vec<f64>> {
    if bics.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(b) = bics.iter().find(|b| !b.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite BIC {b}")));
    }
    let k = bics.len();
    let uniform = vec![1.0 / k as f64; k];
    let priors = priors.unwrap_or(&uniform);
    if priors.len() != k {
        return Err(Error::LengthMismatch { left: k, right: priors.len() });
    }
    if priors.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(Error::InvalidParameter("priors must lie in (0, 1]".into()));
    }
    let psum: f64 = priors.iter().sum();
    if (psum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("priors sum to {psum}, expected 1")));
    }
    let min = bics.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = bics.iter().zip(priors).map(|(b, p)| p * (-(b - min) / 2.0).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// PMP-weighted combination of member forecasts.
pub fn combine(pmps: &[f64], forecasts: &[f64]) -> Result<f64> {
    if pmps.len() != forecasts.len() {
        return Err(Error::MemberCountMismatch { expected: pmps.len(), got: forecasts.len() });
    }
    Ok(pmps.iter().zip(forecasts).map(|(w, f)| w * f).sum())
}

/// A model able to make one-step-ahead forecasts along a lag segment.
pub trait OneStepForecaster: Send + Sync {
    /// Number of lagged values needed before the first forecast.
    fn lags_required(&self) -> usize;

    /// Entry `t` is the forecast of `segment[t]` from `segment[..t]`, `None`
    /// while the lag window is incomplete.
    fn segment_forecasts(&self, segment: &[f64]) -> Vec<Option<f64>>;
}

impl OneStepForecaster for crate::arma::ArmaModel {
    fn lags_required(&self) -> usize {
        self.spec.p
    }

    fn segment_forecasts(&self, segment: &[f64]) -> Vec<Option<f64>> {
        crate::arma::ArmaModel::segment_forecasts(self, segment)
    }
}

impl OneStepForecaster for crate::nn::MlpModel {
    fn lags_required(&self) -> usize {
        self.spec.p
    }

    fn segment_forecasts(&self, segment: &[f64]) -> Vec<Option<f64>> {
        crate::nn::MlpModel::segment_forecasts(self, segment)
    }
}

/// Committee member.
pub struct CommitteeMember {
    pub name: String,
    pub bic: f64,
    pub prior: f64,
    pub model: Box<dyn OneStepForecaster>,
}

impl CommitteeMember {
    pub fn new(name: impl Into<String>, bic: f64, model: Box<dyn OneStepForecaster>) -> Self {
        CommitteeMember { name: name.into(), bic, prior: f64::NAN, model }
    }

    pub fn with_prior(mut self, prior: f64) -> Self {
        self.prior = prior;
        self
    }
}

impl std::fmt::Debug for CommitteeMember {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CommitteeMember")
            .field("name", &self.name)
            .field("bic", &self.bic)
            .field("prior", &self.prior)
            .finish()
    }
}

/// Members with frozen posterior model probabilities.
#[derive(Debug)]
pub struct Committee {
    members: Vec<CommitteeMember>,
    pmps: Vec<f64>,
}

impl Committee {
    /// Builds a committee with PMPs from the members' BICs. Members without
    /// an explicit prior share the remaining mass (uniform when none is set).
    pub fn new(mut members: Vec<CommitteeMember>) -> Result<Self> {
        Self::check_members(&members)?;
        let set: f64 = members.iter().filter(|m| !m.prior.is_nan()).map(|m| m.prior).sum();
        let unset = members.iter().filter(|m| m.prior.is_nan()).count();
        if unset > 0 {
            let share = (1.0 - set) / unset as f64;
            for m in members.iter_mut().filter(|m| m.prior.is_nan()) {
                m.prior = share;
            }
        }
        let bics: Vec<f64> = members.iter().map(|m| m.bic).collect();
        let priors: Vec<f64> = members.iter().map(|m| m.prior).collect();
        let pmps = pmp_from_bics(&bics, Some(&priors))?;
        Ok(Committee { members, pmps })
    }

    /// Builds a committee with fixed weights.
    pub fn with_weights(members: Vec<CommitteeMember>, pmps: Vec<f64>) -> Result<Self> {
        Self::check_members(&members)?;
        if pmps.len() != members.len() {
            return Err(Error::MemberCountMismatch { expected: members.len(), got: pmps.len() });
        }
        let sum: f64 = pmps.iter().sum();
        if pmps.iter().any(|w| !(0.0..=1.0).contains(w)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights must be in [0, 1] and sum to 1 (sum {sum})")));
        }
        Ok(Committee { members, pmps })
    }

    fn check_members(members: &[CommitteeMember]) -> Result<()> {
        if members.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a committee needs at least 2 members, got {}",
                members.len()
            )));
        }
        let mut names: Vec<&str> = members.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("member names must be unique".into()));
        }
        Ok(())
    }

    pub fn members(&self) -> &[CommitteeMember] {
        &self.members
    }

    pub fn pmps(&self) -> &[f64] {
        &self.pmps
    }

    pub fn names(&self) -> Vec<String> {
        self.members.iter().map(|m| m.name.clone()).collect()
    }

    /// `Σ_k pmp_k · forecast_k`.
    pub fn forecast(&self, member_forecasts: &[f64]) -> Result<f64> {
        combine(&self.pmps, member_forecasts)
    }
}

/// Status of one record of the forecast stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFlag {
    /// All members produced a forecast.
    Ok,
    /// Target is masked (night, low sun, or missing measurement).
    Masked,
    /// At least one member lacked a complete lag window.
    InsufficientHistory,
    /// A member returned a non-finite forecast.
    MemberError,
}

impl RecordFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordFlag::Ok => "ok",
            RecordFlag::Masked => "masked",
            RecordFlag::InsufficientHistory => "insufficient-history",
            RecordFlag::MemberError => "member-error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ok" => RecordFlag::Ok,
            "masked" => RecordFlag::Masked,
            "insufficient-history" => RecordFlag::InsufficientHistory,
            "member-error" => RecordFlag::MemberError,
            _ => return None,
        })
    }
}

/// One test-period hour.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub timestamp: Timestamp,
    pub ghi_measured: Option<f64>,
    pub ghi_clearsky: f64,
    /// `None` at masked samples.
    pub kcls_measured: Option<f64>,
    pub member_kcls: Vec<Option<f64>>,
    pub committee_kcls: Option<f64>,
    pub committee_ghi: Option<f64>,
    pub flag: RecordFlag,
}

/// Chronological forecast records with the member names they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordStream {
    pub member_names: Vec<String>,
    pub records: Vec<ForecastRecord>,
}

impl RecordStream {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["timestamp".into(), "ghi_measured".into(), "ghi_clearsky".into(), "kcls_measured".into()];
        h.extend(self.member_names.iter().map(|n| format!("member_{n}_kcls")));
        h.extend(["committee_kcls".into(), "committee_ghi".into(), "flags".into()]);
        h
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let to_err = |e: csv::Error| Error::Schema(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header()).map_err(to_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                format_timestamp(&r.timestamp),
                opt(r.ghi_measured),
                r.ghi_clearsky.to_string(),
                opt(r.kcls_measured),
            ];
            row.extend(r.member_kcls.iter().map(|v| opt(*v)));
            row.extend([opt(r.committee_kcls), opt(r.committee_ghi), r.flag.as_str().to_string()]);
            w.write_record(&row).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::Schema(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        let fixed_head = ["timestamp", "ghi_measured", "ghi_clearsky", "kcls_measured"];
        let fixed_tail = ["committee_kcls", "committee_ghi", "flags"];
        if cols.len() < 7 || cols[..4] != fixed_head || cols[cols.len() - 3..] != fixed_tail {
            return Err(Error::Schema(format!("unexpected forecast stream header {cols:?}")));
        }
        let member_names = cols[4..cols.len() - 3]
            .iter()
            .map(|c| {
                c.strip_prefix("member_")
                    .and_then(|s| s.strip_suffix("_kcls"))
                    .map(str::to_string)
                    .ok_or_else(|| Error::Schema(format!("bad member column `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let k = member_names.len();
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                reason: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let num = |i: usize| -> Result<Option<f64>> {
                let f = rec.get(i).unwrap_or("");
                if f.is_empty() {
                    return Ok(None);
                }
                f.parse::<f64>().map(Some).map_err(|e| Error::Parse { line, reason: format!("`{f}`: {e}") })
            };
            let timestamp = parse_timestamp(rec.get(0).unwrap_or(""), 0.0)
                .ok_or_else(|| Error::Parse { line, reason: "invalid timestamp".into() })?;
            let flag_str = rec.get(7 + k - 1).unwrap_or("");
            let flag = RecordFlag::parse(flag_str)
                .ok_or_else(|| Error::Parse { line, reason: format!("unknown flag `{flag_str}`") })?;
            records.push(ForecastRecord {
                timestamp,
                ghi_measured: num(1)?,
                ghi_clearsky: num(2)?.ok_or_else(|| Error::Parse { line, reason: "missing clear-sky value".into() })?,
                kcls_measured: num(3)?,
                member_kcls: (0..k).map(|j| num(4 + j)).collect::<Result<_>>()?,
                committee_kcls: num(4 + k)?,
                committee_ghi: num(5 + k)?,
                flag,
            });
        }
        Ok(RecordStream { member_names, records })
    }
}

/// Walks the test period in time order and produces one record per hour.
///
/// Every member forecasts from measured history only (no recursion on its
/// own outputs); targets without a full lag window are flagged, not dropped.
pub fn run_committee(
    committee: &Committee,
    kcls: &ClearSkyIndexSeries,
    clear_sky: &ClearSkySeries,
    ghi: &IrradianceSeries,
    policy: LagPolicy,
) -> Result<RecordStream> {
    if kcls.timestamps() != clear_sky.timestamps() || kcls.timestamps() != ghi.timestamps() {
        return Err(Error::MisalignedSeries("test inputs do not share timestamps".into()));
    }
    check_hourly(kcls.timestamps())?;
    let k = committee.members().len();
    let n = kcls.len();
    let mut member_kcls: Vec<Vec<Option<f64>>> = vec![vec![None; n]; k];
    for seg in kcls.segments(policy) {
        let values: Vec<f64> = seg.iter().map(|&i| kcls.values()[i]).collect();
        for (m, member) in committee.members().iter().enumerate() {
            let f = member.model.segment_forecasts(&values);
            for (pos, &i) in seg.iter().enumerate() {
                member_kcls[m][i] = f[pos];
            }
        }
    }

    let records = (0..n)
        .map(|i| {
            let valid = kcls.valid_mask()[i];
            let cs = clear_sky.values()[i];
            let forecasts: Vec<Option<f64>> = (0..k).map(|m| member_kcls[m][i]).collect();
            let (flag, committee_kcls) = if !valid {
                (RecordFlag::Masked, None)
            } else if forecasts.iter().any(|f| f.is_none()) {
                (RecordFlag::InsufficientHistory, None)
            } else if forecasts.iter().any(|f| !f.unwrap().is_finite()) {
                (RecordFlag::MemberError, None)
            } else {
                let f: Vec<f64> = forecasts.iter().map(|f| f.unwrap()).collect();
                (RecordFlag::Ok, Some(committee.forecast(&f).expect("one forecast per member")))
            };
            ForecastRecord {
                timestamp: kcls.timestamps()[i],
                ghi_measured: ghi.values()[i],
                ghi_clearsky: cs,
                kcls_measured: valid.then(|| kcls.values()[i]),
                member_kcls: forecasts,
                committee_kcls,
                committee_ghi: committee_kcls.map(|v| reconstruct_ghi(v, cs)),
                flag,
            }
        })
        .collect();
    Ok(RecordStream { member_names: committee.names(), records })
}
