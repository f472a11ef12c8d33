//! Error metrics, the persistence baseline and comparison tables.
//!
//! MBE is `mean(forecast − measured)`: positive means over-forecasting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::committee::{RecordFlag, RecordStream};
use crate::data::{format_timestamp, reconstruct_ghi, segments, LagPolicy, Timestamp};
use crate::error::{Error, Result};

fn check_pair(forecast: &[f64], measured: &[f64]) -> Result<()> {
    if forecast.len() != measured.len() {
        return Err(Error::LengthMismatch { left: forecast.len(), right: measured.len() });
    }
    if forecast.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

pub fn rmse(forecast: &[f64], measured: &[f64]) -> Result<f64> {
    check_pair(forecast, measured)?;
    let mse = forecast.iter().zip(measured).map(|(f, m)| (f - m).powi(2)).sum::<f64>() / forecast.len() as f64;
    Ok(mse.sqrt())
}

pub fn mbe(forecast: &[f64], measured: &[f64]) -> Result<f64> {
    check_pair(forecast, measured)?;
    Ok(forecast.iter().zip(measured).map(|(f, m)| f - m).sum::<f64>() / forecast.len() as f64)
}

/// RMSE as a percentage of `normalization_mean`.
pub fn nrmse(forecast: &[f64], measured: &[f64], normalization_mean: f64) -> Result<f64> {
    let r = rmse(forecast, measured)?;
    nrmse_from_rmse(r, normalization_mean)
}

pub fn nrmse_from_rmse(rmse: f64, normalization_mean: f64) -> Result<f64> {
    if !(normalization_mean > 0.0 && normalization_mean.is_finite()) {
        return Err(Error::ZeroNormalization(normalization_mean));
    }
    Ok(100.0 * rmse / normalization_mean)
}

/// What the persistence baseline carries forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PersistenceMode {
    /// Next GHI equals the last measured GHI.
    #[default]
    Ghi,
    /// Next clear-sky index equals the last one, rescaled by the target's
    /// clear-sky GHI ("smart persistence").
    Kcls,
}

/// One past observation available to the persistence baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub ghi: f64,
    pub kcls: f64,
}

/// Persistence forecast of the next hour's GHI.
pub fn persistence_forecast(history: &[Observation], cls_target: f64, mode: PersistenceMode) -> Result<f64> {
    let last = history.last().ok_or(Error::InsufficientHistory { needed: 1, available: 0 })?;
    Ok(match mode {
        PersistenceMode::Ghi => last.ghi,
        PersistenceMode::Kcls => reconstruct_ghi(last.kcls, cls_target),
    })
}

/// Denominator population for nRMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Mean measured GHI over the scored samples.
    #[default]
    ScoredMean,
    /// Mean measured GHI over every non-missing hour of the stream, nights
    /// included.
    AllMeasured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Persistence baseline row; `None` drops it.
    pub persistence: Option<PersistenceMode>,
    pub normalization: Normalization,
    pub lag_policy: LagPolicy,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            persistence: Some(PersistenceMode::Ghi),
            normalization: Normalization::ScoredMean,
            lag_policy: LagPolicy::Contiguous,
        }
    }
}

/// Metrics for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEvaluation {
    pub model: String,
    pub n_scored: usize,
    pub rmse: f64,
    pub nrmse: f64,
    pub mbe: f64,
    pub normalization_mean: f64,
}

impl ForecastEvaluation {
    pub fn compute(model: &str, forecast: &[f64], measured: &[f64], normalization_mean: f64) -> Result<Self> {
        let r = rmse(forecast, measured)?;
        Ok(ForecastEvaluation {
            model: model.to_string(),
            n_scored: forecast.len(),
            rmse: r,
            nrmse: nrmse_from_rmse(r, normalization_mean)?,
            mbe: mbe(forecast, measured)?,
            normalization_mean,
        })
    }
}

/// GHI forecasts of every compared model at one scored hour.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRecord {
    pub timestamp: Timestamp,
    pub measured: f64,
    pub forecasts: Vec<f64>,
}

/// Comparison over a common set of scored hours.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub models: Vec<String>,
    pub rows: Vec<ForecastEvaluation>,
    pub scored: Vec<ScoredRecord>,
    /// Valid targets left out because some model had no forecast.
    pub n_excluded: usize,
    pub normalization_mean: f64,
}

/// GHI persistence forecast per record (`None` without a previous sample in
/// the same lag chain).
pub fn persistence_series(stream: &RecordStream, mode: PersistenceMode, policy: LagPolicy) -> Vec<Option<f64>> {
    let recs = &stream.records;
    let valid: Vec<bool> = recs.iter().map(|r| r.kcls_measured.is_some() && r.ghi_measured.is_some()).collect();
    let mut out = vec![None; recs.len()];
    for seg in segments(&valid, policy) {
        let mut history: Vec<Observation> = Vec::new();
        for &i in &seg {
            out[i] = persistence_forecast(&history, recs[i].ghi_clearsky, mode).ok();
            history.push(Observation { ghi: recs[i].ghi_measured.unwrap(), kcls: recs[i].kcls_measured.unwrap() });
        }
    }
    out
}

/// Scores every model of a forecast stream on the same hours.
pub fn evaluate_run(stream: &RecordStream, opts: &EvalOptions) -> Result<Evaluation> {
    let mut models: Vec<String> = stream.member_names.clone();
    models.push("committee".into());
    let persistence = opts.persistence.map(|mode| persistence_series(stream, mode, opts.lag_policy));
    if let Some(mode) = opts.persistence {
        models.push(match mode {
            PersistenceMode::Ghi => "persistence".into(),
            PersistenceMode::Kcls => "persistence-kcls".into(),
        });
    }

    let mut scored = Vec::new();
    let mut n_excluded = 0;
    for (i, r) in stream.records.iter().enumerate() {
        let (Some(measured), Some(_)) = (r.ghi_measured, r.kcls_measured) else {
            continue;
        };
        let mut forecasts: Vec<Option<f64>> =
            r.member_kcls.iter().map(|k| k.map(|k| reconstruct_ghi(k, r.ghi_clearsky))).collect();
        forecasts.push(if r.flag == RecordFlag::Ok { r.committee_ghi } else { None });
        if let Some(p) = &persistence {
            forecasts.push(p[i]);
        }
        match forecasts.iter().map(|f| f.filter(|v| v.is_finite())).collect::<Option<Vec<f64>>>() {
            Some(forecasts) => scored.push(ScoredRecord { timestamp: r.timestamp, measured, forecasts }),
            None => n_excluded += 1,
        }
    }
    if scored.is_empty() {
        return Err(Error::EmptyInput);
    }
    let normalization_mean = match opts.normalization {
        Normalization::ScoredMean => scored.iter().map(|s| s.measured).sum::<f64>() / scored.len() as f64,
        Normalization::AllMeasured => {
            let all: Vec<f64> = stream.records.iter().filter_map(|r| r.ghi_measured).collect();
            all.iter().sum::<f64>() / all.len() as f64
        }
    };
    let measured: Vec<f64> = scored.iter().map(|s| s.measured).collect();
    let rows = models
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let f: Vec<f64> = scored.iter().map(|s| s.forecasts[m]).collect();
            ForecastEvaluation::compute(name, &f, &measured, normalization_mean)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation { models, rows, scored, n_excluded, normalization_mean })
}

impl Evaluation {
    pub fn row(&self, model: &str) -> Option<&ForecastEvaluation> {
        self.rows.iter().find(|r| r.model == model)
    }

    /// Aligned plain-text table.
    pub fn table_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
        let mut s = format!("{:<width$}  {:>10}  {:>9}  {:>9}  {:>8}\n", "Model", "RMSE", "nRMSE (%)", "MBE", "n");
        for r in &self.rows {
            s += &format!(
                "{:<width$}  {:>10.2}  {:>9.2}  {:>9.2}  {:>8}\n",
                r.model, r.rmse, r.nrmse, r.mbe, r.n_scored
            );
        }
        s += &format!(
            "RMSE and MBE in Wh/m2; MBE = mean(forecast - measured); nRMSE denominator {:.2} Wh/m2; {} valid hours excluded (incomplete lag window)\n",
            self.normalization_mean, self.n_excluded
        );
        s
    }

    pub fn write_table_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let e = |e: csv::Error| Error::Schema(e.to_string());
        w.write_record(["model", "rmse", "nrmse_percent", "mbe", "n_scored", "normalization_mean"]).map_err(e)?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.rmse.to_string(),
                r.nrmse.to_string(),
                r.mbe.to_string(),
                r.n_scored.to_string(),
                r.normalization_mean.to_string(),
            ])
            .map_err(e)?;
        }
        w.flush().map_err(|e| Error::Schema(e.to_string()))
    }

    /// Scored hours with per-model forecasts and errors appended.
    pub fn write_scored_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let e = |e: csv::Error| Error::Schema(e.to_string());
        let mut header = vec!["timestamp".to_string(), "ghi_measured".into()];
        for m in &self.models {
            header.push(format!("{m}_ghi"));
            header.push(format!("{m}_error"));
        }
        w.write_record(&header).map_err(e)?;
        for s in &self.scored {
            let mut row = vec![format_timestamp(&s.timestamp), s.measured.to_string()];
            for f in &s.forecasts {
                row.push(f.to_string());
                row.push((f - s.measured).to_string());
            }
            w.write_record(&row).map_err(e)?;
        }
        w.flush().map_err(|e| Error::Schema(e.to_string()))
    }
}
