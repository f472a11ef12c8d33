//! Run configuration (TOML).
//!
//! A commented template is available as [`DEFAULT_TEMPLATE`]. Individual keys
//! can be overridden with `section.key=value` strings, see
//! [`RunConfig::from_toml_with_overrides`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arma::FitOptions;
use crate::clearsky::{SiteLocation, SolisParams};
use crate::data::{CsvSchema, LagPolicy, SplitConfig, Timestamp, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, Normalization, PersistenceMode};
use crate::nn::{BicParamCount, TrainOptions};

/// Environment variable holding the default configuration path.
pub const CONFIG_ENV: &str = "GHI_COMMITTEE_CONFIG";

/// Commented default configuration.
pub const DEFAULT_TEMPLATE: &str = include_str!("../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    #[serde(default = "default_timestamp_column")]
    pub timestamp_column: String,
    #[serde(default = "default_ghi_column")]
    pub ghi_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clearsky_column: Option<String>,
    #[serde(default)]
    pub utc_offset_hours: f64,
    #[serde(default)]
    pub interpolate_max_gap: usize,
}

fn default_timestamp_column() -> String {
    CsvSchema::default().timestamp_column
}

fn default_ghi_column() -> String {
    CsvSchema::default().ghi_column
}

impl InputConfig {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            timestamp_column: self.timestamp_column.clone(),
            ghi_column: self.ghi_column.clone(),
            clearsky_column: self.clearsky_column.clone(),
            utc_offset_hours: self.utc_offset_hours,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    pub threshold: f64,
    pub lag_policy: LagPolicy,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig { threshold: DEFAULT_THRESHOLD, lag_policy: LagPolicy::Contiguous }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmaConfig {
    pub p_min: usize,
    pub p_max: usize,
    pub q_min: usize,
    pub q_max: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub min_samples_per_param: usize,
}

impl Default for ArmaConfig {
    fn default() -> Self {
        let f = FitOptions::default();
        ArmaConfig {
            p_min: 1,
            p_max: 10,
            q_min: 0,
            q_max: 10,
            max_iterations: f.max_iterations,
            tolerance: f.tolerance,
            min_samples_per_param: f.min_samples_per_param,
        }
    }
}

impl ArmaConfig {
    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            min_samples_per_param: self.min_samples_per_param,
            force_iterative: false,
        }
    }

    pub fn grid_size(&self) -> usize {
        (self.p_max + 1 - self.p_min) * (self.q_max + 1 - self.q_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnConfig {
    pub lags: Vec<usize>,
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub restarts: usize,
    pub max_outer_iterations: usize,
    pub initial_alpha: f64,
    pub bic_param_count: BicParamCount,
}

impl Default for NnConfig {
    fn default() -> Self {
        let t = TrainOptions::default();
        NnConfig {
            lags: vec![1, 2, 3, 4, 5],
            hidden: vec![1, 2, 4, 8, 12],
            seed: t.seed,
            restarts: t.restarts,
            max_outer_iterations: t.max_outer_iterations,
            initial_alpha: t.initial_alpha,
            bic_param_count: BicParamCount::Total,
        }
    }
}

impl NnConfig {
    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            seed: self.seed,
            restarts: self.restarts,
            max_outer_iterations: self.max_outer_iterations,
            initial_alpha: self.initial_alpha,
            ..TrainOptions::default()
        }
    }
}

/// Persistence baseline selection, with an explicit "off".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PersistenceSetting {
    #[default]
    Ghi,
    Kcls,
    Off,
}

impl PersistenceSetting {
    pub fn mode(self) -> Option<PersistenceMode> {
        match self {
            PersistenceSetting::Ghi => Some(PersistenceMode::Ghi),
            PersistenceSetting::Kcls => Some(PersistenceMode::Kcls),
            PersistenceSetting::Off => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub persistence: PersistenceSetting,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_start: Option<Timestamp>,
    pub window_days: u32,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig { window_start: None, window_days: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    #[serde(default = "SiteLocation::ajaccio")]
    pub site: SiteLocation,
    #[serde(default)]
    pub solis: SolisParams,
    #[serde(default)]
    pub transform: TransformConfig,
    pub split: SplitConfig,
    #[serde(default)]
    pub arma: ArmaConfig,
    #[serde(default)]
    pub nn: NnConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub plot: PlotConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn cfg_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_override_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| cfg_err(format!("override `{spec}` is not of the form section.key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for p in path {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| cfg_err(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), parse_override_value(value.trim()));
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses `text`, then applies `section.key=value` overrides in order.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(cfg_err)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(cfg_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_with_overrides(&text, overrides).map_err(|e| Error::in_file(path, e))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(cfg_err)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn input_path(&self) -> PathBuf {
        self.resolve(&self.input.path)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            persistence: self.eval.persistence.mode(),
            normalization: self.eval.normalization,
            lag_policy: self.transform.lag_policy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input.clearsky_column.is_none() {
            self.site.validate()?;
            self.solis.validate()?;
        }
        if self.input.interpolate_max_gap > 2 {
            return bad(format!("input.interpolate_max_gap must be at most 2, got {}", self.input.interpolate_max_gap));
        }
        if !(self.transform.threshold.is_finite() && self.transform.threshold > 0.0) {
            return bad(format!("transform.threshold must be > 0, got {}", self.transform.threshold));
        }
        if !self.input.utc_offset_hours.is_finite() || self.input.utc_offset_hours.abs() > 14.0 {
            return bad(format!("input.utc_offset_hours out of range: {}", self.input.utc_offset_hours));
        }
        let a = &self.arma;
        if a.p_min < 1 || a.p_min > a.p_max || a.q_min > a.q_max {
            return bad(format!(
                "invalid ARMA grid p {}..={} q {}..={} (need 1 <= p_min <= p_max, q_min <= q_max)",
                a.p_min, a.p_max, a.q_min, a.q_max
            ));
        }
        if !(a.tolerance > 0.0) || a.max_iterations == 0 {
            return bad("arma.tolerance and arma.max_iterations must be positive".into());
        }
        let n = &self.nn;
        if n.lags.is_empty() || n.hidden.is_empty() || n.lags.contains(&0) || n.hidden.contains(&0) {
            return bad("nn.lags and nn.hidden must be non-empty lists of positive integers".into());
        }
        if n.restarts == 0 || n.max_outer_iterations == 0 {
            return bad("nn.restarts and nn.max_outer_iterations must be positive".into());
        }
        if !(n.initial_alpha.is_finite() && n.initial_alpha > 0.0) {
            return bad("nn.initial_alpha must be positive".into());
        }
        if self.plot.window_days == 0 {
            return bad("plot.window_days must be positive".into());
        }
        Ok(())
    }
}
