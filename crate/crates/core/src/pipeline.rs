//! The `fit → forecast → evaluate` pipeline and the fixture generator, as
//! used by the command-line tool.
//!
//! Output directory layout:
//!
//! | file | written by |
//! |---|---|
//! | `arma_selection.csv`, `nn_selection.csv` | fit |
//! | `arma.model.toml`, `nn.model.toml` | fit |
//! | `forecast.csv` | forecast |
//! | `evaluation.txt`, `evaluation.csv`, `scored.csv` | evaluate |
//! | `scatter.csv`, `scatter.svg`, `timeslice.csv`, `timeslice.svg` | evaluate |

use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use crate::arma::{grid_search, GridSearch};
use crate::clearsky::clear_sky_series;
use crate::committee::{run_committee, Committee, RecordStream};
use crate::config::RunConfig;
use crate::data::{
    compute_clear_sky_index, ingest_csv, ClearSkyIndexSeries, ClearSkySeries, IrradianceSeries, Timestamp,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_run, EvalOptions, Evaluation};
use crate::model_doc::ModelDocument;
use crate::nn::{select_nn, NnSelection};
use crate::plot::{scatter_svg, time_slice, write_scatter_csv, TimeSlice};
use crate::synth::{generate, write_fixture, SyntheticSpec};

pub const ARMA_DOC: &str = "arma.model.toml";
pub const NN_DOC: &str = "nn.model.toml";
pub const FORECAST_CSV: &str = "forecast.csv";

/// Ingested, detrended and partitioned input.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub ghi: IrradianceSeries,
    pub clear_sky: ClearSkySeries,
    pub kcls: ClearSkyIndexSeries,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

impl PreparedData {
    pub fn train_kcls(&self) -> ClearSkyIndexSeries {
        self.kcls.slice(self.train.clone())
    }

    pub fn test_kcls(&self) -> ClearSkyIndexSeries {
        self.kcls.slice(self.test.clone())
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_file(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Reads the input file, builds the clear sky and the clear-sky index, and
/// locates the train and test ranges.
pub fn prepare(cfg: &RunConfig) -> Result<PreparedData> {
    let path = cfg.input_path();
    let ingested = ingest_csv(&path, &cfg.input.schema()).map_err(|e| Error::in_file(&path, e))?;
    let ghi = if cfg.input.interpolate_max_gap > 0 {
        ingested.ghi.interpolate_gaps(cfg.input.interpolate_max_gap)
    } else {
        ingested.ghi
    };
    let clear_sky = match ingested.clear_sky {
        Some(cs) => cs,
        None => clear_sky_series(&cfg.site, &cfg.solis, ghi.timestamps())?,
    };
    let kcls = compute_clear_sky_index(&ghi, &clear_sky, cfg.transform.threshold)?;
    let (train, test) = cfg.split.index_ranges(kcls.timestamps())?;
    let data = PreparedData { ghi, clear_sky, kcls, train, test };
    if data.train_kcls().valid_count() == 0 {
        return Err(Error::EmptyPartition { side: "train" });
    }
    Ok(data)
}

/// Outcome of [`cmd_fit`].
#[derive(Debug)]
pub struct FitReport {
    pub arma: GridSearch,
    pub nn: NnSelection,
    pub arma_doc: ModelDocument,
    pub nn_doc: ModelDocument,
    pub n_train: usize,
}

impl FitReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "training samples (valid hours): {}", self.n_train);
        let _ = writeln!(
            s,
            "ARMA grid: {} structures, {} failed; selected {} with BIC {:.6}",
            self.arma.cells.len(),
            self.arma.failures().count(),
            self.arma.best.spec,
            self.arma_doc.bic
        );
        let failed = self.nn.cells.iter().filter(|c| c.outcome.is_err()).count();
        let _ = writeln!(
            s,
            "NN candidates: {}, {} failed; selected {} with BIC {:.6}",
            self.nn.cells.len(),
            failed,
            self.nn.best.spec,
            self.nn_doc.bic
        );
        s
    }
}

fn write_arma_table(g: &GridSearch, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let e = |e: csv::Error| Error::Schema(e.to_string());
    w.write_record(["p", "q", "n_params", "status", "sigma2", "bic", "rank", "selected", "message"]).map_err(e)?;
    for c in &g.cells {
        let rank = g.ranked.iter().position(|r| r.0 == c.spec);
        let (status, sigma2, bic, msg) = match &c.outcome {
            Ok(m) => ("ok", m.sigma2.to_string(), m.bic().to_string(), String::new()),
            Err(err) => ("failed", String::new(), String::new(), err.to_string()),
        };
        w.write_record([
            c.spec.p.to_string(),
            c.spec.q.to_string(),
            c.spec.n_params().to_string(),
            status.into(),
            sigma2,
            bic,
            rank.map(|r| (r + 1).to_string()).unwrap_or_default(),
            (rank == Some(0)).to_string(),
            msg,
        ])
        .map_err(e)?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}

fn write_nn_table(sel: &NnSelection, cfg: &RunConfig, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let e = |e: csv::Error| Error::Schema(e.to_string());
    w.write_record([
        "p",
        "h",
        "n_params",
        "status",
        "gamma_eff",
        "sigma2",
        "bic",
        "log_evidence",
        "converged",
        "rank",
        "selected",
        "message",
    ])
    .map_err(e)?;
    for c in &sel.cells {
        let rank = sel.ranked.iter().position(|r| r.0 == c.spec);
        let mut row = vec![c.spec.p.to_string(), c.spec.h.to_string(), c.spec.n_params().to_string()];
        match &c.outcome {
            Ok(m) => row.extend([
                "ok".to_string(),
                m.gamma_eff.to_string(),
                m.sigma2.to_string(),
                m.bic_with(cfg.nn.bic_param_count).to_string(),
                m.log_evidence.to_string(),
                m.converged.to_string(),
                String::new(),
            ]),
            Err(err) => row.extend([
                "failed".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                err.to_string(),
            ]),
        }
        let msg = row.pop().expect("message column");
        row.push(rank.map(|r| (r + 1).to_string()).unwrap_or_default());
        row.push((rank == Some(0)).to_string());
        row.push(msg);
        w.write_record(&row).map_err(e)?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}

/// Selects and fits both members on the train range and writes model
/// documents plus selection tables.
pub fn cmd_fit(cfg: &RunConfig) -> Result<FitReport> {
    let data = prepare(cfg)?;
    let train = data.train_kcls();
    let segments = train.segment_values(cfg.transform.lag_policy);
    let a = &cfg.arma;
    let arma = grid_search(&segments, a.p_min..=a.p_max, a.q_min..=a.q_max, &a.fit_options())?;
    let nn = select_nn(&segments, &cfg.nn.lags, &cfg.nn.hidden, &cfg.nn.train_options(), cfg.nn.bic_param_count)?;

    let out = cfg.output_dir();
    ensure_dir(&out)?;
    write_arma_table(&arma, &out.join("arma_selection.csv"))?;
    write_nn_table(&nn, cfg, &out.join("nn_selection.csv"))?;
    let arma_doc = ModelDocument::arma("arma", arma.best.clone());
    let nn_doc = ModelDocument::mlp("nn", nn.best.clone(), cfg.nn.bic_param_count);
    arma_doc.save(&out.join(ARMA_DOC))?;
    nn_doc.save(&out.join(NN_DOC))?;
    Ok(FitReport { arma, nn, arma_doc, nn_doc, n_train: train.valid_count() })
}

/// Outcome of [`cmd_forecast`].
#[derive(Debug)]
pub struct ForecastReport {
    pub names: Vec<String>,
    pub bics: Vec<f64>,
    pub pmps: Vec<f64>,
    pub stream: RecordStream,
    pub path: PathBuf,
}

impl ForecastReport {
    pub fn summary(&self) -> String {
        let mut s = String::from("member  BIC  PMP\n");
        for ((n, b), p) in self.names.iter().zip(&self.bics).zip(&self.pmps) {
            let _ = writeln!(s, "{n}  {b:.6}  {p:.4}");
        }
        let ok = self.stream.records.iter().filter(|r| r.committee_kcls.is_some()).count();
        let _ = writeln!(s, "{} records ({} forecast) written to {}", self.stream.len(), ok, self.path.display());
        s
    }
}

/// Builds a committee from model documents (all must share the BIC
/// convention tag).
pub fn load_committee(paths: &[PathBuf]) -> Result<Committee> {
    let docs = paths.iter().map(|p| ModelDocument::load(p)).collect::<Result<Vec<_>>>()?;
    Committee::new(docs.into_iter().map(ModelDocument::into_member).collect())
}

/// Default model documents inside the output directory.
pub fn default_model_paths(cfg: &RunConfig) -> Vec<PathBuf> {
    let out = cfg.output_dir();
    vec![out.join(ARMA_DOC), out.join(NN_DOC)]
}

/// Runs the committee over the test range and writes the record stream.
pub fn cmd_forecast(cfg: &RunConfig, model_paths: &[PathBuf]) -> Result<ForecastReport> {
    let committee = load_committee(model_paths)?;
    let data = prepare(cfg)?;
    let test = data.test_kcls();
    if test.valid_count() == 0 {
        return Err(Error::EmptyPartition { side: "test" });
    }
    let stream = run_committee(
        &committee,
        &test,
        &data.clear_sky.slice(data.test.clone()),
        &data.ghi.slice(data.test.clone()),
        cfg.transform.lag_policy,
    )?;
    let out = cfg.output_dir();
    ensure_dir(&out)?;
    let path = out.join(FORECAST_CSV);
    stream.write_csv(create_file(&path)?)?;
    Ok(ForecastReport {
        names: committee.names(),
        bics: committee.members().iter().map(|m| m.bic).collect(),
        pmps: committee.pmps().to_vec(),
        stream,
        path,
    })
}

/// Evaluation knobs that do not need a full run configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluateSettings {
    pub eval: EvalOptions,
    /// Start of the time-slice window; the first record when unset.
    pub window_start: Option<Timestamp>,
    pub window_days: u32,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        EvaluateSettings { eval: EvalOptions::default(), window_start: None, window_days: 4 }
    }
}

impl From<&RunConfig> for EvaluateSettings {
    fn from(cfg: &RunConfig) -> Self {
        EvaluateSettings {
            eval: cfg.eval_options(),
            window_start: cfg.plot.window_start,
            window_days: cfg.plot.window_days,
        }
    }
}

/// Outcome of [`cmd_evaluate`].
#[derive(Debug)]
pub struct EvaluateReport {
    pub evaluation: Evaluation,
    pub window: TimeSlice,
}

impl EvaluateReport {
    pub fn summary(&self) -> String {
        format!(
            "{}time slice: {} hours from {}, {} rows, {} masked, {} absent\n",
            self.evaluation.table_text(),
            self.window.hours,
            crate::data::format_timestamp(&self.window.start),
            self.window.rows.len(),
            self.window.n_masked,
            self.window.n_missing
        )
    }
}

/// Scores a record stream file and writes tables and plot data to `out`.
pub fn cmd_evaluate(stream_path: &Path, out: &Path, settings: &EvaluateSettings) -> Result<EvaluateReport> {
    let file = std::fs::File::open(stream_path).map_err(|e| Error::io(stream_path, e))?;
    let stream = RecordStream::read_csv(file).map_err(|e| Error::in_file(stream_path, e))?;
    if stream.is_empty() {
        return Err(Error::in_file(stream_path, Error::EmptyInput));
    }
    let evaluation = evaluate_run(&stream, &settings.eval)?;
    ensure_dir(out)?;
    write_file(&out.join("evaluation.txt"), evaluation.table_text())?;
    evaluation.write_table_csv(create_file(&out.join("evaluation.csv"))?)?;
    evaluation.write_scored_csv(create_file(&out.join("scored.csv"))?)?;
    write_scatter_csv(&evaluation, create_file(&out.join("scatter.csv"))?)?;
    write_file(&out.join("scatter.svg"), scatter_svg(&evaluation))?;
    let start = settings.window_start.unwrap_or(stream.records[0].timestamp);
    let window = time_slice(&stream, start, settings.window_days);
    window.write_csv(create_file(&out.join("timeslice.csv"))?)?;
    write_file(&out.join("timeslice.svg"), window.svg())?;
    Ok(EvaluateReport { evaluation, window })
}

/// Generates a fixture from a spec; returns the sidecar path.
pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> Result<PathBuf> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let series = generate(spec)?;
    write_fixture(&series, out)
}
