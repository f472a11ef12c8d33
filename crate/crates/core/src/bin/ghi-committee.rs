use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ghi_committee::config::{PersistenceSetting, RunConfig, CONFIG_ENV};
use ghi_committee::eval::Normalization;
use ghi_committee::pipeline::{self, EvaluateSettings, FORECAST_CSV};
use ghi_committee::synth::{self, SyntheticSpec};
use ghi_committee::{Error, Result};

/// Hour-ahead GHI forecasting with a BIC-weighted ARMA + neural network committee.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Run configuration (TOML). Defaults to $GHI_COMMITTEE_CONFIG.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set arma.p_max=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select and fit the ARMA and neural network members on the train range.
    Fit,
    /// Run the committee over the test range and write the record stream.
    Forecast {
        /// Model documents (default: arma.model.toml and nn.model.toml in the output directory).
        #[arg(long = "model")]
        models: Vec<PathBuf>,
    },
    /// Score a record stream and write tables and plot data.
    Evaluate(EvaluateArgs),
    /// Generate a seeded synthetic fixture.
    Synth(SynthArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// Record stream (default: forecast.csv in the output directory).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory (default: the configured one).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["ghi", "kcls", "off"])]
    persistence: Option<String>,
    #[arg(long, value_parser = ["scored-mean", "all-measured"])]
    normalization: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator spec (TOML). Flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output CSV; the parameters go to a `.params.toml` sidecar.
    #[arg(long)]
    out: PathBuf,
    /// Generator family.
    #[arg(long, value_parser = ["ar", "arma", "teacher-mlp", "cloud-modulated-clearsky"])]
    kind: Option<String>,
    /// Number of hourly rows.
    #[arg(long)]
    n: Option<usize>,
    /// RNG seed (required, here or in the spec).
    #[arg(long)]
    seed: Option<u64>,
    /// Innovation standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    /// First timestamp, RFC 3339.
    #[arg(long)]
    start: Option<String>,
    /// Intercept.
    #[arg(long, allow_hyphen_values = true)]
    phi0: Option<f64>,
    /// AR coefficients, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    phi: Option<Vec<f64>>,
    /// MA coefficients, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = match &cli.config {
        Some(p) => p.clone(),
        None => std::env::var_os(CONFIG_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config(format!("no configuration: pass --config or set {CONFIG_ENV}")))?,
    };
    RunConfig::load(&path, &cli.overrides)
}

fn synth_spec(a: &SynthArgs) -> Result<SyntheticSpec> {
    let mut table: toml::Table = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    let mut set = |k: &str, v: toml::Value| {
        table.insert(k.to_string(), v);
    };
    if let Some(k) = &a.kind {
        set("kind", k.clone().into());
    }
    if let Some(n) = a.n {
        set("n", (n as i64).into());
    }
    if let Some(s) = a.seed {
        set("seed", (s as i64).into());
    }
    if let Some(v) = a.noise {
        set("noise", v.into());
    }
    if let Some(v) = &a.start {
        set("start", v.clone().into());
    }
    if let Some(v) = a.phi0 {
        set("phi0", v.into());
    }
    if let Some(v) = &a.phi {
        set("phi", v.clone().into());
    }
    if let Some(v) = &a.theta {
        set("theta", v.clone().into());
    }
    synth::parse_spec(&toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Fit => {
            let cfg = load_config(&cli)?;
            let report = pipeline::cmd_fit(&cfg)?;
            print!("{}", report.summary());
            println!("outputs in {}", cfg.output_dir().display());
        }
        Command::Forecast { models } => {
            let cfg = load_config(&cli)?;
            let paths = if models.is_empty() { pipeline::default_model_paths(&cfg) } else { models.clone() };
            let report = pipeline::cmd_forecast(&cfg, &paths)?;
            print!("{}", report.summary());
        }
        Command::Evaluate(a) => {
            let cfg = if cli.config.is_some() || std::env::var_os(CONFIG_ENV).is_some() {
                Some(load_config(&cli)?)
            } else {
                None
            };
            let mut settings = cfg.as_ref().map(EvaluateSettings::from).unwrap_or_default();
            if let Some(p) = &a.persistence {
                let s: PersistenceSetting = toml::Value::String(p.clone()).try_into().expect("validated by clap");
                settings.eval.persistence = s.mode();
            }
            if let Some(n) = &a.normalization {
                settings.eval.normalization =
                    toml::Value::String(n.clone()).try_into::<Normalization>().expect("validated by clap");
            }
            let out = a
                .out
                .clone()
                .or_else(|| cfg.as_ref().map(|c| c.output_dir()))
                .ok_or_else(|| Error::Config("pass --out or a configuration".into()))?;
            let input = a.input.clone().unwrap_or_else(|| out.join(FORECAST_CSV));
            let report = pipeline::cmd_evaluate(&input, &out, &settings)?;
            print!("{}", report.summary());
        }
        Command::Synth(a) => {
            let spec = synth_spec(a)?;
            let side = pipeline::cmd_synth(&spec, &a.out)?;
            println!("wrote {} rows to {} (parameters in {})", spec.n, a.out.display(), side.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
