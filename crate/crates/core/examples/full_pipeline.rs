//! Synthetic fixture -> fit -> forecast -> evaluate, in a temporary directory.

use ghi_committee::config::{RunConfig, DEFAULT_TEMPLATE};
use ghi_committee::pipeline::{cmd_evaluate, cmd_fit, cmd_forecast, cmd_synth, default_model_paths, EvaluateSettings};
use ghi_committee::synth::{GeneratorKind, SyntheticSpec};

fn main() -> ghi_committee::Result<()> {
    let dir = std::env::temp_dir().join("ghi-committee-pipeline");
    let spec = SyntheticSpec {
        phi0: 0.14,
        phi: vec![0.8],
        noise: 0.12,
        ..SyntheticSpec::new(GeneratorKind::CloudModulatedClearsky, 2 * 8760, 7)
    };
    cmd_synth(&spec, &dir.join("fixture.csv"))?;

    // Smaller search than the template default to keep the demo quick.
    let overrides: Vec<String> = ["arma.p_max=5", "arma.q_max=5", "nn.lags=[1,2,3]", "nn.hidden=[1,2,4]"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut cfg = RunConfig::from_toml_with_overrides(DEFAULT_TEMPLATE, &overrides)?;
    cfg.base_dir = dir.clone();

    let fit = cmd_fit(&cfg)?;
    print!("{}", fit.summary());
    let fc = cmd_forecast(&cfg, &default_model_paths(&cfg))?;
    print!("{}", fc.summary());
    let ev = cmd_evaluate(&fc.path, &cfg.output_dir(), &EvaluateSettings::from(&cfg))?;
    print!("{}", ev.summary());
    println!("outputs in {}", cfg.output_dir().display());
    Ok(())
}
