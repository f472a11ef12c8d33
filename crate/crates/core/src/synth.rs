//! Seeded synthetic fixtures.
//!
//! Index-only kinds (`ar`, `arma`, `teacher-mlp`) simulate a clear-sky index
//! `y_t` and write `ghi = scale · y_t` against a constant clear sky of
//! `scale`. The `cloud-modulated-clearsky` kind multiplies a Solis clear sky
//! by a bounded AR cloud index clipped to `[0, 1.2]`.

use std::path::{Path, PathBuf};

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::arma::ArmaModel;
use crate::clearsky::{clear_sky_series, SiteLocation, SolisParams};
use crate::data::{write_csv, ClearSkySeries, IrradianceSeries, Timestamp};
use crate::error::{Error, Result};
use crate::nn::{MlpModel, MlpSpec};

/// Upper clip of the cloud index.
pub const KCLS_CLIP: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Ar,
    Arma,
    TeacherMlp,
    CloudModulatedClearsky,
}

/// Teacher network for the `teacher-mlp` kind. Missing weights are drawn
/// from the spec seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherSpec {
    pub p: usize,
    pub h: usize,
    /// Packed `[β, β0, α, α0]` weights, see [`MlpModel::params`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

fn default_start() -> Timestamp {
    Utc.with_ymd_and_hms(2005, 1, 1, 0, 0, 0).unwrap()
}

fn default_scale() -> f64 {
    1000.0
}

fn default_burn_in() -> usize {
    500
}

fn default_noise() -> f64 {
    0.05
}

/// Generator description; also the sidecar document written next to a
/// fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: GeneratorKind,
    /// Number of hourly rows.
    pub n: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian shocks.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_start")]
    pub start: Timestamp,
    #[serde(default)]
    pub phi0: f64,
    #[serde(default)]
    pub phi: Vec<f64>,
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher: Option<TeacherSpec>,
    /// Constant clear sky of the index-only kinds.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<SiteLocation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solis: Option<SolisParams>,
}

impl SyntheticSpec {
    /// A spec of `kind` with every optional field at its default.
    pub fn new(kind: GeneratorKind, n: usize, seed: u64) -> Self {
        SyntheticSpec {
            kind,
            n,
            seed,
            noise: default_noise(),
            start: default_start(),
            phi0: 0.0,
            phi: Vec::new(),
            theta: Vec::new(),
            teacher: None,
            scale: default_scale(),
            burn_in: default_burn_in(),
            site: None,
            solis: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return bad(format!("scale must be > 0, got {}", self.scale));
        }
        if !self.phi0.is_finite() || self.phi.iter().chain(&self.theta).any(|c| !c.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        match self.kind {
            GeneratorKind::Ar | GeneratorKind::Arma | GeneratorKind::CloudModulatedClearsky => {
                if self.phi.is_empty() {
                    return bad(format!("{:?} generator needs at least one AR coefficient", self.kind));
                }
                if self.kind != GeneratorKind::Arma && !self.theta.is_empty() {
                    return bad(format!("{:?} generator takes no MA coefficients", self.kind));
                }
                let m = ArmaModel::from_coefficients(self.phi0, self.phi.clone(), self.theta.clone(), 1.0, 0)?;
                if !m.stationary {
                    return bad(format!("AR coefficients {:?} are not stationary", self.phi));
                }
                if self.kind == GeneratorKind::Arma && self.theta.is_empty() {
                    return bad("ARMA generator needs at least one MA coefficient".into());
                }
            }
            GeneratorKind::TeacherMlp => {
                let t = self
                    .teacher
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("teacher-mlp generator needs a [teacher] table".into()))?;
                let spec = MlpSpec::new(t.p, t.h)?;
                if let Some(w) = &t.weights {
                    if w.len() != spec.n_params() || w.iter().any(|v| !v.is_finite()) {
                        return bad(format!("teacher needs {} finite weights, got {}", spec.n_params(), w.len()));
                    }
                }
            }
        }
        if let Some(site) = &self.site {
            site.validate()?;
        }
        if let Some(solis) = &self.solis {
            solis.validate()?;
        }
        Ok(())
    }
}

/// A generated fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSeries {
    pub timestamps: Vec<Timestamp>,
    pub ghi: Vec<f64>,
    pub clear_sky: Vec<f64>,
    /// The simulated index (cloud index for the cloud kind).
    pub kcls: Vec<f64>,
    /// The spec with teacher weights resolved.
    pub spec: SyntheticSpec,
}

/// The teacher network of a resolved `teacher-mlp` spec.
pub fn teacher_model(spec: &SyntheticSpec) -> Result<MlpModel> {
    let t = spec.teacher.as_ref().ok_or_else(|| Error::InvalidParameter("spec has no teacher".into()))?;
    let mut m = MlpModel::zeros(MlpSpec::new(t.p, t.h)?);
    let w = t.weights.as_ref().ok_or_else(|| Error::InvalidParameter("teacher weights are not resolved".into()))?;
    m.set_params(w);
    Ok(m)
}

fn draw_teacher_weights(spec: MlpSpec, level: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (p, h) = (spec.p, spec.h);
    let mut w = Vec::with_capacity(spec.n_params());
    w.extend((0..h * p).map(|_| rng.random_range(-2.0..2.0)));
    w.extend((0..h).map(|_| rng.random_range(-1.0..1.0)));
    w.extend((0..h).map(|_| rng.random_range(-0.4..0.4)));
    w.push(level);
    w
}

/// Runs the generator.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticSeries> {
    spec.validate()?;
    let mut spec = spec.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let total = spec.burn_in + spec.n;
    let timestamps: Vec<Timestamp> = (0..spec.n).map(|i| spec.start + Duration::hours(i as i64)).collect();

    let mut y: Vec<f64> = Vec::with_capacity(total);
    match spec.kind {
        GeneratorKind::Ar | GeneratorKind::Arma | GeneratorKind::CloudModulatedClearsky => {
            let ar_sum: f64 = spec.phi.iter().sum();
            let mean = spec.phi0 / (1.0 - ar_sum);
            let clip = spec.kind == GeneratorKind::CloudModulatedClearsky;
            let mut e: Vec<f64> = Vec::with_capacity(total);
            for t in 0..total {
                let shock = normal.sample(&mut rng);
                let mut v = spec.phi0 + shock;
                for (i, c) in spec.phi.iter().enumerate() {
                    v += c * if t > i { y[t - 1 - i] } else { mean };
                }
                for (j, c) in spec.theta.iter().enumerate() {
                    if t > j {
                        v -= c * e[t - 1 - j];
                    }
                }
                if clip {
                    v = v.clamp(0.0, KCLS_CLIP);
                }
                y.push(v);
                e.push(shock);
            }
        }
        GeneratorKind::TeacherMlp => {
            let t = spec.teacher.as_mut().expect("validated");
            let mspec = MlpSpec::new(t.p, t.h)?;
            if t.weights.is_none() {
                let level = if spec.phi0 != 0.0 { spec.phi0 } else { 0.6 };
                let mut wrng = ChaCha8Rng::seed_from_u64(spec.seed);
                wrng.set_stream(1);
                t.weights = Some(draw_teacher_weights(mspec, level, &mut wrng));
            }
            let teacher = teacher_model(&spec)?;
            let p = mspec.p;
            let mut lags = vec![0.0; p];
            for _ in 0..total {
                let n = y.len();
                for (i, l) in lags.iter_mut().enumerate() {
                    *l = if n > i { y[n - 1 - i] } else { teacher.alpha0 };
                }
                y.push(teacher.forward(&lags) + normal.sample(&mut rng));
            }
        }
    }
    let kcls = y.split_off(spec.burn_in);

    let (ghi, clear_sky) = if spec.kind == GeneratorKind::CloudModulatedClearsky {
        let site = spec.site.unwrap_or_else(SiteLocation::ajaccio);
        let solis = spec.solis.unwrap_or_default();
        spec.site = Some(site);
        spec.solis = Some(solis);
        let cls = clear_sky_series(&site, &solis, &timestamps)?;
        let cls = cls.values().to_vec();
        (cls.iter().zip(&kcls).map(|(c, k)| c * k).collect(), cls)
    } else {
        if let Some((i, v)) = kcls.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "generated index is negative ({v}) at row {i}; raise phi0 or lower the noise"
            )));
        }
        (kcls.iter().map(|v| spec.scale * v).collect(), vec![spec.scale; spec.n])
    };
    Ok(SyntheticSeries { timestamps, ghi, clear_sky, kcls, spec })
}

impl SyntheticSeries {
    pub fn ghi_series(&self) -> IrradianceSeries {
        IrradianceSeries::new(self.timestamps.clone(), self.ghi.iter().map(|v| Some(*v)).collect())
            .expect("generated timestamps are hourly")
    }

    pub fn clear_sky_series(&self) -> ClearSkySeries {
        ClearSkySeries::new(self.timestamps.clone(), self.clear_sky.clone()).expect("generated timestamps are hourly")
    }

    /// CSV text with columns `timestamp,ghi,clearsky`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv(&mut buf, &self.ghi_series(), Some(&self.clear_sky_series()))?;
        Ok(buf)
    }
}

/// Path of the parameter sidecar written next to `out`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("params.toml")
}

/// Writes the fixture CSV and its parameter sidecar; returns the sidecar path.
pub fn write_fixture(series: &SyntheticSeries, out: &Path) -> Result<PathBuf> {
    std::fs::write(out, series.to_csv()?).map_err(|e| Error::io(out, e))?;
    let side = sidecar_path(out);
    let text = toml::to_string(&series.spec).map_err(|e| Error::Document(e.to_string()))?;
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))?;
    Ok(side)
}

/// Reads a generator spec from TOML text.
pub fn parse_spec(text: &str) -> Result<SyntheticSpec> {
    let spec: SyntheticSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ingest_reader, CsvSchema};

    fn ar1(n: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec { phi0: 0.3, phi: vec![0.7], noise: 0.05, ..SyntheticSpec::new(GeneratorKind::Ar, n, seed) }
    }

    #[test]
    fn ar1_is_seed_deterministic() {
        let a = generate(&ar1(100, 42)).unwrap().to_csv().unwrap();
        let b = generate(&ar1(100, 42)).unwrap().to_csv().unwrap();
        assert_eq!(a, b);
        let c = generate(&ar1(100, 43)).unwrap().to_csv().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ar1_values_follow_recursion_statistics() {
        let s = generate(&ar1(20000, 1)).unwrap();
        let mean = s.kcls.iter().sum::<f64>() / s.kcls.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        assert!(s.ghi.iter().zip(&s.kcls).all(|(g, k)| (g - 1000.0 * k).abs() < 1e-9));
    }

    #[test]
    fn empty_fixture_has_header_only() {
        let s = generate(&ar1(0, 5)).unwrap();
        let text = String::from_utf8(s.to_csv().unwrap()).unwrap();
        assert_eq!(text, "timestamp,ghi,clearsky\n");
        let back = ingest_reader(text.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(back.rows, 0);
    }

    #[test]
    fn cloud_kind_construction() {
        let spec = SyntheticSpec {
            phi0: 0.15,
            phi: vec![0.8],
            noise: 0.2,
            ..SyntheticSpec::new(GeneratorKind::CloudModulatedClearsky, 24 * 60, 9)
        };
        let s = generate(&spec).unwrap();
        assert!(s.kcls.iter().all(|k| (0.0..=KCLS_CLIP).contains(k)));
        assert!(s.kcls.iter().any(|k| *k == 0.0 || *k == KCLS_CLIP));
        let cls = clear_sky_series(&SiteLocation::ajaccio(), &SolisParams::default(), &s.timestamps).unwrap();
        for i in 0..s.ghi.len() {
            assert_eq!(s.clear_sky[i], cls.values()[i]);
            assert_eq!(s.ghi[i], cls.values()[i] * s.kcls[i]);
        }
    }

    #[test]
    fn teacher_weights_resolved_and_reused() {
        let spec = SyntheticSpec {
            teacher: Some(TeacherSpec { p: 2, h: 3, weights: None }),
            noise: 0.01,
            ..SyntheticSpec::new(GeneratorKind::TeacherMlp, 500, 3)
        };
        let a = generate(&spec).unwrap();
        let w = a.spec.teacher.as_ref().unwrap().weights.clone().unwrap();
        assert_eq!(w.len(), 3 * 2 + 3 + 3 + 1);
        let again = generate(&a.spec).unwrap();
        assert_eq!(a.kcls, again.kcls);
    }

    #[test]
    fn invalid_specs_rejected() {
        let nonstationary = SyntheticSpec { phi: vec![1.1], ..SyntheticSpec::new(GeneratorKind::Ar, 10, 1) };
        assert!(matches!(generate(&nonstationary), Err(Error::InvalidParameter(_))));
        let no_ma = SyntheticSpec { phi: vec![0.5], ..SyntheticSpec::new(GeneratorKind::Arma, 10, 1) };
        assert!(generate(&no_ma).is_err());
        let negative = SyntheticSpec { phi: vec![0.5], noise: 1.0, ..SyntheticSpec::new(GeneratorKind::Ar, 200, 1) };
        assert!(generate(&negative).is_err());
        assert!(parse_spec("kind = \"ar\"\nn = 10\nphi = [0.5]\n").is_err(), "seed is mandatory");
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let s = generate(&SyntheticSpec {
            teacher: Some(TeacherSpec { p: 1, h: 2, weights: None }),
            ..SyntheticSpec::new(GeneratorKind::TeacherMlp, 10, 8)
        })
        .unwrap();
        let text = toml::to_string(&s.spec).unwrap();
        assert_eq!(parse_spec(&text).unwrap(), s.spec);
    }
}
