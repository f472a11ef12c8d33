//! Plain-text (TOML) documents for fitted models.
//!
//! ```toml
//! name = "arma"
//! bic_convention = "per-observation"
//! bic = -2.59
//!
//! [model]
//! kind = "arma"
//! phi0 = 0.12
//! ...
//! ```
//!
//! Floats are written in shortest round-trip form, so reloading a document
//! reproduces the coefficients bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arma::ArmaModel;
use crate::committee::{CommitteeMember, BIC_CONVENTION};
use crate::error::{Error, Result};
use crate::nn::{BicParamCount, MlpModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FittedModel {
    Arma(ArmaModel),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    /// Member name used in record streams.
    pub name: String,
    pub bic_convention: String,
    pub bic: f64,
    /// Parameter count behind `bic` (NN members only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bic_param_count: Option<BicParamCount>,
    /// Optional prior model probability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<f64>,
    pub model: FittedModel,
}

impl ModelDocument {
    pub fn arma(name: impl Into<String>, model: ArmaModel) -> Self {
        ModelDocument {
            name: name.into(),
            bic_convention: BIC_CONVENTION.into(),
            bic: model.bic(),
            bic_param_count: None,
            prior: None,
            model: FittedModel::Arma(model),
        }
    }

    pub fn mlp(name: impl Into<String>, model: MlpModel, count: BicParamCount) -> Self {
        ModelDocument {
            name: name.into(),
            bic_convention: BIC_CONVENTION.into(),
            bic: model.bic_with(count),
            bic_param_count: Some(count),
            prior: None,
            model: FittedModel::Mlp(model),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Document(e.to_string()))
    }

    /// Parses a document and checks its BIC convention tag.
    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: ModelDocument = toml::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
        if doc.bic_convention != BIC_CONVENTION {
            return Err(Error::ConventionMismatch { expected: BIC_CONVENTION.into(), found: doc.bic_convention });
        }
        if !doc.bic.is_finite() {
            return Err(Error::Document(format!("{}: BIC is not finite", doc.name)));
        }
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::in_file(path, e))
    }

    pub fn into_member(self) -> CommitteeMember {
        let member = match self.model {
            FittedModel::Arma(m) => CommitteeMember::new(self.name, self.bic, Box::new(m)),
            FittedModel::Mlp(m) => CommitteeMember::new(self.name, self.bic, Box::new(m)),
        };
        match self.prior {
            Some(p) => member.with_prior(p),
            None => member,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{MlpSpec, Samples, TrainOptions};

    #[test]
    fn arma_document_round_trips_exactly() {
        let m = ArmaModel::from_coefficients(0.1 / 3.0, vec![0.5, 1.0 / 7.0], vec![0.4], 0.0123456789, 4321).unwrap();
        let doc = ModelDocument::arma("arma", m.clone());
        let text = doc.to_toml().unwrap();
        let back = ModelDocument::from_toml(&text).unwrap();
        assert_eq!(back, doc);
        assert!(text.contains("bic_convention = \"per-observation\""));
        assert!(text.contains("kind = \"arma\""));
    }

    #[test]
    fn mlp_document_round_trips_exactly() {
        let inputs: Vec<f64> = (0..120).map(|i| ((i * 37) % 17) as f64 / 17.0).collect();
        let targets: Vec<f64> = (0..60).map(|i| (inputs[2 * i] * 0.7 + 0.1).sin()).collect();
        let s = Samples::new(2, inputs, targets).unwrap();
        let o = TrainOptions { max_outer_iterations: 5, ..Default::default() };
        let m = crate::nn::train_bayes_reg(&s, MlpSpec::new(2, 3).unwrap(), &o).unwrap();
        let doc = ModelDocument::mlp("nn", m, BicParamCount::Total);
        let back = ModelDocument::from_toml(&doc.to_toml().unwrap()).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn foreign_convention_rejected() {
        let m = ArmaModel::from_coefficients(0.0, vec![0.5], vec![], 0.01, 100).unwrap();
        let text = ModelDocument::arma("a", m).to_toml().unwrap().replace("per-observation", "total-log-likelihood");
        assert!(matches!(ModelDocument::from_toml(&text), Err(Error::ConventionMismatch { .. })));
    }
}
