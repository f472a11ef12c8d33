//! Hour-ahead global horizontal irradiance (GHI) forecasting with a Bayesian
//! committee of an ARMA model and a neural network.
//!
//! Measured GHI is divided by a simplified Solis clear-sky model to give the
//! clear-sky index. Both members are fit to that index, each is given a
//! posterior model probability from its BIC, and the committee forecast is
//! the probability-weighted mean of the member forecasts, mapped back to GHI.
//!
//! Runnable examples, one per capability (`cargo run --release --example <name>`):
//!
//! - `clear_sky`: solar elevation and Solis clear-sky GHI for a day
//! - `clear_sky_index`: detrending, masking and the round trip back to GHI
//! - `arma_grid`: BIC grid search over ARMA orders
//! - `nn_bayes_reg`: Bayesian-regularized network training and selection
//! - `committee`: posterior model probabilities and the combined forecast
//! - `evaluate`: RMSE, nRMSE and MBE against persistence
//! - `synth`: seeded synthetic fixtures
//! - `full_pipeline`: synth, fit, forecast and evaluate end to end

pub mod arma;
pub mod clearsky;
pub mod committee;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model_doc;
pub mod nn;
pub mod pipeline;
pub mod plot;
pub mod synth;

pub use error::{Error, Result};
