//! Probabilistic solar irradiance forecasting.
//!
//! Station data is ingested into a [`Dataset`], turned into a
//! [`DesignMatrix`], and fitted by one of three forecasters: least-squares
//! point regression, linear quantile regression, or Bayesian linear
//! regression with a Gaussian-copula prior. Forecasts are scored with RMSE,
//! the logarithmic score, CRPS and pinball loss. A clear-sky model supplies a
//! physical baseline.

// Positivity checks are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod clearsky;
pub mod cli;
pub mod data;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod numfmt;
pub mod point;
pub mod quantile;
pub mod stats;

pub use bayes::{build_prior, fit_bayes, forecast_series, posterior_update, BayesModel, GaussianVec};
pub use clearsky::{clear_sky, solar_position, ClearSkyPoint, SiteLocation};
pub use data::{build_design, parse_csv, Dataset, DesignMatrix, Field, Observation, Schema};
pub use error::{Error, Result};
pub use metrics::{crps_gaussian, crps_numeric, log_score, pinball, rmse, score_probabilistic, Forecasts, ScoreReport};
pub use point::{fit_ols, LinearModel};
pub use quantile::{fit_quantile, fit_quantile_set, QuantileModel, QuantileSet};
pub use stats::Gaussian1D;
