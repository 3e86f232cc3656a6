//! Bayesian linear regression with a Gaussian-copula-informed prior.
//!
//! The weights get a Gaussian prior `N(μ₀, Σ₀)` and the targets a Gaussian
//! likelihood with noise standard deviation `s`. The posterior is Gaussian in
//! closed form:
//!
//! ```text
//! Σ_N = (Σ₀⁻¹ + s⁻² ΦᵀΦ)⁻¹
//! μ_N = Σ_N (Σ₀⁻¹ μ₀ + s⁻² Φᵀy)
//! ```
//!
//! and the predictive distribution at features `x` is
//! `N(φ(x)ᵀμ_N, φ(x)ᵀ Σ_N φ(x) + s²)`.
//!
//! The prior mean comes from a bivariate Gaussian copula per feature: with
//! `ρ_z` the correlation of the normal scores of a feature and the target,
//! the slope prior is `ρ_z · sd(y)/sd(x)` and the intercept prior puts the
//! prior line through the data centroid. A scalar prior standard deviation
//! `σ` means `Σ₀ = σ²·I`.

use serde::{Deserialize, Serialize};

use crate::data::{with_intercept, DesignMatrix, INTERCEPT_NAME};
use crate::error::{Error, Result};
use crate::linalg::{condition_number, dot, symmetric_eigen, Cholesky, Matrix};
use crate::point::fit_ols;
use crate::stats::{copula_dependence, copula_normal_scores, mean, sample_std, Gaussian1D};

/// Relative symmetry tolerance for covariance matrices.
const SYMMETRY_TOL: f64 = 1e-10;

/// Multivariate normal over the weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVec {
    mean: Vec<f64>,
    cov: Matrix,
}

impl GaussianVec {
    /// Requires a symmetric positive-definite covariance matching `mean`.
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        if !cov.is_square() || cov.rows() != mean.len() {
            return Err(Error::DimensionMismatch {
                row: 0,
                expected: mean.len(),
                got: cov.rows(),
            });
        }
        if cov.asymmetry() > SYMMETRY_TOL {
            return Err(Error::InvalidParameter(format!(
                "covariance asymmetric (relative {:.3e})",
                cov.asymmetry()
            )));
        }
        Cholesky::new(&cov)?;
        Ok(Self { mean, cov })
    }

    /// `N(mean, std²·I)`.
    pub fn isotropic(mean: Vec<f64>, std: f64) -> Result<Self> {
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::InvalidParameter(format!("prior std must be > 0, got {std}")));
        }
        let m = mean.len();
        Self::new(mean, Matrix::identity(m).scale(std * std))
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Serialize, Deserialize)]
struct GaussianVecJson {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl Serialize for GaussianVec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GaussianVecJson {
            mean: self.mean.clone(),
            cov: self.cov.to_rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GaussianVec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = GaussianVecJson::deserialize(d)?;
        let cov = if raw.cov.is_empty() {
            Matrix::zeros(0, 0)
        } else {
            Matrix::from_rows(&raw.cov).map_err(D::Error::custom)?
        };
        GaussianVec::new(raw.mean, cov).map_err(D::Error::custom)
    }
}

/// Fitted model: prior, posterior and likelihood noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesModel {
    pub prior: GaussianVec,
    pub posterior: GaussianVec,
    pub noise_std: f64,
    pub feature_names: Vec<String>,
}

impl BayesModel {
    pub fn intercept(&self) -> bool {
        self.feature_names.first().is_some_and(|n| n == INTERCEPT_NAME)
    }

    pub fn n_features(&self) -> usize {
        self.posterior.dim() - usize::from(self.intercept())
    }

    /// Smallest eigenvalue of `Σ₀ − Σ_N`; nonnegative up to roundoff.
    pub fn contraction_margin(&self) -> f64 {
        let diff = self.prior.cov().sub(self.posterior.cov());
        symmetric_eigen(&diff).0.first().copied().unwrap_or(0.0)
    }

    /// Predictive distribution at raw features `x`.
    pub fn predictive(&self, x: &[f64]) -> Result<Gaussian1D> {
        predictive_at_row(self, x, 0)
    }
}

fn predictive_at_row(model: &BayesModel, x: &[f64], row: usize) -> Result<Gaussian1D> {
    if x.len() != model.n_features() {
        return Err(Error::DimensionMismatch {
            row,
            expected: model.n_features(),
            got: x.len(),
        });
    }
    let phi = with_intercept(x, model.intercept());
    let mean = dot(&phi, model.posterior.mean());
    let spread = model.posterior.cov().quad_form(&phi).max(0.0);
    let variance = spread + model.noise_std * model.noise_std;
    Gaussian1D::new(mean, variance.sqrt())
}

pub fn predictive(model: &BayesModel, x: &[f64]) -> Result<Gaussian1D> {
    model.predictive(x)
}

/// One predictive distribution per row, in order. The first row with the
/// wrong width aborts with its index.
pub fn forecast_series(model: &BayesModel, rows: &[Vec<f64>]) -> Result<Vec<Gaussian1D>> {
    rows.iter()
        .enumerate()
        .map(|(i, x)| predictive_at_row(model, x, i))
        .collect()
}

/// `(mean − k·std, mean + k·std)` per forecast.
pub fn error_bars(forecasts: &[Gaussian1D], k: f64) -> Vec<(f64, f64)> {
    forecasts
        .iter()
        .map(|g| (g.mean() - k * g.std(), g.mean() + k * g.std()))
        .collect()
}

/// Gaussian prior whose mean encodes the copula dependence of each feature
/// on the target.
pub fn build_prior(dm: &DesignMatrix, prior_std: f64) -> Result<GaussianVec> {
    if dm.n() < 2 {
        return Err(Error::InsufficientData {
            rows: dm.n(),
            cols: 2,
        });
    }
    let y = dm.targets();
    let sd_y = sample_std(y);
    if sd_y == 0.0 {
        return Err(Error::ZeroVariance("target".into()));
    }
    let y_scores = copula_normal_scores(y)?;
    let offset = usize::from(dm.intercept());
    let mut slopes = Vec::with_capacity(dm.m() - offset);
    let mut centroid_shift = 0.0;
    for j in offset..dm.m() {
        let x = dm.features().column(j);
        let sd_x = sample_std(&x);
        if sd_x == 0.0 {
            return Err(Error::ZeroVariance(dm.feature_names()[j].clone()));
        }
        let rho = copula_dependence(&copula_normal_scores(&x)?, &y_scores)?;
        let slope = rho * sd_y / sd_x;
        centroid_shift += slope * mean(&x);
        slopes.push(slope);
    }
    let mut prior_mean = Vec::with_capacity(dm.m());
    if dm.intercept() {
        prior_mean.push(mean(y) - centroid_shift);
    }
    prior_mean.extend(slopes);
    GaussianVec::isotropic(prior_mean, prior_std)
}

/// Closed-form conjugate update of `prior` with the rows of `dm`.
pub fn posterior_update(prior: &GaussianVec, dm: &DesignMatrix, noise_std: f64) -> Result<GaussianVec> {
    if !(noise_std > 0.0) || !noise_std.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise std must be > 0, got {noise_std}"
        )));
    }
    if dm.m() != prior.dim() {
        return Err(Error::DimensionMismatch {
            row: 0,
            expected: prior.dim(),
            got: dm.m(),
        });
    }
    if dm.n() == 0 {
        return Ok(prior.clone());
    }
    let inv_var = 1.0 / (noise_std * noise_std);
    let prior_precision = Cholesky::new(prior.cov())?.inverse();
    let precision = prior_precision
        .add(&dm.features().gram(None).scale(inv_var))
        .symmetrize();
    let chol = Cholesky::new(&precision).map_err(|_| Error::NotPositiveDefinite {
        condition: condition_number(&precision),
    })?;
    let data_term = dm.features().transpose_mul_vec(dm.targets(), None);
    let rhs: Vec<f64> = prior_precision
        .matvec(prior.mean())
        .iter()
        .zip(&data_term)
        .map(|(a, b)| a + inv_var * b)
        .collect();
    let mean = chol.solve(&rhs);
    let cov = chol.inverse();
    GaussianVec::new(mean, cov).map_err(|_| Error::NotPositiveDefinite {
        condition: condition_number(&precision),
    })
}

/// Sample standard deviation of the OLS residuals on the design.
pub fn empirical_noise_std(dm: &DesignMatrix) -> Result<f64> {
    let ols = fit_ols(dm)?;
    let s = sample_std(&ols.residuals(dm));
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::ZeroVariance("OLS residuals (exact fit, noise std undefined)".into()))
    }
}

/// Builds the copula prior, resolves the noise level (empirical when not
/// given) and applies the posterior update.
pub fn fit_bayes(dm: &DesignMatrix, prior_std: f64, noise_std: Option<f64>) -> Result<BayesModel> {
    let prior = build_prior(dm, prior_std)?;
    let noise_std = match noise_std {
        Some(s) => s,
        None => empirical_noise_std(dm)?,
    };
    let posterior = posterior_update(&prior, dm, noise_std)?;
    Ok(BayesModel {
        prior,
        posterior,
        noise_std,
        feature_names: dm.feature_names().to_vec(),
    })
}
