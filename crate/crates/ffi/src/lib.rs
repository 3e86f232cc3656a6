//! C ABI over the solarcast forecasters and scoring rules.
//!
//! Every fallible entry point returns a [`SolarcastStatus`] and writes its
//! result through an out-pointer. On failure the out-pointer is left
//! untouched and a message is available from
//! [`solarcast_last_error_message`] on the calling thread.
//!
//! Design matrices are passed row-major as `n_rows * n_features` doubles
//! without an intercept column; set `intercept` to prepend one.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use chrono::NaiveDate;
use solarcast::bayes::{fit_bayes, BayesModel};
use solarcast::clearsky::{clear_sky, SiteLocation};
use solarcast::data::DesignMatrix;
use solarcast::metrics::{crps_gaussian, pinball};
use solarcast::point::{fit_ols, LinearModel};
use solarcast::quantile::{fit_quantile_set, QuantileModel, SolverOptions};
use solarcast::stats::Gaussian1D;
use solarcast::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolarcastStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    EmptyData = 3,
    DimensionMismatch = 4,
    InsufficientData = 5,
    ZeroVariance = 6,
    SingularFit = 7,
    NotPositiveDefinite = 8,
    NonConvergence = 9,
    Internal = 10,
}

impl From<&Error> for SolarcastStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Domain(_) | Error::Config(_) => Self::InvalidParameter,
            Error::EmptyData(_) => Self::EmptyData,
            Error::LengthMismatch { .. } | Error::DimensionMismatch { .. } => Self::DimensionMismatch,
            Error::InsufficientData { .. } => Self::InsufficientData,
            Error::ZeroVariance(_) => Self::ZeroVariance,
            Error::SingularFit { .. } => Self::SingularFit,
            Error::NotPositiveDefinite { .. } => Self::NotPositiveDefinite,
            Error::NonConvergence { .. } => Self::NonConvergence,
            _ => Self::Internal,
        }
    }
}

/// Clear-sky irradiance in W/m² and solar zenith in degrees.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolarcastClearSky {
    pub zenith_deg: f64,
    pub ghi: f64,
    pub dni: f64,
}

/// Least-squares point model.
pub struct SolarcastLinearModel(LinearModel);

/// One linear model per quantile level.
pub struct SolarcastQuantileModel(QuantileModel);

/// Gaussian posterior over weights plus likelihood noise.
pub struct SolarcastBayesModel(BayesModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

struct Failure(SolarcastStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(SolarcastStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SolarcastStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SolarcastStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SolarcastStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            SolarcastStatus::Internal
        }
    }
}

/// # Safety
/// `p` must be null or point to `len` readable doubles.
unsafe fn doubles<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `x` must hold `n_rows * n_features` doubles and `y` must hold `n_rows`.
unsafe fn design(
    x: *const f64,
    n_rows: usize,
    n_features: usize,
    y: *const f64,
    intercept: bool,
) -> Result<DesignMatrix, Failure> {
    let len = n_rows
        .checked_mul(n_features)
        .ok_or_else(|| Failure(SolarcastStatus::InvalidParameter, "design size overflows".into()))?;
    let flat = doubles(x, len, "x")?;
    let targets = doubles(y, n_rows, "y")?.to_vec();
    let rows: Vec<Vec<f64>> = if n_features == 0 {
        vec![Vec::new(); n_rows]
    } else {
        flat.chunks(n_features).map(<[f64]>::to_vec).collect()
    };
    let names: Vec<String> = (0..n_features).map(|i| format!("x{i}")).collect();
    Ok(DesignMatrix::from_raw(&rows, targets, &names, intercept)?)
}

fn check_width(expected: usize, got: usize) -> Result<(), Failure> {
    if expected != got {
        return Err(Error::DimensionMismatch { row: 0, expected, got }.into());
    }
    Ok(())
}

/// Message for the most recent failure on this thread, or null after a
/// success. Valid until the next solarcast call on the same thread.
#[no_mangle]
pub extern "C" fn solarcast_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn solarcast_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fits ordinary least squares.
///
/// # Safety
/// `x` must point to `n_rows * n_features` doubles, `y` to `n_rows` doubles,
/// and `out` must be writable. Release the model with
/// [`solarcast_linear_free`].
#[no_mangle]
pub unsafe extern "C" fn solarcast_linear_fit(
    x: *const f64,
    n_rows: usize,
    n_features: usize,
    y: *const f64,
    intercept: bool,
    out: *mut *mut SolarcastLinearModel,
) -> SolarcastStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dm = design(x, n_rows, n_features, y, intercept)?;
        let model = fit_ols(&dm)?;
        *out = Box::into_raw(Box::new(SolarcastLinearModel(model)));
        Ok(())
    })
}

/// Number of weights including the intercept, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle from [`solarcast_linear_fit`].
#[no_mangle]
pub unsafe extern "C" fn solarcast_linear_n_weights(model: *const SolarcastLinearModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.weights.len())
}

/// Copies the weights, intercept first when present.
///
/// # Safety
/// `model` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn solarcast_linear_weights(
    model: *const SolarcastLinearModel,
    out: *mut f64,
    len: usize,
) -> SolarcastStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        check_width(m.0.weights.len(), len)?;
        slice::from_raw_parts_mut(out, len).copy_from_slice(&m.0.weights);
        Ok(())
    })
}

/// Point prediction at one row of raw features.
///
/// # Safety
/// `model` must be a live handle, `x` must hold `n_features` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn solarcast_linear_predict(
    model: *const SolarcastLinearModel,
    x: *const f64,
    n_features: usize,
    out: *mut f64,
) -> SolarcastStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.0.predict(doubles(x, n_features, "x")?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`solarcast_linear_fit`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn solarcast_linear_free(model: *mut SolarcastLinearModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Fits one quantile regression per level. Levels must be strictly
/// increasing inside (0, 1).
///
/// # Safety
/// As for [`solarcast_linear_fit`]; `levels` must hold `n_levels` doubles.
/// Release the model with [`solarcast_quantile_free`].
#[no_mangle]
pub unsafe extern "C" fn solarcast_quantile_fit(
    x: *const f64,
    n_rows: usize,
    n_features: usize,
    y: *const f64,
    intercept: bool,
    levels: *const f64,
    n_levels: usize,
    out: *mut *mut SolarcastQuantileModel,
) -> SolarcastStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let levels = doubles(levels, n_levels, "levels")?;
        let dm = design(x, n_rows, n_features, y, intercept)?;
        let model = fit_quantile_set(&dm, levels, &SolverOptions::default())?;
        *out = Box::into_raw(Box::new(SolarcastQuantileModel(model)));
        Ok(())
    })
}

/// Number of quantile levels, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle from [`solarcast_quantile_fit`].
#[no_mangle]
pub unsafe extern "C" fn solarcast_quantile_n_levels(model: *const SolarcastQuantileModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.quantiles().len())
}

/// Writes one prediction per level, nondecreasing in the level.
///
/// # Safety
/// `model` must be a live handle, `x` must hold `n_features` doubles and
/// `out` must hold `n_levels` doubles.
#[no_mangle]
pub unsafe extern "C" fn solarcast_quantile_predict(
    model: *const SolarcastQuantileModel,
    x: *const f64,
    n_features: usize,
    out: *mut f64,
    n_levels: usize,
) -> SolarcastStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        check_width(m.0.quantiles().len(), n_levels)?;
        let set = m.0.predict(doubles(x, n_features, "x")?)?;
        slice::from_raw_parts_mut(out, n_levels).copy_from_slice(&set.values);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`solarcast_quantile_fit`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn solarcast_quantile_free(model: *mut SolarcastQuantileModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Bayesian linear regression with the copula-derived prior. A NaN
/// `noise_std` selects the residual standard deviation of a least-squares
/// fit.
///
/// # Safety
/// As for [`solarcast_linear_fit`]. Release the model with
/// [`solarcast_bayes_free`].
#[no_mangle]
pub unsafe extern "C" fn solarcast_bayes_fit(
    x: *const f64,
    n_rows: usize,
    n_features: usize,
    y: *const f64,
    intercept: bool,
    prior_std: f64,
    noise_std: f64,
    out: *mut *mut SolarcastBayesModel,
) -> SolarcastStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dm = design(x, n_rows, n_features, y, intercept)?;
        let noise = (!noise_std.is_nan()).then_some(noise_std);
        let model = fit_bayes(&dm, prior_std, noise)?;
        *out = Box::into_raw(Box::new(SolarcastBayesModel(model)));
        Ok(())
    })
}

/// Posterior mean of the weights, intercept first when present.
///
/// # Safety
/// `model` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn solarcast_bayes_posterior_mean(
    model: *const SolarcastBayesModel,
    out: *mut f64,
    len: usize,
) -> SolarcastStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mean = m.0.posterior.mean();
        check_width(mean.len(), len)?;
        slice::from_raw_parts_mut(out, len).copy_from_slice(mean);
        Ok(())
    })
}

/// Gaussian predictive mean and standard deviation at one row.
///
/// # Safety
/// `model` must be a live handle, `x` must hold `n_features` doubles and
/// `mean` and `std` must be writable.
#[no_mangle]
pub unsafe extern "C" fn solarcast_bayes_predict(
    model: *const SolarcastBayesModel,
    x: *const f64,
    n_features: usize,
    mean: *mut f64,
    std: *mut f64,
) -> SolarcastStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if mean.is_null() || std.is_null() {
            return Err(null("output"));
        }
        let g = m.0.predictive(doubles(x, n_features, "x")?)?;
        *mean = g.mean();
        *std = g.std();
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`solarcast_bayes_fit`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn solarcast_bayes_free(model: *mut SolarcastBayesModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Closed-form CRPS of N(mean, std²) at `actual`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn solarcast_crps_gaussian(
    mean: f64,
    std: f64,
    actual: f64,
    out: *mut f64,
) -> SolarcastStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = Gaussian1D::new(mean, std)?;
        *out = crps_gaussian(&g, actual);
        Ok(())
    })
}

/// Pinball loss of a level-`q` prediction.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn solarcast_pinball(
    q: f64,
    predicted: f64,
    actual: f64,
    out: *mut f64,
) -> SolarcastStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = pinball(q, predicted, actual)?;
        Ok(())
    })
}

/// Clear-sky irradiance at a local standard clock time. `utc_offset` is in
/// hours east of UTC; `turbidity` is the Linke factor in [1, 10].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn solarcast_clear_sky(
    latitude: f64,
    longitude: f64,
    utc_offset: f64,
    year: i32,
    month: u32,
    day: u32,
    hour: u32,
    minute: u32,
    turbidity: f64,
    out: *mut SolarcastClearSky,
) -> SolarcastStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let site = SiteLocation::new(latitude, longitude, utc_offset)?;
        let t = NaiveDate::from_ymd_opt(year, month, day)
            .and_then(|d| d.and_hms_opt(hour, minute, 0))
            .ok_or_else(|| {
                Failure(
                    SolarcastStatus::InvalidParameter,
                    format!("invalid time {year:04}-{month:02}-{day:02} {hour:02}:{minute:02}"),
                )
            })?;
        let p = clear_sky(&site, t, turbidity)?;
        *out = SolarcastClearSky {
            zenith_deg: p.solar_zenith,
            ghi: p.ghi,
            dni: p.dni,
        };
        Ok(())
    })
}
