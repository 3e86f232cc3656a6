//! Point and probabilistic scoring rules.
//!
//! Pinball loss follows the usual convention: under-prediction
//! (`predicted ≤ actual`) is weighted by `q`, over-prediction by `1 − q`, so
//! the `q`-quantile minimizes the expected loss.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::g17;
use crate::quantile::QuantileSet;
use crate::stats::{standard_normal_cdf, standard_normal_pdf, Gaussian1D};

/// Default absolute tolerance of the numerical CRPS integral.
pub const CRPS_TOL: f64 = 1e-6;
/// Half-width of the Gaussian integration bracket, in forecast standard deviations.
pub const CRPS_BRACKET_SIGMAS: f64 = 12.0;
/// Largest CDF mass tolerated outside the integration bracket.
pub const MAX_TAIL_MASS: f64 = 1e-4;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(Error::EmptyData("no values to score".into()));
    }
    Ok(())
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual.len(), predicted.len())?;
    let ss: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok((ss / actual.len() as f64).sqrt())
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual.len(), predicted.len())?;
    let s: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum();
    Ok(s / actual.len() as f64)
}

/// Logarithmic score `−ln f(x)`; a zero density scores `+∞`.
pub fn log_score(pdf_value: f64) -> Result<f64> {
    if pdf_value.is_nan() || pdf_value < 0.0 {
        return Err(Error::Domain(format!("negative density {pdf_value}")));
    }
    Ok(if pdf_value == 0.0 {
        f64::INFINITY
    } else {
        -pdf_value.ln()
    })
}

/// `−ln f(x)` for a normal forecast, evaluated without forming the density
/// so that far tails stay finite.
pub fn log_score_gaussian(g: &Gaussian1D, actual: f64) -> f64 {
    let z = (actual - g.mean()) / g.std();
    g.std().ln() + 0.5 * (2.0 * PI).ln() + 0.5 * z * z
}

/// Step CDF of the observation: 1 for `x ≥ 0`, else 0.
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn pinball(q: f64, predicted_q: f64, actual: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level {q} outside (0, 1)")));
    }
    let diff = (predicted_q - actual).abs();
    Ok(if predicted_q <= actual {
        q * diff
    } else {
        (1.0 - q) * diff
    })
}

/// Closed-form CRPS of a normal forecast:
/// `σ·[z(2Φ(z) − 1) + 2φ(z) − 1/√π]` with `z = (x − μ)/σ`.
pub fn crps_gaussian(g: &Gaussian1D, actual: f64) -> f64 {
    let z = (actual - g.mean()) / g.std();
    g.std() * (z * (2.0 * standard_normal_cdf(z) - 1.0) + 2.0 * standard_normal_pdf(z) - 1.0 / PI.sqrt())
}

/// Integration bracket for a normal forecast: 12σ beyond whichever of the
/// mean and the observation is further out on each side.
pub fn gaussian_bracket(g: &Gaussian1D, actual: f64) -> (f64, f64) {
    let pad = CRPS_BRACKET_SIGMAS * g.std();
    (actual.min(g.mean()) - pad, actual.max(g.mean()) + pad)
}

/// `∫ [F(x) − H(x − actual)]² dx` over `[lo, hi]` by adaptive Simpson.
pub fn crps_numeric(
    cdf: impl Fn(f64) -> f64,
    actual: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    crps_numeric_with_breaks(cdf, actual, lo, hi, tol, &[])
}

/// As [`crps_numeric`], additionally splitting the integral at `breaks`
/// (kinks or jumps of `F`).
pub fn crps_numeric_with_breaks(
    cdf: impl Fn(f64) -> f64,
    actual: f64,
    lo: f64,
    hi: f64,
    tol: f64,
    breaks: &[f64],
) -> Result<f64> {
    if !(lo < actual && actual < hi) {
        return Err(Error::InvalidParameter(format!(
            "bracket [{lo}, {hi}] must strictly contain the observation {actual}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let (f_lo, f_hi) = (cdf(lo), cdf(hi));
    if f_lo > MAX_TAIL_MASS || 1.0 - f_hi > MAX_TAIL_MASS {
        return Err(Error::Bracket(format!(
            "F(lo) = {f_lo:.3e}, 1 − F(hi) = {:.3e}",
            1.0 - f_hi
        )));
    }
    let mut points = vec![lo, actual, hi];
    points.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    points.sort_by(f64::total_cmp);
    points.dedup();

    let integrand = |x: f64| {
        let d = cdf(x) - heaviside(x - actual);
        d * d
    };
    let pieces = (points.len() - 1) as f64;
    let total = points
        .windows(2)
        .map(|w| adaptive_simpson(&integrand, w[0], w[1], tol / pieces))
        .sum();
    Ok(total)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 0)
}

/// Subdivisions are forced down to this depth so that features narrower than
/// the initial panel are sampled.
const MIN_DEPTH: u32 = 6;
const MAX_DEPTH: u32 = 48;

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || (depth >= MIN_DEPTH && delta.abs() <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

/// Piecewise-linear CDF through a set of quantile predictions. The tails are
/// extended linearly with the slope of the outermost segment until the CDF
/// reaches 0 and 1; a single quantile gives a step at its value.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileCdf {
    /// `(value, probability)` knots, both nondecreasing.
    knots: Vec<(f64, f64)>,
}

impl QuantileCdf {
    pub fn new(set: &QuantileSet) -> Result<Self> {
        let n = set.levels.len();
        if n == 0 || n != set.values.len() {
            return Err(Error::InvalidParameter(
                "quantile set must be non-empty with one value per level".into(),
            ));
        }
        if set.values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter(
                "quantile values must be nondecreasing".into(),
            ));
        }
        let pts: Vec<(f64, f64)> = set.values.iter().copied().zip(set.levels.iter().copied()).collect();
        let mut knots = Vec::with_capacity(n + 2);
        if n == 1 {
            let v = pts[0].0;
            knots.push((v, 0.0));
            knots.push((v, 1.0));
            return Ok(Self { knots });
        }
        let (x0, p0) = pts[0];
        let (x1, p1) = pts[1];
        knots.push((x0 - p0 * (x1 - x0) / (p1 - p0), 0.0));
        knots.extend_from_slice(&pts);
        let (xa, pa) = pts[n - 2];
        let (xb, pb) = pts[n - 1];
        knots.push((xb + (1.0 - pb) * (xb - xa) / (pb - pa), 1.0));
        Ok(Self { knots })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.knots.partition_point(|&(v, _)| v <= x);
        if k == 0 {
            return 0.0;
        }
        if k == self.knots.len() {
            return 1.0;
        }
        let (xa, pa) = self.knots[k - 1];
        let (xb, pb) = self.knots[k];
        pa + (pb - pa) * (x - xa) / (xb - xa)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.knots.iter().map(|k| k.0).collect()
    }
}

/// CRPS of a quantile forecast through its piecewise-linear CDF.
pub fn crps_quantile_set(set: &QuantileSet, actual: f64, tol: f64) -> Result<f64> {
    let cdf = QuantileCdf::new(set)?;
    let (lo, hi) = cdf.support();
    let pad = 1.0 + 1e-3 * (hi - lo);
    crps_numeric_with_breaks(
        |x| cdf.cdf(x),
        actual,
        lo.min(actual) - pad,
        hi.max(actual) + pad,
        tol,
        &cdf.breakpoints(),
    )
}

/// A batch of forecasts aligned with a batch of observations.
#[derive(Debug, Clone, PartialEq)]
pub enum Forecasts {
    Point(Vec<f64>),
    Gaussian(Vec<Gaussian1D>),
    Quantiles(Vec<QuantileSet>),
}

impl Forecasts {
    pub fn len(&self) -> usize {
        match self {
            Forecasts::Point(v) => v.len(),
            Forecasts::Gaussian(v) => v.len(),
            Forecasts::Quantiles(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub method_name: String,
    pub n: usize,
    pub rmse: Option<f64>,
    pub mean_logs: Option<f64>,
    pub mean_crps: Option<f64>,
    /// Mean pinball loss keyed by the quantile level's decimal text.
    pub mean_pinball: BTreeMap<String, f64>,
}

impl ScoreReport {
    pub fn pinball_at(&self, q: f64) -> Option<f64> {
        self.mean_pinball.get(&q.to_string()).copied()
    }
}

/// Scores a forecast batch. Gaussian forecasts use the closed-form CRPS and
/// their own quantiles for the pinball loss (the mean at q = 0.5); quantile
/// forecasts use the numerical CRPS of their piecewise-linear CDF and are
/// scored only at levels they carry; point forecasts act as degenerate
/// distributions.
pub fn score_probabilistic(
    method_name: &str,
    forecasts: &Forecasts,
    actuals: &[f64],
    eval_quantiles: &[f64],
) -> Result<ScoreReport> {
    check_lengths(forecasts.len(), actuals.len())?;
    for &q in eval_quantiles {
        pinball(q, 0.0, 0.0)?;
    }
    let n = actuals.len();
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let mut mean_pinball = BTreeMap::new();
    let (point, mean_logs, mean_crps) = match forecasts {
        Forecasts::Point(p) => {
            for &q in eval_quantiles {
                let l = p
                    .iter()
                    .zip(actuals)
                    .map(|(&f, &a)| pinball(q, f, a))
                    .collect::<Result<Vec<_>>>()?;
                mean_pinball.insert(q.to_string(), mean(l));
            }
            (Some(p.clone()), None, Some(mae(actuals, p)?))
        }
        Forecasts::Gaussian(g) => {
            for &q in eval_quantiles {
                let l = g
                    .iter()
                    .zip(actuals)
                    .map(|(g, &a)| pinball(q, g.quantile(q)?, a))
                    .collect::<Result<Vec<_>>>()?;
                mean_pinball.insert(q.to_string(), mean(l));
            }
            let logs = g.iter().zip(actuals).map(|(g, &a)| log_score_gaussian(g, a)).collect();
            let crps = g.iter().zip(actuals).map(|(g, &a)| crps_gaussian(g, a)).collect();
            (
                Some(g.iter().map(Gaussian1D::mean).collect()),
                Some(mean(logs)),
                Some(mean(crps)),
            )
        }
        Forecasts::Quantiles(sets) => {
            for &q in eval_quantiles {
                let mut l = Vec::with_capacity(n);
                for (s, &a) in sets.iter().zip(actuals) {
                    match s.get(q) {
                        Some(v) => l.push(pinball(q, v, a)?),
                        None => break,
                    }
                }
                if l.len() == n {
                    mean_pinball.insert(q.to_string(), mean(l));
                }
            }
            let crps = sets
                .iter()
                .zip(actuals)
                .map(|(s, &a)| crps_quantile_set(s, a, CRPS_TOL))
                .collect::<Result<Vec<_>>>()?;
            let median: Option<Vec<f64>> = sets.iter().map(|s| s.get(0.5)).collect();
            (median, None, Some(mean(crps)))
        }
    };
    Ok(ScoreReport {
        method_name: method_name.to_string(),
        n,
        rmse: point.map(|p| rmse(actuals, &p)).transpose()?,
        mean_logs,
        mean_crps,
        mean_pinball,
    })
}

/// Writes reports as a fixed-column table:
/// `method,n,rmse,mean_logs,mean_crps,pinball_<q>...`.
pub fn write_score_table<W: Write>(
    reports: &[ScoreReport],
    eval_quantiles: &[f64],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["method", "n", "rmse", "mean_logs", "mean_crps"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(eval_quantiles.iter().map(|q| format!("pinball_{q}")));
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(g17).unwrap_or_default();
    for r in reports {
        let mut row = vec![
            r.method_name.clone(),
            r.n.to_string(),
            opt(r.rmse),
            opt(r.mean_logs),
            opt(r.mean_crps),
        ];
        row.extend(eval_quantiles.iter().map(|&q| opt(r.pinball_at(q))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
