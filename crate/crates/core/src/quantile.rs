//! Linear quantile regression by pinball-loss minimization.
//!
//! Each quantile is fitted independently by iteratively reweighted least
//! squares on a smoothed pinball loss: with residual `r`, the row weight is
//! `c(r) / max(|r|, ε)` where `c` is `q` above the fit and `1 − q` below it.
//! Linear quantile fits sit on vertices that interpolate `m` rows exactly.
//! Once the loss change slows, the vertex through the iterate's `m` smallest
//! residuals is refined by exact edge descent until the subgradient
//! optimality conditions certify it as the minimizer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{with_intercept, DesignMatrix};
use crate::error::{Error, Result};
use crate::linalg::{dot, lu_solve, Matrix};
use crate::metrics::pinball;
use crate::point::{equilibrate, fit_ols, solve_equilibrated};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual magnitude below which the kink of the loss is smoothed.
    pub smoothing: f64,
    /// Relative change in mean loss that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            smoothing: 1e-6,
            tolerance: 1e-8,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub q: f64,
    pub weights: Vec<f64>,
    /// Mean pinball loss of `weights` over the training rows.
    pub loss: f64,
    pub iterations: usize,
}

/// Mean pinball loss of `weights` on the design.
pub fn mean_pinball_loss(dm: &DesignMatrix, q: f64, weights: &[f64]) -> f64 {
    mean_loss(dm.features(), dm.targets(), q, weights)
}

fn mean_loss(phi: &Matrix, y: &[f64], q: f64, w: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let total: f64 = (0..phi.rows())
        .map(|i| pinball_unchecked(q, dot(phi.row(i), w), y[i]))
        .sum();
    total / y.len() as f64
}

fn pinball_unchecked(q: f64, predicted: f64, actual: f64) -> f64 {
    let d = actual - predicted;
    if d >= 0.0 {
        q * d
    } else {
        (q - 1.0) * d
    }
}

fn check_level(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("quantile level {q} outside (0, 1)")))
    }
}

/// Fits the weights of the conditional `q`-quantile.
pub fn fit_quantile(dm: &DesignMatrix, q: f64, opts: &SolverOptions) -> Result<QuantileFit> {
    check_level(q)?;
    dm.require_overdetermined()?;
    let phi = dm.features();
    let y = dm.targets();
    let n = y.len();

    let mut w = fit_ols(dm)?.weights;
    let mut loss = mean_loss(phi, y, q, &w);
    let mut best = (loss, w.clone());
    let mut history = vec![loss];
    let y_scale = y.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let abs_floor = 1e-14 * (1.0 + y_scale);

    let mut converged = false;
    let mut descent_tried = false;
    let mut certified = None;
    let mut iterations = 0;
    let mut row_w = vec![0.0; n];
    while iterations < opts.max_iterations {
        iterations += 1;
        for i in 0..n {
            let r = y[i] - dot(phi.row(i), &w);
            let c = if r >= 0.0 { q } else { 1.0 - q };
            row_w[i] = c / r.abs().max(opts.smoothing);
        }
        let gram = phi.gram(Some(&row_w));
        let rhs = phi.transpose_mul_vec(y, Some(&row_w));
        let (scaled, scale) = equilibrate(&gram);
        let Ok(next) = solve_equilibrated(&scaled, &scale, &rhs) else {
            // weights collapsed onto fewer than m rows; keep the best iterate
            converged = true;
            break;
        };
        let next_loss = mean_loss(phi, y, q, &next);
        history.push(next_loss);
        if next_loss < best.0 {
            best = (next_loss, next.clone());
        }
        let change = (loss - next_loss).abs();
        w = next;
        loss = next_loss;
        if change <= opts.tolerance * loss.max(0.0) + abs_floor {
            converged = true;
            break;
        }
        if !descent_tried && change <= HANDOFF * loss {
            descent_tried = true;
            if let Some(vertex) = vertex_descent(phi, y, q, &best.1) {
                certified = Some(vertex);
                break;
            }
        }
    }
    if certified.is_none() && converged && !descent_tried {
        certified = vertex_descent(phi, y, q, &best.1);
    }
    if let Some(vertex) = certified {
        let vertex_loss = mean_loss(phi, y, q, &vertex);
        history.push(vertex_loss);
        if vertex_loss <= best.0 {
            best = (vertex_loss, vertex);
        }
        converged = true;
    }
    if !converged {
        return Err(Error::NonConvergence {
            q,
            iterations,
            last_loss: loss,
            last_weights: w,
            loss_history: history,
        });
    }

    let (mut best_loss, mut best_w) = best;
    if let Some(vertex) = vertex_polish(phi, y, &best_w) {
        let vertex_loss = mean_loss(phi, y, q, &vertex);
        if vertex_loss <= best_loss {
            best_loss = vertex_loss;
            best_w = vertex;
        }
    }
    Ok(QuantileFit {
        q,
        weights: best_w,
        loss: best_loss,
        iterations,
    })
}

/// Relative loss change below which IRLS hands over to vertex descent.
const HANDOFF: f64 = 1e-4;
const MAX_PIVOTS: usize = 10_000;

/// Rows of the `m` smallest absolute residuals at `w`.
fn nearest_basis(phi: &Matrix, y: &[f64], w: &[f64]) -> Vec<usize> {
    let resid: Vec<f64> = (0..y.len()).map(|i| (y[i] - dot(phi.row(i), w)).abs()).collect();
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.select_nth_unstable_by(phi.cols() - 1, |&a, &b| resid[a].total_cmp(&resid[b]));
    idx.truncate(phi.cols());
    idx.sort_unstable();
    idx
}

/// Exact interpolation of the basis rows, with the basis submatrix.
fn interpolate(phi: &Matrix, y: &[f64], basis: &[usize]) -> Option<(Matrix, Vec<f64>)> {
    let rows: Vec<Vec<f64>> = basis.iter().map(|&i| phi.row(i).to_vec()).collect();
    let sub = Matrix::from_rows(&rows).ok()?;
    let ys: Vec<f64> = basis.iter().map(|&i| y[i]).collect();
    let w = lu_solve(&sub, &ys)?;
    Some((sub, w))
}

/// Exact fit through the `m` rows with the smallest absolute residuals.
fn vertex_polish(phi: &Matrix, y: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    interpolate(phi, y, &nearest_basis(phi, y, w)).map(|(_, v)| v)
}

/// Exact minimizer reached from the vertex nearest `w` by edge descent.
///
/// At basis `h` with `g = Σ_{i∉h} (q − 1[rᵢ < 0]) xᵢ`, the vertex is optimal
/// iff `ξ = X_h⁻ᵀ g` lies in `[−q, 1 − q]` componentwise. Otherwise a
/// violating component names a basis row to release, and the loss along that
/// edge is convex piecewise linear with its minimum where a new row enters.
/// `None` when a basis turns singular or the pivot budget runs out.
fn vertex_descent(phi: &Matrix, y: &[f64], q: f64, w: &[f64]) -> Option<Vec<f64>> {
    let m = phi.cols();
    let n = y.len();
    let slack = 1e-9 * n as f64;
    let mut basis = nearest_basis(phi, y, w);
    let mut in_basis = vec![false; n];
    for &i in &basis {
        in_basis[i] = true;
    }
    for _ in 0..MAX_PIVOTS {
        let (sub, vertex) = interpolate(phi, y, &basis)?;
        let resid: Vec<f64> = (0..n).map(|i| y[i] - dot(phi.row(i), &vertex)).collect();
        let mut g = vec![0.0; m];
        for i in (0..n).filter(|&i| !in_basis[i]) {
            let psi = if resid[i] < 0.0 { q - 1.0 } else { q };
            for (gj, xj) in g.iter_mut().zip(phi.row(i)) {
                *gj += psi * xj;
            }
        }
        let xi = lu_solve(&sub.transpose(), &g)?;
        // steepest edge: slope (1 − q) − ξⱼ releasing upward, q + ξⱼ downward
        let (leave, sign, mut slope) = xi
            .iter()
            .enumerate()
            .flat_map(|(j, &v)| [(j, 1.0, 1.0 - q - v), (j, -1.0, q + v)])
            .min_by(|a, b| a.2.total_cmp(&b.2))?;
        if slope >= -slack {
            return Some(vertex);
        }
        let mut unit = vec![0.0; m];
        unit[leave] = sign;
        let dir = lu_solve(&sub, &unit)?;
        let mut breaks: Vec<(f64, f64, usize)> = (0..n)
            .filter(|&i| !in_basis[i])
            .filter_map(|i| {
                let a = dot(phi.row(i), &dir);
                let t = resid[i] / a;
                let crosses = a != 0.0 && (t > 0.0 || (resid[i] == 0.0 && a > 0.0));
                crosses.then_some((t.max(0.0), a.abs(), i))
            })
            .collect();
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut enter = None;
        for (_, weight, i) in breaks {
            slope += weight;
            if slope >= 0.0 {
                enter = Some(i);
                break;
            }
        }
        let enter = enter?;
        in_basis[basis[leave]] = false;
        in_basis[enter] = true;
        basis[leave] = enter;
    }
    None
}

/// Per-quantile linear models.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileModel {
    quantiles: Vec<f64>,
    weights: Vec<Vec<f64>>,
    feature_names: Vec<String>,
    intercept: bool,
}

impl QuantileModel {
    /// `quantiles` must be strictly increasing inside (0, 1), one weight
    /// vector per level.
    pub fn new(
        quantiles: Vec<f64>,
        weights: Vec<Vec<f64>>,
        feature_names: Vec<String>,
        intercept: bool,
    ) -> Result<Self> {
        validate_levels(&quantiles)?;
        if weights.len() != quantiles.len() {
            return Err(Error::LengthMismatch {
                left: weights.len(),
                right: quantiles.len(),
            });
        }
        for (row, w) in weights.iter().enumerate() {
            if w.len() != feature_names.len() {
                return Err(Error::DimensionMismatch {
                    row,
                    expected: feature_names.len(),
                    got: w.len(),
                });
            }
        }
        Ok(Self {
            quantiles,
            weights,
            feature_names,
            intercept,
        })
    }

    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }

    pub fn weights(&self, q: f64) -> Option<&[f64]> {
        self.quantiles
            .iter()
            .position(|&x| x == q)
            .map(|i| self.weights[i].as_slice())
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn intercept(&self) -> bool {
        self.intercept
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len() - usize::from(self.intercept)
    }

    /// Per-level predictions at raw features `x`, sorted so they are
    /// nondecreasing in the level.
    pub fn predict(&self, x: &[f64]) -> Result<QuantileSet> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                row: 0,
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let phi = with_intercept(x, self.intercept);
        let mut values: Vec<f64> = self.weights.iter().map(|w| dot(w, &phi)).collect();
        values.sort_by(f64::total_cmp);
        Ok(QuantileSet {
            levels: self.quantiles.clone(),
            values,
        })
    }

    /// Central prediction intervals present in the model, as
    /// `(label, lower level, upper level)`, e.g. `("70th", 0.15, 0.85)`.
    pub fn bands(&self) -> Vec<(String, f64, f64)> {
        let mut out = Vec::new();
        for &lo in self.quantiles.iter().filter(|&&q| q < 0.5) {
            let hi = 1.0 - lo;
            if let Some(&hi) = self.quantiles.iter().find(|&&q| (q - hi).abs() < 1e-12) {
                out.push((band_label(lo), lo, hi));
            }
        }
        out
    }
}

/// Label of the central interval `[lo, 1 − lo]`, e.g. 0.025 → "95th".
pub fn band_label(lo: f64) -> String {
    format!("{}th", ((1.0 - 2.0 * lo) * 100.0).round())
}

/// Central interval levels for a coverage given in percent (70 → 0.15, 0.85).
pub fn central_band(coverage_percent: f64) -> Result<(f64, f64)> {
    if !(coverage_percent > 0.0 && coverage_percent < 100.0) {
        return Err(Error::Domain(format!(
            "band coverage {coverage_percent}% outside (0, 100)"
        )));
    }
    let tail = (100.0 - coverage_percent) / 200.0;
    Ok((tail, 1.0 - tail))
}

/// Quantile levels and their predicted values, both ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSet {
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
}

impl QuantileSet {
    pub fn get(&self, q: f64) -> Option<f64> {
        self.levels
            .iter()
            .position(|&l| (l - q).abs() < 1e-12)
            .map(|i| self.values[i])
    }
}

fn validate_levels(quantiles: &[f64]) -> Result<()> {
    if quantiles.is_empty() {
        return Err(Error::InvalidParameter("quantile list is empty".into()));
    }
    for &q in quantiles {
        check_level(q)?;
    }
    if quantiles.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "quantile levels must be strictly increasing: {quantiles:?}"
        )));
    }
    Ok(())
}

/// Independent fits for every level, run on scoped threads.
pub fn fit_quantile_set(
    dm: &DesignMatrix,
    quantiles: &[f64],
    opts: &SolverOptions,
) -> Result<QuantileModel> {
    validate_levels(quantiles)?;
    let fits: Vec<Result<QuantileFit>> = std::thread::scope(|s| {
        let handles: Vec<_> = quantiles
            .iter()
            .map(|&q| s.spawn(move || fit_quantile(dm, q, opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("quantile fit thread panicked"))
            .collect()
    });
    let weights = fits
        .into_iter()
        .map(|f| f.map(|f| f.weights))
        .collect::<Result<Vec<_>>>()?;
    QuantileModel::new(
        quantiles.to_vec(),
        weights,
        dm.feature_names().to_vec(),
        dm.intercept(),
    )
}

pub fn predict_quantiles(model: &QuantileModel, x: &[f64]) -> Result<QuantileSet> {
    model.predict(x)
}

#[derive(Serialize, Deserialize)]
struct QuantileModelJson {
    feature_names: Vec<String>,
    quantiles: Vec<f64>,
    weights: BTreeMap<String, Vec<f64>>,
}

impl Serialize for QuantileModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        QuantileModelJson {
            feature_names: self.feature_names.clone(),
            quantiles: self.quantiles.clone(),
            weights: self
                .quantiles
                .iter()
                .zip(&self.weights)
                .map(|(q, w)| (q.to_string(), w.clone()))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuantileModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = QuantileModelJson::deserialize(d)?;
        let mut by_level: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for (k, w) in raw.weights {
            let q: f64 = k
                .parse()
                .map_err(|_| D::Error::custom(format!("bad quantile key `{k}`")))?;
            by_level.insert(q.to_bits(), w);
        }
        let weights = raw
            .quantiles
            .iter()
            .map(|q| {
                by_level
                    .remove(&q.to_bits())
                    .ok_or_else(|| D::Error::custom(format!("no weights for quantile {q}")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let intercept = raw
            .feature_names
            .first()
            .is_some_and(|n| n == crate::data::INTERCEPT_NAME);
        QuantileModel::new(raw.quantiles, weights, raw.feature_names, intercept)
            .map_err(D::Error::custom)
    }
}

/// Mean pinball loss of a set of quantile predictions against actuals, per level.
pub fn mean_pinball_by_level(sets: &[QuantileSet], actuals: &[f64]) -> Result<Vec<(f64, f64)>> {
    if sets.len() != actuals.len() {
        return Err(Error::LengthMismatch {
            left: sets.len(),
            right: actuals.len(),
        });
    }
    let Some(first) = sets.first() else {
        return Ok(Vec::new());
    };
    first
        .levels
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let mut total = 0.0;
            for (s, &a) in sets.iter().zip(actuals) {
                total += pinball(q, s.values[k], a)?;
            }
            Ok((q, total / actuals.len() as f64))
        })
        .collect()
}
