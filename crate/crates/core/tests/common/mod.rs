//! Independent oracles and data generators shared by the integration tests.
//! Nothing here calls into the library's numerics.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian elimination with partial pivoting on a dense copy of `a`.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (top, bottom) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (offset, row) in bottom.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            for (r, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *r -= f * p;
            }
            b[col + 1 + offset] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Least squares by explicitly forming `ΦᵀΦ` and `Φᵀy` and eliminating.
pub fn ols_oracle(phi: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let m = phi[0].len();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (row, &t) in phi.iter().zip(y) {
        for i in 0..m {
            b[i] += row[i] * t;
            for j in 0..m {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    gauss_solve(a, b)
}

/// Order-statistic quantile with linear interpolation (type 7).
pub fn type7(data: &[f64], q: f64) -> f64 {
    let mut s = data.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Mean pinball loss under the standard convention.
pub fn pinball_oracle(q: f64, pred: f64, ys: &[f64]) -> f64 {
    ys.iter()
        .map(|&y| if y >= pred { q * (y - pred) } else { (1.0 - q) * (pred - y) })
        .sum::<f64>()
        / ys.len() as f64
}

/// Trapezoid CRPS of a normal forecast on a fine uniform grid, split at the
/// observation.
pub fn crps_trapezoid(mu: f64, sigma: f64, x: f64) -> f64 {
    let cdf = |t: f64| 0.5 * libm::erfc(-(t - mu) / (sigma * std::f64::consts::SQRT_2));
    let lo = mu.min(x) - 12.0 * sigma;
    let hi = mu.max(x) + 12.0 * sigma;
    let piece = |a: f64, b: f64, above: bool| {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let f = |t: f64| {
            let d = cdf(t) - if above { 1.0 } else { 0.0 };
            d * d
        };
        let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
        h * (0.5 * f(a) + inner + 0.5 * f(b))
    };
    piece(lo, x, false) + piece(x, hi, true)
}

/// Rows `[x₁, …, x_k]` with standard-normal-ish features scaled by `spread`,
/// and targets `w₀ + Σ wᵢxᵢ + noise·ε`.
pub struct Linear {
    pub rows: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

pub fn linear_gaussian(n: usize, weights: &[f64], spread: f64, noise: f64, seed: u64) -> Linear {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = weights.len() - 1;
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..k)
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (j as f64 + 1.0) * 3.0 + spread * z
            })
            .collect();
        let e: f64 = StandardNormal.sample(&mut rng);
        let t = weights[0] + x.iter().zip(&weights[1..]).map(|(a, b)| a * b).sum::<f64>() + noise * e;
        rows.push(x);
        y.push(t);
    }
    Linear { rows, y }
}

pub fn uniform_vec(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn normal_vec(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            mean + sd * z
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
