//! Distribution primitives and the Gaussian-copula rank transform.
//!
//! The normal CDF is evaluated through `erfc` (accurate to a few ulps); the
//! quantile starts from Acklam's rational approximation and takes one Halley
//! step against that CDF, which brings it to ~1e-15 relative.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Univariate normal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian1D {
    mean: f64,
    std: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) || !std.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian requires finite mean and std > 0 (mean {mean}, std {std})"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn standard() -> Self {
        Self {
            mean: 0.0,
            std: 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn variance(&self) -> f64 {
        self.std * self.std
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        standard_normal_pdf(z) / self.std
    }

    pub fn cdf(&self, x: f64) -> f64 {
        standard_normal_cdf((x - self.mean) / self.std)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        Ok(self.mean + self.std * standard_normal_quantile(p)?)
    }
}

pub fn standard_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Inverse of the standard normal CDF on the open interval (0, 1).
pub fn standard_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let x = acklam(p);
    // Halley refinement
    let e = standard_normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Empirical CDF using the `(r − 0.5)/n` plotting position with average ranks
/// for ties. Evaluations always land strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(data: &[f64]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData("empirical CDF of empty data".into()));
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidParameter("NaN in empirical CDF data".into()));
        }
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// Plotting-position probability of `x`. Values between data points take
    /// the midpoint rank of their neighbours; values outside the data range are
    /// clamped to the extreme positions `0.5/n` and `1 − 0.5/n`.
    pub fn rank(&self, x: f64) -> f64 {
        let n = self.sorted.len() as f64;
        let below = self.sorted.partition_point(|&v| v < x);
        let upto = self.sorted.partition_point(|&v| v <= x);
        let ties = upto - below;
        let r = if ties > 0 {
            below as f64 + (ties as f64 + 1.0) / 2.0
        } else {
            below as f64 + 0.5
        };
        ((r - 0.5) / n).clamp(0.5 / n, 1.0 - 0.5 / n)
    }
}

pub fn empirical_cdf_rank(data: &[f64], x: f64) -> Result<f64> {
    Ok(EmpiricalCdf::new(data)?.rank(x))
}

/// Average ranks (1-based) of `data`, ties sharing the mean of their positions.
pub fn average_ranks(data: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[a].total_cmp(&data[b]));
    let mut ranks = vec![0.0; data.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && data[order[j + 1]] == data[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Gaussian-copula marginal transform: each value is mapped through its
/// plotting-position rank to a standard normal score.
pub fn copula_normal_scores(data: &[f64]) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyData("normal scores of empty data".into()));
    }
    if data.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("NaN in normal-score data".into()));
    }
    let n = data.len() as f64;
    average_ranks(data)
        .into_iter()
        .map(|r| standard_normal_quantile((r - 0.5) / n))
        .collect()
}

/// Correlation parameter of a bivariate Gaussian copula, estimated as the
/// Pearson correlation of the normal scores.
pub fn copula_dependence(x_scores: &[f64], y_scores: &[f64]) -> Result<f64> {
    pearson(x_scores, y_scores)?.ok_or_else(|| Error::ZeroVariance("copula scores".into()))
}

/// Pearson correlation. `Ok(None)` when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            rows: x.len(),
            cols: 2,
        });
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

/// Empirical quantile by linear interpolation between order statistics
/// (Hyndman–Fan type 7).
pub fn quantile_type7(data: &[f64], q: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData("quantile of empty data".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("quantile level {q} outside [0, 1]")));
    }
    let mut s = data.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(s[lo] + (h - lo as f64) * (s[hi] - s[lo]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal() -> Gaussian1D {
        Gaussian1D::standard()
    }

    #[test]
    fn rejects_nonpositive_std() {
        assert!(Gaussian1D::new(0.0, 0.0).is_err());
        assert!(Gaussian1D::new(0.0, -1.0).is_err());
        assert!(Gaussian1D::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn pdf_examples() {
        assert!((std_normal().pdf(0.0) - 0.398_942_280_4).abs() < 1e-10);
        assert!((std_normal().pdf(1.645) - 0.1031).abs() < 1e-4);
        let g = Gaussian1D::new(5.0, 2.0).unwrap();
        assert!((g.pdf(5.0) - 0.199_471_140_2).abs() < 1e-10);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(std_normal().cdf(0.0), 0.5);
        assert!((std_normal().cdf(1.645) - 0.95).abs() < 5e-4);
        assert!((std_normal().cdf(-1.645) - 0.05).abs() < 5e-4);
        // scipy.stats.norm.cdf(1.645)
        assert!((std_normal().cdf(1.645) - 0.950_015_094_460_878_6).abs() < 1e-12);
    }

    #[test]
    fn quantile_examples() {
        assert!((std_normal().quantile(0.95).unwrap() - 1.645).abs() < 1e-3);
        assert_eq!(std_normal().quantile(0.5).unwrap(), 0.0);
        let g = Gaussian1D::new(10.0, 3.0).unwrap();
        assert!((g.quantile(0.95).unwrap() - 14.935).abs() < 3e-3);
        // scipy.stats.norm.ppf(0.95)
        assert!((std_normal().quantile(0.95).unwrap() - 1.644_853_626_951_472_2).abs() < 1e-12);
    }

    #[test]
    fn quantile_domain_errors() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(standard_normal_quantile(p), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn cdf_of_quantile_is_identity() {
        let mut p = 1e-6;
        while p < 1.0 - 1e-6 {
            let x = standard_normal_quantile(p).unwrap();
            assert!((standard_normal_cdf(x) - p).abs() < 1e-9, "p = {p}");
            p += 0.000_731;
        }
        for p in [1e-6, 1.0 - 1e-6, 0.024, 0.026, 0.975, 0.976] {
            let x = standard_normal_quantile(p).unwrap();
            assert!((standard_normal_cdf(x) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        // composite Simpson over ±8σ
        let g = Gaussian1D::new(3.0, 0.7).unwrap();
        let (a, b) = (3.0 - 8.0 * 0.7, 3.0 + 8.0 * 0.7);
        let n = 2000;
        let h = (b - a) / n as f64;
        let mut s = g.pdf(a) + g.pdf(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * g.pdf(a + i as f64 * h);
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empirical_rank_examples() {
        let d = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(empirical_cdf_rank(&d, 3.0).unwrap(), 0.5);
        assert!((empirical_cdf_rank(&d, 5.0).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(empirical_cdf_rank(&[7.0], 7.0).unwrap(), 0.5);
        assert!(matches!(
            empirical_cdf_rank(&[], 1.0),
            Err(Error::EmptyData(_))
        ));
    }

    #[test]
    fn empirical_rank_never_hits_bounds() {
        let d = [1.0, 2.0, 3.0];
        for x in [-100.0, 0.5, 1.0, 2.5, 3.0, 1e9] {
            let r = empirical_cdf_rank(&d, x).unwrap();
            assert!(r > 0.0 && r < 1.0);
        }
    }

    #[test]
    fn ties_get_average_rank() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let d = [1.0, 2.0, 2.0, 4.0];
        // rank 2.5 → (2.5 − 0.5)/4
        assert_eq!(empirical_cdf_rank(&d, 2.0).unwrap(), 0.5);
    }

    #[test]
    fn normal_scores_of_median_is_zero() {
        let scores = copula_normal_scores(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!(scores[2].abs() < 1e-9);
        assert!(scores[1] < scores[3] && scores[3] < scores[2] && scores[2] < scores[4]);
    }

    #[test]
    fn copula_dependence_extremes_and_errors() {
        let x = [0.3, -1.2, 0.8, 2.0, -0.1];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((copula_dependence(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((copula_dependence(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(copula_dependence(&x[..2], &x[..3]).is_err());
        assert!(copula_dependence(&x[..1], &x[..1]).is_err());
        assert!(matches!(
            copula_dependence(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn type7_quantiles() {
        let d: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile_type7(&d, 0.9).unwrap() - 90.1).abs() < 1e-9);
        assert_eq!(quantile_type7(&[1.0, 2.0, 3.0, 4.0, 100.0], 0.5).unwrap(), 3.0);
    }
}
