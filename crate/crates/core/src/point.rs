//! Multiple linear regression point forecaster fitted by least squares.

use serde::{Deserialize, Serialize};

use crate::data::{with_intercept, DesignMatrix};
use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen, Cholesky, Matrix};

/// Gram matrices whose equilibrated condition number exceeds this are refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: bool,
}

impl LinearModel {
    /// Number of raw features expected by [`predict`](Self::predict).
    pub fn n_features(&self) -> usize {
        self.weights.len() - usize::from(self.intercept)
    }

    /// `xᵀω` with the intercept slot set to 1.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                row: 0,
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(dot(&self.weights, &with_intercept(x, self.intercept)))
    }

    pub fn residuals(&self, dm: &DesignMatrix) -> Vec<f64> {
        dm.features()
            .matvec(&self.weights)
            .iter()
            .zip(dm.targets())
            .map(|(p, y)| y - p)
            .collect()
    }
}

pub fn predict_point(model: &LinearModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Solves the normal equations `(ΦᵀΦ) ω = Φᵀy` after scaling columns to unit
/// norm. Refuses rank-deficient designs, naming the columns involved in the
/// near-null direction.
pub fn fit_ols(dm: &DesignMatrix) -> Result<LinearModel> {
    dm.require_overdetermined()?;
    let weights = solve_least_squares(dm.features(), dm.targets(), None, dm.feature_names())?;
    Ok(LinearModel {
        feature_names: dm.feature_names().to_vec(),
        weights,
        intercept: dm.intercept(),
    })
}

/// Weighted least squares `argmin Σ wᵢ (yᵢ − φᵢᵀω)²` via an equilibrated
/// Cholesky solve with a condition-number guard.
pub(crate) fn solve_least_squares(
    phi: &Matrix,
    y: &[f64],
    weights: Option<&[f64]>,
    names: &[String],
) -> Result<Vec<f64>> {
    let gram = phi.gram(weights);
    let rhs = phi.transpose_mul_vec(y, weights);
    let m = gram.rows();

    let zero_cols: Vec<String> = (0..m)
        .filter(|&j| !(gram[(j, j)] > 0.0))
        .map(|j| names[j].clone())
        .collect();
    if !zero_cols.is_empty() {
        return Err(Error::SingularFit {
            columns: zero_cols,
            condition: f64::INFINITY,
        });
    }
    let (scaled, scale) = equilibrate(&gram);
    let (values, vectors) = symmetric_eigen(&scaled);
    let lo = values[0];
    let hi = values[m - 1];
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        let null = vectors.column(0);
        let columns = null
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > 0.1)
            .map(|(j, _)| names[j].clone())
            .collect();
        return Err(Error::SingularFit { columns, condition });
    }
    solve_equilibrated(&scaled, &scale, &rhs)
}

/// `D·G·D` with `D = diag(1/√gᵢᵢ)`, returned with the diagonal of `D`.
pub(crate) fn equilibrate(gram: &Matrix) -> (Matrix, Vec<f64>) {
    let m = gram.rows();
    let scale: Vec<f64> = gram.diag().iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut scaled = gram.clone();
    for i in 0..m {
        for j in 0..m {
            scaled[(i, j)] *= scale[i] * scale[j];
        }
    }
    (scaled, scale)
}

/// Solves `G ω = b` given the equilibrated `D·G·D` and `D`.
pub(crate) fn solve_equilibrated(scaled: &Matrix, scale: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let scaled_rhs: Vec<f64> = rhs.iter().zip(scale).map(|(r, s)| r * s).collect();
    let z = Cholesky::new(scaled)?.solve(&scaled_rhs);
    Ok(z.iter().zip(scale).map(|(z, s)| z * s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(xs: &[Vec<f64>], ys: &[f64], intercept: bool) -> DesignMatrix {
        let names: Vec<String> = (0..xs[0].len()).map(|i| format!("x{i}")).collect();
        DesignMatrix::from_raw(xs, ys.to_vec(), &names, intercept).unwrap()
    }

    #[test]
    fn recovers_exact_line() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x[0] + 2.0).collect();
        let m = fit_ols(&design(&xs, &ys, true)).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-9);
        assert!((m.weights[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn constant_targets() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64 % 5.0]).collect();
        let ys = vec![7.5; 8];
        let m = fit_ols(&design(&xs, &ys, true)).unwrap();
        assert!((m.weights[0] - 7.5).abs() < 1e-9);
        assert!(m.weights[1].abs() < 1e-9 && m.weights[2].abs() < 1e-9);
    }

    #[test]
    fn predict_examples() {
        let m = LinearModel {
            feature_names: vec!["intercept".into(), "x".into()],
            weights: vec![2.0, 3.0],
            intercept: true,
        };
        assert_eq!(m.predict(&[4.0]).unwrap(), 14.0);
        assert!(matches!(m.predict(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        let z = LinearModel {
            weights: vec![0.0, 0.0],
            ..m
        };
        assert_eq!(z.predict(&[123.0]).unwrap(), 0.0);
    }

    #[test]
    fn duplicate_column_is_singular() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let ys: Vec<f64> = (0..10).map(|i| i as f64).collect();
        match fit_ols(&design(&xs, &ys, true)) {
            Err(Error::SingularFit { columns, condition }) => {
                assert!(condition > MAX_CONDITION);
                assert!(columns.contains(&"x0".to_string()));
                assert!(columns.contains(&"x1".to_string()));
            }
            other => panic!("expected singular fit, got {other:?}"),
        }
    }

    #[test]
    fn residual_mean_zero_with_intercept() {
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64).sin() * 10.0, i as f64]).collect();
        let ys: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64).collect();
        let dm = design(&xs, &ys, true);
        let m = fit_ols(&dm).unwrap();
        let r = m.residuals(&dm);
        assert!(r.iter().sum::<f64>().abs() / 30.0 < 1e-9);
    }

    #[test]
    fn underdetermined_refused() {
        let dm = design(&[vec![1.0, 2.0]], &[3.0], true);
        assert!(matches!(fit_ols(&dm), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn json_field_order() {
        let m = LinearModel {
            feature_names: vec!["intercept".into(), "temp_60cm".into()],
            weights: vec![1.0, 2.0],
            intercept: true,
        };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"feature_names":["intercept","temp_60cm"],"weights":[1.0,2.0],"intercept":true}"#
        );
    }
}
