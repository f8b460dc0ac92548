//! Internal supervised-learning primitives: ridge linear regression, CART
//! trees, random forests, and Newton-boosted trees with pluggable
//! objectives. These back the stacking meta-models, the superbooster, the
//! FFORMA weight model, and the meta-learning classifiers.

mod boost;
mod forest;
mod tree;

pub use boost::{
    fit_gbt, GbtModel, GbtParams, Logistic, Objective, SoftmaxWeightedError, SquaredError,
};
pub use forest::{fit_rf, Mtry, RandomForest, RfParams};
pub use tree::{fit_tree, DecisionTree, TreeTask};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A supervised-learning dataset: row-major features plus a target vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub feature_names: Vec<String>,
    /// `rows[i][j]` = value of feature `j` in sample `i`.
    pub rows: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl DesignMatrix {
    /// Validates shape and finiteness.
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, target: Vec<f64>) -> Result<DesignMatrix> {
        if rows.len() != target.len() {
            return Err(Error::InvalidArgument(format!(
                "design matrix has {} rows but {} targets",
                rows.len(),
                target.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} values, expected {}",
                    row.len(),
                    feature_names.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite feature in row {i}")));
            }
        }
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite target in row {i}")));
        }
        Ok(DesignMatrix { feature_names, rows, target })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

/// A fitted linear model (ridge-regularized least squares).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(c, x)| c * x).sum::<f64>()
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}

/// Ridge penalty keeping collinear designs solvable without visibly biasing
/// well-posed fits.
pub const RIDGE_LAMBDA: f64 = 1e-6;

/// Solves `A x = b` by Gaussian elimination with partial pivoting; also
/// returns the smallest-to-largest pivot ratio as a conditioning signal.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<(Vec<f64>, f64)> {
    let n = b.len();
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot = 0.0f64;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        let mag = a[pivot][col].abs();
        if mag < 1e-300 {
            return None;
        }
        min_pivot = min_pivot.min(mag);
        max_pivot = max_pivot.max(mag);
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some((x, min_pivot / max_pivot))
}

/// Least-squares fit with an unpenalized intercept and ridge λ = 1e−6 on the
/// slopes, so duplicate or collinear columns stay solvable.
#[allow(clippy::needless_range_loop)]
pub fn fit_linreg(x: &DesignMatrix) -> Result<LinearModel> {
    let n = x.n_rows();
    let p = x.n_features();
    if n == 0 {
        return Err(Error::InvalidArgument("empty design matrix".into()));
    }
    let target_constant = x.target.windows(2).all(|w| w[0] == w[1]);
    if p == 0 {
        if target_constant {
            return Err(Error::DegenerateDesign(
                "no feature columns and a constant target".into(),
            ));
        }
        return Ok(LinearModel {
            intercept: x.target.iter().sum::<f64>() / n as f64,
            coefficients: Vec::new(),
        });
    }
    // normal equations over [1 | X]
    let d = p + 1;
    let mut xtx = vec![vec![0.0; d]; d];
    let mut xty = vec![0.0; d];
    for (row, &y) in x.rows.iter().zip(&x.target) {
        let aug = |j: usize| if j == 0 { 1.0 } else { row[j - 1] };
        for i in 0..d {
            xty[i] += aug(i) * y;
            for j in i..d {
                xtx[i][j] += aug(i) * aug(j);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            xtx[i][j] = xtx[j][i];
        }
    }
    // exact least squares when the design is well-posed; the ridge penalty
    // only steps in for singular or near-singular designs (duplicate or
    // collinear columns), where it keeps coefficients finite
    if let Some((beta, pivot_ratio)) = solve_dense(xtx.clone(), xty.clone()) {
        if pivot_ratio > 1e-10 && beta.iter().all(|v| v.is_finite()) {
            return Ok(LinearModel { intercept: beta[0], coefficients: beta[1..].to_vec() });
        }
    }
    // escalate the penalty until the system solves cleanly
    for lambda in [RIDGE_LAMBDA, 1e-3, 1.0] {
        let mut penalized = xtx.clone();
        for (i, row) in penalized.iter_mut().enumerate().skip(1) {
            row[i] += lambda;
        }
        if let Some((beta, _)) = solve_dense(penalized, xty.clone()) {
            if beta.iter().all(|v| v.is_finite()) {
                return Ok(LinearModel { intercept: beta[0], coefficients: beta[1..].to_vec() });
            }
        }
    }
    Err(Error::DegenerateDesign("singular normal equations".into()))
}
