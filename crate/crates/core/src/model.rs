//! Data containers, prediction and objective evaluation for the pliable lasso.
//!
//! The fitted model is
//!
//! ```text
//! yhat = beta0 * 1 + Z theta0 + X beta + sum_j (X_j o Z) theta_j
//! ```
//!
//! where `X_j o Z` multiplies every column of `Z` elementwise by `X_j`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PliableError, Result};

/// Response, predictors and modifiers, all with `N` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    z: DMatrix<f64>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(PliableError::DimensionMismatch {
                what: "number of observations",
                expected: 1,
                found: 0,
            });
        }
        if x.ncols() == 0 {
            return Err(PliableError::DimensionMismatch {
                what: "number of predictors",
                expected: 1,
                found: 0,
            });
        }
        if x.nrows() != n {
            return Err(PliableError::DimensionMismatch {
                what: "rows of X",
                expected: n,
                found: x.nrows(),
            });
        }
        if z.nrows() != n {
            return Err(PliableError::DimensionMismatch {
                what: "rows of Z",
                expected: n,
                found: z.nrows(),
            });
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(PliableError::NonFinite("response y"));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(PliableError::NonFinite("predictor matrix X"));
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(PliableError::NonFinite("modifier matrix Z"));
        }
        Ok(Self { y, x, z })
    }

    /// Dataset without modifiers (`K = 0`); the model reduces to the lasso.
    pub fn without_modifiers(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(y, x, DMatrix::zeros(n, 0))
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(y, self.x.clone(), self.z.clone())
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            y: self.y.select_rows(rows),
            x: self.x.select_rows(rows),
            z: self.z.select_rows(rows),
        }
    }
}

/// Interaction block `W_j = X_j o Z` (N x K).
pub fn interaction(x: &DMatrix<f64>, z: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    let xj = x.column(j);
    let mut w = z.clone();
    for mut col in w.column_iter_mut() {
        col.component_mul_assign(&xj);
    }
    w
}

/// Row-sparse storage of the `p x K` modifier matrix. Only nonzero rows are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaRows {
    p: usize,
    k: usize,
    rows: BTreeMap<usize, DVector<f64>>,
}

impl ThetaRows {
    pub fn zeros(p: usize, k: usize) -> Self {
        Self {
            p,
            k,
            rows: BTreeMap::new(),
        }
    }

    pub fn from_dense(theta: &DMatrix<f64>) -> Self {
        let mut rows = Self::zeros(theta.nrows(), theta.ncols());
        for j in 0..theta.nrows() {
            rows.set(j, theta.row(j).transpose());
        }
        rows
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.p, self.k);
        for (&j, row) in &self.rows {
            out.row_mut(j).copy_from(&row.transpose());
        }
        out
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, j: usize) -> Option<&DVector<f64>> {
        self.rows.get(&j)
    }

    /// Row `j` as a dense vector (zeros when the row is inactive).
    pub fn row(&self, j: usize) -> DVector<f64> {
        self.rows
            .get(&j)
            .cloned()
            .unwrap_or_else(|| DVector::zeros(self.k))
    }

    /// Store row `j`; an all-zero row removes the entry.
    pub fn set(&mut self, j: usize, row: DVector<f64>) {
        assert!(j < self.p, "theta row {j} out of range");
        assert_eq!(row.len(), self.k, "theta row length");
        if row.iter().all(|&v| v == 0.0) {
            self.rows.remove(&j);
        } else {
            self.rows.insert(j, row);
        }
    }

    pub fn is_row_zero(&self, j: usize) -> bool {
        !self.rows.contains_key(&j)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &DVector<f64>)> {
        self.rows.iter().map(|(&j, r)| (j, r))
    }

    pub fn active_rows(&self) -> Vec<usize> {
        self.rows.keys().copied().collect()
    }

    /// Number of nonzero individual entries.
    pub fn nnz(&self) -> usize {
        self.rows
            .values()
            .map(|r| r.iter().filter(|&&v| v != 0.0).count())
            .sum()
    }
}

/// Parameters of a pliable lasso fit at a single `(lambda, alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PliableFit {
    pub beta0: f64,
    pub theta0: DVector<f64>,
    pub beta: DVector<f64>,
    pub theta: ThetaRows,
    pub lambda: f64,
    pub alpha: f64,
}

impl PliableFit {
    pub fn zeros(p: usize, k: usize, lambda: f64, alpha: f64) -> Self {
        Self {
            beta0: 0.0,
            theta0: DVector::zeros(k),
            beta: DVector::zeros(p),
            theta: ThetaRows::zeros(p, k),
            lambda,
            alpha,
        }
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn k(&self) -> usize {
        self.theta0.len()
    }

    /// True when both `beta_j` and `theta_j` are exactly zero.
    pub fn is_group_zero(&self, j: usize) -> bool {
        self.beta[j] == 0.0 && self.theta.is_row_zero(j)
    }

    pub fn nonzero_beta(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.beta[j] != 0.0).collect()
    }

    pub fn n_nonzero_beta(&self) -> usize {
        self.beta.iter().filter(|&&b| b != 0.0).count()
    }

    /// Nonzero entries among `beta` and `Theta` together.
    pub fn n_nonzero_all(&self) -> usize {
        self.n_nonzero_beta() + self.theta.nnz()
    }

    pub fn active_groups(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| !self.is_group_zero(j)).collect()
    }

    /// Groups with `theta_j != 0` but `beta_j == 0`.
    pub fn hierarchy_violations(&self) -> Vec<usize> {
        self.theta
            .iter()
            .filter(|(j, _)| self.beta[*j] == 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    fn check_dims(&self, x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.p() {
            return Err(PliableError::DimensionMismatch {
                what: "columns of X",
                expected: self.p(),
                found: x.ncols(),
            });
        }
        if z.ncols() != self.k() {
            return Err(PliableError::DimensionMismatch {
                what: "columns of Z",
                expected: self.k(),
                found: z.ncols(),
            });
        }
        if z.nrows() != x.nrows() {
            return Err(PliableError::DimensionMismatch {
                what: "rows of Z",
                expected: x.nrows(),
                found: z.nrows(),
            });
        }
        Ok(())
    }
}

/// Model predictions for new `X`, `Z`.
pub fn predict(fit: &PliableFit, x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DVector<f64>> {
    fit.check_dims(x, z)?;
    let mut yhat = DVector::from_element(x.nrows(), fit.beta0);
    yhat.gemv(1.0, z, &fit.theta0, 1.0);
    for (j, &b) in fit.beta.iter().enumerate() {
        if b != 0.0 {
            yhat.axpy(b, &x.column(j), 1.0);
        }
    }
    for (j, theta_j) in fit.theta.iter() {
        let modifier = z * theta_j;
        yhat += x.column(j).component_mul(&modifier);
    }
    Ok(yhat)
}

/// `y - yhat` on the dataset.
pub fn residual(data: &Dataset, fit: &PliableFit) -> Result<DVector<f64>> {
    Ok(data.y() - predict(fit, data.x(), data.z())?)
}

/// Residual with group `j`'s contribution added back.
pub fn partial_residual(data: &Dataset, fit: &PliableFit, j: usize) -> Result<DVector<f64>> {
    if j >= data.p() {
        return Err(PliableError::IndexOutOfRange {
            what: "predictor group",
            index: j,
            len: data.p(),
        });
    }
    let mut r = residual(data, fit)?;
    r.axpy(fit.beta[j], &data.x().column(j), 1.0);
    if let Some(theta_j) = fit.theta.get(j) {
        r += data.x().column(j).component_mul(&(data.z() * theta_j));
    }
    Ok(r)
}

/// Terms of the penalized least-squares objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyValue {
    /// `sum_j ||(beta_j, theta_j)||_2 + ||theta_j||_2`
    pub group_term: f64,
    /// `sum_jk |theta_jk|`
    pub l1_term: f64,
    /// `(1/2N) ||y - yhat||^2`
    pub loss: f64,
    pub total: f64,
}

pub(crate) fn group_penalty(beta_j: f64, theta_j: Option<&DVector<f64>>) -> (f64, f64) {
    match theta_j {
        None => (beta_j.abs(), 0.0),
        Some(t) => {
            let tn = t.norm_squared();
            (
                (beta_j * beta_j + tn).sqrt() + tn.sqrt(),
                t.iter().map(|v| v.abs()).sum(),
            )
        }
    }
}

/// Penalty terms of `fit` with the loss supplied by the caller.
pub(crate) fn penalty_value(fit: &PliableFit, loss: f64, lambda: f64, alpha: f64) -> PenaltyValue {
    let (mut group_term, mut l1_term) = (0.0, 0.0);
    for j in 0..fit.p() {
        let (g, l) = group_penalty(fit.beta[j], fit.theta.get(j));
        group_term += g;
        l1_term += l;
    }
    PenaltyValue {
        group_term,
        l1_term,
        loss,
        total: loss + (1.0 - alpha) * lambda * group_term + alpha * lambda * l1_term,
    }
}

pub(crate) fn validate_lambda_alpha(lambda: f64, alpha: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(PliableError::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must be finite and non-negative",
        });
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(PliableError::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must lie in [0, 1)",
        });
    }
    Ok(())
}

/// Penalized objective at `(lambda, alpha)`.
pub fn objective(
    fit: &PliableFit,
    data: &Dataset,
    lambda: f64,
    alpha: f64,
) -> Result<PenaltyValue> {
    validate_lambda_alpha(lambda, alpha)?;
    let r = residual(data, fit)?;
    let loss = r.norm_squared() / (2.0 * data.n() as f64);
    if !loss.is_finite() {
        return Err(PliableError::NonFinite("loss"));
    }
    let value = penalty_value(fit, loss, lambda, alpha);
    if !value.group_term.is_finite() {
        return Err(PliableError::NonFinite("group penalty"));
    }
    if !value.l1_term.is_finite() {
        return Err(PliableError::NonFinite("l1 penalty"));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_fit() -> PliableFit {
        let mut fit = PliableFit::zeros(1, 1, 0.0, 0.5);
        fit.beta0 = 1.0;
        fit.theta0 = DVector::from_vec(vec![2.0]);
        fit.beta = DVector::from_vec(vec![3.0]);
        fit.theta.set(0, DVector::from_vec(vec![4.0]));
        fit
    }

    #[test]
    fn hand_evaluated_prediction() {
        let x = DMatrix::from_element(1, 1, 1.0);
        let z = DMatrix::from_element(1, 1, 5.0);
        let yhat = predict(&tiny_fit(), &x, &z).unwrap();
        assert_eq!(yhat[0], 34.0);
    }

    #[test]
    fn zero_fit_predicts_zero() {
        let x = DMatrix::from_fn(4, 3, |i, j| (i + 2 * j) as f64 - 1.5);
        let z = DMatrix::from_fn(4, 2, |i, j| (i * j) as f64);
        let fit = PliableFit::zeros(3, 2, 0.1, 0.5);
        assert_eq!(predict(&fit, &x, &z).unwrap(), DVector::zeros(4));
    }

    #[test]
    fn inactive_modifiers_give_linear_model() {
        let x = DMatrix::from_fn(5, 2, |i, j| (i as f64).sin() + j as f64);
        let z = DMatrix::from_fn(5, 2, |i, j| (i * j) as f64);
        let mut fit = PliableFit::zeros(2, 2, 0.1, 0.5);
        fit.beta0 = 0.7;
        fit.beta = DVector::from_vec(vec![1.5, -2.0]);
        let expect = &x * &fit.beta + DVector::from_element(5, 0.7);
        assert_relative_eq!(predict(&fit, &x, &z).unwrap(), expect, epsilon = 1e-14);
    }

    #[test]
    fn dimension_mismatch_names_block() {
        let x = DMatrix::zeros(3, 2);
        let z = DMatrix::zeros(3, 1);
        let fit = PliableFit::zeros(2, 2, 0.0, 0.0);
        match predict(&fit, &x, &z) {
            Err(PliableError::DimensionMismatch { what, .. }) => assert_eq!(what, "columns of Z"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_fit_objective_is_half_mean_square() {
        let y = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let data = Dataset::new(y, DMatrix::from_element(3, 1, 1.0), DMatrix::zeros(3, 1)).unwrap();
        let fit = PliableFit::zeros(1, 1, 0.0, 0.0);
        let v = objective(&fit, &data, 1.0, 0.3).unwrap();
        assert_relative_eq!(v.loss, 14.0 / 6.0);
        assert_eq!(v.group_term, 0.0);
        assert_eq!(v.l1_term, 0.0);
    }

    #[test]
    fn collapsed_group_norm_is_abs_beta() {
        let (g, l) = group_penalty(-2.5, None);
        assert_eq!(g, 2.5);
        assert_eq!(l, 0.0);
    }

    #[test]
    fn theta_rows_drop_zero_rows() {
        let mut t = ThetaRows::zeros(3, 2);
        t.set(1, DVector::from_vec(vec![0.0, 1.0]));
        assert!(!t.is_row_zero(1));
        t.set(1, DVector::zeros(2));
        assert!(t.is_row_zero(1));
        assert_eq!(t.nnz(), 0);
    }

    #[test]
    fn rejects_non_finite_input() {
        let y = DVector::from_vec(vec![1.0, f64::NAN]);
        let err = Dataset::new(y, DMatrix::zeros(2, 1), DMatrix::zeros(2, 0)).unwrap_err();
        assert!(matches!(err, PliableError::NonFinite(_)));
    }

    #[test]
    fn partial_residual_out_of_range() {
        let data = Dataset::without_modifiers(DVector::zeros(2), DMatrix::zeros(2, 1)).unwrap();
        let fit = PliableFit::zeros(1, 0, 0.0, 0.0);
        assert!(matches!(
            partial_residual(&data, &fit, 1),
            Err(PliableError::IndexOutOfRange { .. })
        ));
    }
}
