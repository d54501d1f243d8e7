//! Closed-form zero tests for a predictor group and the beta-only update.
//!
//! With partial residual `r`, `a = X_j^T r / N`, `w = W_j^T r / N`,
//! `c = (1-alpha) lambda` and `s = ||S(w, alpha lambda)||`, the whole group is
//! zero exactly when
//!
//! ```text
//! a^2 + (s - c)_+^2 <= c^2
//! ```
//!
//! This is the distance from `(a, w)` to the subdifferential of the penalty
//! at zero. It implies `|a| <= c` and `s <= 2c`; the converse fails when
//! `|a|` is close to `c`, so the box test alone can keep a group at zero that
//! belongs in the model.

use nalgebra::DVector;

use crate::error::{PliableError, Result};
use crate::model::Dataset;
use crate::solver::prox::{soft, soft_vec};

/// Distance of the zero group from optimality; zero when the group should stay at zero.
pub(crate) fn zero_group_violation(a: f64, s: f64, c: f64) -> f64 {
    (a.hypot((s - c).max(0.0)) - c).max(0.0)
}

pub(crate) fn zero_group_holds(a: f64, s: f64, c: f64) -> bool {
    a * a + (s - c).max(0.0).powi(2) <= c * c
}

/// `(X_j^T r / N, W_j^T r / N)` without forming `W_j`.
pub(crate) fn group_correlations(
    data: &Dataset,
    j: usize,
    r: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let n = data.n() as f64;
    let xj = data.x().column(j);
    let xr = xj.component_mul(r);
    (xr.sum() / n, data.z().tr_mul(&xr) / n)
}

fn check_inputs(data: &Dataset, j: usize, r: &DVector<f64>) -> Result<()> {
    if j >= data.p() {
        return Err(PliableError::IndexOutOfRange {
            what: "predictor group",
            index: j,
            len: data.p(),
        });
    }
    if r.len() != data.n() {
        return Err(PliableError::DimensionMismatch {
            what: "partial residual",
            expected: data.n(),
            found: r.len(),
        });
    }
    Ok(())
}

/// True when `(beta_j, theta_j) = 0` is optimal given the partial residual.
pub fn screen_group(
    j: usize,
    r_minus_j: &DVector<f64>,
    lambda: f64,
    alpha: f64,
    data: &Dataset,
) -> Result<bool> {
    check_inputs(data, j, r_minus_j)?;
    let (a, w) = group_correlations(data, j, r_minus_j);
    let c = (1.0 - alpha) * lambda;
    let s = soft_vec(&w, alpha * lambda).norm();
    Ok(zero_group_holds(a, s, c))
}

/// The box test `|a| <= c && s <= 2c`, which is necessary for a zero group
/// but not sufficient.
pub fn screen_group_box(
    j: usize,
    r_minus_j: &DVector<f64>,
    lambda: f64,
    alpha: f64,
    data: &Dataset,
) -> Result<bool> {
    check_inputs(data, j, r_minus_j)?;
    let (a, w) = group_correlations(data, j, r_minus_j);
    let c = (1.0 - alpha) * lambda;
    let s = soft_vec(&w, alpha * lambda).norm();
    Ok(a.abs() <= c && s <= 2.0 * c)
}

/// Best `beta_j` with `theta_j = 0`: `(N / ||X_j||^2) S(X_j^T r / N, (1-alpha) lambda)`.
pub fn beta_only_update(
    j: usize,
    r_minus_j: &DVector<f64>,
    lambda: f64,
    alpha: f64,
    data: &Dataset,
) -> Result<f64> {
    check_inputs(data, j, r_minus_j)?;
    let xj = data.x().column(j);
    let norm_sq = xj.norm_squared();
    if norm_sq == 0.0 {
        return Err(PliableError::InvalidParameter {
            name: "||X_j||^2",
            value: 0.0,
            reason: "predictor column is identically zero",
        });
    }
    let n = data.n() as f64;
    Ok(beta_from_correlation(
        xj.dot(r_minus_j) / n,
        norm_sq / n,
        lambda,
        alpha,
    ))
}

#[inline]
pub(crate) fn beta_from_correlation(a: f64, x_sq_over_n: f64, lambda: f64, alpha: f64) -> f64 {
    soft(a, (1.0 - alpha) * lambda) / x_sq_over_n
}

/// True when `theta_j = 0` is optimal once `beta_j = beta_hat`.
pub fn screen_theta(
    j: usize,
    r_minus_j: &DVector<f64>,
    beta_j_hat: f64,
    lambda: f64,
    alpha: f64,
    data: &Dataset,
) -> Result<bool> {
    check_inputs(data, j, r_minus_j)?;
    let r = r_minus_j - data.x().column(j) * beta_j_hat;
    let (_, w) = group_correlations(data, j, &r);
    Ok(theta_zero_holds(&w, lambda, alpha))
}

#[inline]
pub(crate) fn theta_zero_holds(w_after_beta: &DVector<f64>, lambda: f64, alpha: f64) -> bool {
    soft_vec(w_after_beta, alpha * lambda).norm() <= (1.0 - alpha) * lambda
}
