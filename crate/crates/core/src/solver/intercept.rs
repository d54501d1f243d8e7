use nalgebra::{DMatrix, DVector};

use crate::error::{PliableError, Result};
use crate::model::{residual, Dataset, PliableFit};

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_RTOL: f64 = 1e-12;

/// Least-squares regression of a working response on `(1, Z)`.
#[derive(Debug, Clone)]
pub(crate) struct InterceptSolver {
    design: DMatrix<f64>,
    /// Pseudo-inverse of `A^T A` for `A = (1, Z)`.
    normal_inv: DMatrix<f64>,
}

impl InterceptSolver {
    pub fn new(data: &Dataset, allow_min_norm: bool) -> Result<Self> {
        let (n, k) = (data.n(), data.k());
        let mut design = DMatrix::from_element(n, k + 1, 1.0);
        design.columns_mut(1, k).copy_from(data.z());
        let ata = design.tr_mul(&design);
        let eig = ata.symmetric_eigen();
        let top = eig.eigenvalues.amax();
        let cutoff = RANK_RTOL * top.max(f64::MIN_POSITIVE);
        let deficient = eig.eigenvalues.iter().any(|&v| v <= cutoff);
        if deficient && !allow_min_norm {
            return Err(PliableError::RankDeficient);
        }
        let inv_vals = eig
            .eigenvalues
            .map(|v| if v > cutoff { 1.0 / v } else { 0.0 });
        let v = &eig.eigenvectors;
        let normal_inv = v * DMatrix::from_diagonal(&inv_vals) * v.transpose();
        Ok(Self { design, normal_inv })
    }

    /// Refit `(beta0, theta0)` against `r + beta0 + Z theta0`, updating `r` in place.
    pub fn refresh(&self, fit: &mut PliableFit, r: &mut DVector<f64>) {
        let k = fit.k();
        let old = {
            let mut c = DVector::zeros(k + 1);
            c[0] = fit.beta0;
            c.rows_mut(1, k).copy_from(&fit.theta0);
            c
        };
        r.gemv(1.0, &self.design, &old, 1.0);
        let coef = &self.normal_inv * self.design.tr_mul(r);
        r.gemv(-1.0, &self.design, &coef, 1.0);
        fit.beta0 = coef[0];
        fit.theta0 = coef.rows(1, k).into_owned();
    }

    /// `max |(1, Z)^T r / N|`.
    pub fn violation(&self, r: &DVector<f64>) -> f64 {
        (self.design.tr_mul(r) / r.len() as f64).amax()
    }
}

/// Unpenalized intercepts `(beta0, theta0)` from regressing the current
/// residual (with the old intercepts added back) on `(1, Z)`.
pub fn update_intercepts(data: &Dataset, fit: &PliableFit) -> Result<(f64, DVector<f64>)> {
    let solver = InterceptSolver::new(data, false)?;
    let mut r = residual(data, fit)?;
    let mut out = fit.clone();
    solver.refresh(&mut out, &mut r);
    Ok((out.beta0, out.theta0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn intercept_only_is_mean_shift() {
        let y = DVector::from_vec(vec![1.0, 2.0, 6.0]);
        let data =
            Dataset::without_modifiers(y, DMatrix::from_vec(3, 1, vec![1.0, 0.0, -1.0])).unwrap();
        let mut fit = PliableFit::zeros(1, 0, 0.0, 0.5);
        fit.beta0 = 0.5;
        let (b0, t0) = update_intercepts(&data, &fit).unwrap();
        assert_relative_eq!(b0, 3.0, epsilon = 1e-14);
        assert_eq!(t0.len(), 0);
    }

    #[test]
    fn collinear_modifiers_are_rank_deficient() {
        let z = DMatrix::from_element(4, 1, 2.0);
        let data = Dataset::new(DVector::zeros(4), DMatrix::from_element(4, 1, 1.0), z).unwrap();
        assert!(matches!(
            InterceptSolver::new(&data, false),
            Err(PliableError::RankDeficient)
        ));
        assert!(InterceptSolver::new(&data, true).is_ok());
    }
}
