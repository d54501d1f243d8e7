//! K-fold cross-validation over a fixed lambda grid.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PliableError, Result};
use crate::model::{predict, Dataset, PliableFit};
use crate::path::{fit_path_standardized_on_grid, lambda_grid_for, PathOptions};
use crate::solver::SolverConfig;

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    pub cv_mean: Vec<f64>,
    pub cv_se: Vec<f64>,
    /// Index of the minimizing lambda.
    pub idx_min: usize,
    /// Largest lambda (smallest index) whose mean lies within one standard
    /// error of the minimum.
    pub idx_1se: usize,
    /// Fold of every observation.
    pub folds: Vec<usize>,
}

impl CvResult {
    pub fn lambda_min(&self) -> f64 {
        self.lambdas[self.idx_min]
    }

    pub fn lambda_1se(&self) -> f64 {
        self.lambdas[self.idx_1se]
    }
}

/// Mean squared prediction error of `fit` on `test`.
pub fn evaluate(fit: &PliableFit, test: &Dataset) -> Result<f64> {
    let yhat = predict(fit, test.x(), test.z())?;
    let mse = (test.y() - yhat).norm_squared() / test.n() as f64;
    if !mse.is_finite() {
        return Err(PliableError::NonFinite("test error"));
    }
    Ok(mse)
}

/// Seeded fold assignment: a shuffled `0..N` dealt round-robin into `n_folds` folds.
pub fn assign_folds(n: usize, n_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if n_folds < 2 {
        return Err(PliableError::InvalidParameter {
            name: "n_folds",
            value: n_folds as f64,
            reason: "must be at least 2",
        });
    }
    if n < n_folds {
        return Err(PliableError::InvalidParameter {
            name: "n_folds",
            value: n_folds as f64,
            reason: "exceeds the number of observations",
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % n_folds;
    }
    Ok(folds)
}

/// Cross-validation with a seeded fold assignment.
pub fn k_fold_cv(
    data: &Dataset,
    config: &SolverConfig,
    options: &PathOptions,
    n_folds: usize,
    seed: u64,
) -> Result<CvResult> {
    let folds = assign_folds(data.n(), n_folds, seed)?;
    k_fold_cv_with_folds(data, config, options, &folds)
}

/// Cross-validation with explicit fold labels `0..n_folds`.
///
/// The lambda grid comes from the full data; each fold restandardizes its
/// training part and is scored on the held-out rows at raw scale.
pub fn k_fold_cv_with_folds(
    data: &Dataset,
    config: &SolverConfig,
    options: &PathOptions,
    folds: &[usize],
) -> Result<CvResult> {
    if folds.len() != data.n() {
        return Err(PliableError::DimensionMismatch {
            what: "fold labels",
            expected: data.n(),
            found: folds.len(),
        });
    }
    let n_folds = folds.iter().copied().max().map_or(0, |m| m + 1);
    if n_folds < 2 {
        return Err(PliableError::InvalidParameter {
            name: "n_folds",
            value: n_folds as f64,
            reason: "must be at least 2",
        });
    }
    let lambdas = lambda_grid_for(data, config, options)?;

    let per_fold: Vec<(usize, Vec<f64>)> = (0..n_folds)
        .into_par_iter()
        .map(|f| {
            let train_rows: Vec<usize> = (0..data.n()).filter(|&i| folds[i] != f).collect();
            let test_rows: Vec<usize> = (0..data.n()).filter(|&i| folds[i] == f).collect();
            if test_rows.is_empty() {
                return Ok((0, vec![0.0; lambdas.len()]));
            }
            let train = data.select_rows(&train_rows);
            let test = data.select_rows(&test_rows);
            let fitted =
                fit_path_standardized_on_grid(&train, config, options.standardize, &lambdas)?;
            let errors = (0..lambdas.len())
                .map(|i| evaluate(&fitted.raw_fit(i)?, &test))
                .collect::<Result<Vec<f64>>>()?;
            Ok((test_rows.len(), errors))
        })
        .enumerate()
        .map(|(f, res): (usize, Result<_>)| {
            res.map_err(|e| PliableError::Fold {
                fold: f,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let total: f64 = per_fold.iter().map(|(w, _)| *w as f64).sum();
    let used = per_fold.iter().filter(|(w, _)| *w > 0).count() as f64;
    let mut cv_mean = vec![0.0; lambdas.len()];
    let mut cv_se = vec![0.0; lambdas.len()];
    for i in 0..lambdas.len() {
        let mean = per_fold.iter().map(|(w, e)| *w as f64 * e[i]).sum::<f64>() / total;
        let var = per_fold
            .iter()
            .map(|(w, e)| *w as f64 * (e[i] - mean).powi(2))
            .sum::<f64>()
            / total;
        cv_mean[i] = mean;
        cv_se[i] = (var / (used - 1.0).max(1.0)).sqrt();
    }
    let idx_min = cv_mean
        .iter()
        .enumerate()
        .fold(0, |best, (i, &m)| if m < cv_mean[best] { i } else { best });
    let bound = cv_mean[idx_min] + cv_se[idx_min];
    let idx_1se = cv_mean.iter().position(|&m| m <= bound).unwrap_or(idx_min);

    Ok(CvResult {
        lambdas,
        cv_mean,
        cv_se,
        idx_min,
        idx_1se,
        folds: folds.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn folds_are_balanced_and_deterministic() {
        let a = assign_folds(23, 5, 7).unwrap();
        let b = assign_folds(23, 5, 7).unwrap();
        assert_eq!(a, b);
        for f in 0..5 {
            let c = a.iter().filter(|&&x| x == f).count();
            assert!(c == 4 || c == 5);
        }
        assert!(assign_folds(3, 5, 0).is_err());
        assert!(assign_folds(10, 1, 0).is_err());
    }

    #[test]
    fn perfect_and_zero_fit_errors() {
        let x = DMatrix::from_fn(5, 1, |i, _| i as f64);
        let y = DVector::from_fn(5, |i, _| 2.0 * i as f64);
        let data = Dataset::without_modifiers(y.clone(), x).unwrap();
        let mut fit = PliableFit::zeros(1, 0, 0.0, 0.5);
        fit.beta[0] = 2.0;
        assert_eq!(evaluate(&fit, &data).unwrap(), 0.0);
        let zero = PliableFit::zeros(1, 0, 0.0, 0.5);
        assert_eq!(evaluate(&zero, &data).unwrap(), y.norm_squared() / 5.0);
    }
}
