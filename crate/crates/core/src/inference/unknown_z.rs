//! Pliable lasso with an unobserved scalar modifier `Z = X gamma`.
//!
//! The enlarged objective adds `lambda2/2 ||gamma||^2` and is bi-convex. Each
//! cycle (i) solves the pliable lasso with `Z = X gamma` held fixed, then
//! (ii) solves the ridge problem for `gamma` with the fit held fixed:
//!
//! ```text
//! W = diag(theta0 + X theta) X,   r = y - beta0 - X beta
//! gamma = (W^T W / N + lambda2 I)^{-1} W^T r / N
//! ```
//!
//! Everything runs on standardized `X` and centered `y`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::cv::{assign_folds, k_fold_cv};
use crate::error::{PliableError, Result};
use crate::model::{objective, predict, Dataset, PliableFit};
use crate::path::{fit_path_on_grid, lambda_grid_for, PathOptions};
use crate::preprocess::{standardize, StandardizationMap, StandardizeOptions};
use crate::solver::{fit_single_lambda, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaChoice {
    Fixed(f64),
    /// Minimum-CV lambda for the current `Z`, re-selected every cycle.
    CvMin {
        folds: usize,
        seed: u64,
    },
    /// One lambda for all cycles, minimizing the cross-validated error of the
    /// whole alternation.
    CvAlternation {
        folds: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnknownZConfig {
    /// Ridge penalty; `None` uses `1e-3 tr(W^T W / N) / p` each cycle.
    pub lambda2: Option<f64>,
    pub n_cycles: usize,
    pub lambda: LambdaChoice,
    /// Rescale `X gamma` to unit variance before it is used as `Z`.
    pub restandardize: bool,
    pub n_lambda: usize,
}

impl Default for UnknownZConfig {
    fn default() -> Self {
        Self {
            lambda2: None,
            n_cycles: 2,
            lambda: LambdaChoice::CvAlternation { folds: 10, seed: 0 },
            restandardize: true,
            n_lambda: crate::path::DEFAULT_N_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// `gamma` used as the modifier direction during this cycle's lasso step.
    pub gamma_in: DVector<f64>,
    pub lambda: f64,
    pub lambda2: f64,
    /// Enlarged objective after the lasso half-step and after the ridge half-step.
    pub objective_after_fit: f64,
    pub objective_after_ridge: f64,
    /// Set when `W` was identically zero and the ridge step was skipped.
    pub ridge_skipped: bool,
}

#[derive(Debug, Clone)]
pub struct UnknownZFit {
    /// Fit on standardized `X` with `Z = X_std gamma`.
    pub fit: PliableFit,
    /// Modifier direction on standardized `X`.
    pub gamma: DVector<f64>,
    pub map: StandardizationMap,
    pub cycles: Vec<CycleRecord>,
}

impl UnknownZFit {
    /// `gamma` expressed on raw `X` (up to an additive constant in `Z`).
    pub fn gamma_raw(&self) -> DVector<f64> {
        self.gamma.component_div(&self.map.x_scales)
    }

    /// Raw-scale predictions for new raw predictors.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let (xs, _) = self.map.apply(x, &DMatrix::zeros(x.nrows(), 0))?;
        let z = &xs * &self.gamma;
        let zm = DMatrix::from_column_slice(z.len(), 1, z.as_slice());
        Ok(predict(&self.fit, &xs, &zm)?.add_scalar(self.map.y_mean))
    }
}

fn as_column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// Design of the ridge half-step: row `i` is `(theta0 + x_i^T theta) x_i`.
pub fn ridge_design(fit: &PliableFit, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scale = DVector::from_element(x.nrows(), fit.theta0[0]);
    for (j, row) in fit.theta.iter() {
        scale.axpy(row[0], &x.column(j), 1.0);
    }
    let mut w = x.clone();
    for mut col in w.column_iter_mut() {
        col.component_mul_assign(&scale);
    }
    w
}

/// `r = y - beta0 - X beta`.
pub fn ridge_target(fit: &PliableFit, y: &DVector<f64>, x: &DMatrix<f64>) -> DVector<f64> {
    let mut r = y.add_scalar(-fit.beta0);
    r.gemv(-1.0, x, &fit.beta, 1.0);
    r
}

/// Solve `(W^T W / N + lambda2 I) gamma = W^T r / N`.
pub fn ridge_solve(w: &DMatrix<f64>, r: &DVector<f64>, lambda2: f64) -> Result<DVector<f64>> {
    if !(lambda2 > 0.0) {
        return Err(PliableError::InvalidParameter {
            name: "lambda2",
            value: lambda2,
            reason: "must be positive",
        });
    }
    let n = w.nrows() as f64;
    let mut a = w.tr_mul(w) / n;
    for i in 0..a.nrows() {
        a[(i, i)] += lambda2;
    }
    let rhs = w.tr_mul(r) / n;
    let chol = a
        .cholesky()
        .ok_or(PliableError::NonFinite("ridge normal equations"))?;
    Ok(chol.solve(&rhs))
}

/// Default ridge penalty `1e-3 tr(W^T W / N) / p`.
pub fn default_lambda2(w: &DMatrix<f64>) -> f64 {
    1e-3 * w.norm_squared() / (w.nrows() as f64 * w.ncols() as f64)
}

/// Enlarged objective: pliable objective at `Z = X gamma` plus `lambda2/2 ||gamma||^2`.
pub fn enlarged_objective(
    fit: &PliableFit,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    gamma: &DVector<f64>,
    lambda: f64,
    lambda2: f64,
) -> Result<f64> {
    let z = as_column(&(x * gamma));
    let data = Dataset::new(y.clone(), x.clone(), z)?;
    Ok(objective(fit, &data, lambda, fit.alpha)?.total + 0.5 * lambda2 * gamma.norm_squared())
}

fn solve_fit_step(
    data: &Dataset,
    choice: LambdaChoice,
    solver: &SolverConfig,
    n_lambda: usize,
    warm: Option<&PliableFit>,
) -> Result<PliableFit> {
    match choice {
        LambdaChoice::Fixed(lambda) => Ok(fit_single_lambda(data, lambda, solver, warm)?.fit),
        LambdaChoice::CvAlternation { .. } => unreachable!("resolved before the first cycle"),
        LambdaChoice::CvMin { folds, seed } => {
            let options = PathOptions {
                n_lambda,
                lambda_min_ratio: None,
                standardize: StandardizeOptions::none(),
            };
            let cv = k_fold_cv(data, solver, &options, folds, seed)?;
            let path = fit_path_on_grid(data, solver, &cv.lambdas[..=cv.idx_min])?;
            Ok(path.fits[cv.idx_min].clone())
        }
    }
}

/// Alternate lasso and ridge half-steps starting from least-squares `gamma`.
/// Any `Z` columns in `data` are ignored.
pub fn fit_unknown_z(
    data: &Dataset,
    config: &UnknownZConfig,
    solver: &SolverConfig,
) -> Result<UnknownZFit> {
    if config.n_cycles == 0 {
        return Err(PliableError::InvalidParameter {
            name: "n_cycles",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let start = Start::new(data)?;
    let lambda = match config.lambda {
        LambdaChoice::CvAlternation { folds, seed } => LambdaChoice::Fixed(alternation_cv_lambda(
            data, &start, config, solver, folds, seed,
        )?),
        other => other,
    };
    Ok(alternate(start, &UnknownZConfig { lambda, ..*config }, solver, None)?.0)
}

/// Standardized problem and least-squares starting direction.
#[derive(Clone)]
struct Start {
    y: DVector<f64>,
    x: DMatrix<f64>,
    map: StandardizationMap,
    gamma: DVector<f64>,
}

impl Start {
    fn new(data: &Dataset) -> Result<Self> {
        let bare = Dataset::without_modifiers(data.y().clone(), data.x().clone())?;
        let (std, map) = standardize(&bare, StandardizeOptions::default())?;
        let (y, x) = (std.y().clone(), std.x().clone());
        let svd = x.clone().svd(true, true);
        let gamma = svd
            .solve(&y, 1e-12 * svd.singular_values.amax())
            .map_err(|_| PliableError::NonFinite("least-squares start"))?;
        Ok(Self { y, x, map, gamma })
    }
}

fn unit_variance(x: &DMatrix<f64>, gamma: &DVector<f64>) -> DVector<f64> {
    let zv = x * gamma;
    let sd = (zv.norm_squared() / zv.len() as f64).sqrt();
    if sd > 0.0 {
        gamma / sd
    } else {
        gamma.clone()
    }
}

/// Lambda grid from the first cycle's problem on the full data; each fold runs
/// the full alternation at every grid value and is scored on its held-out rows.
fn alternation_cv_lambda(
    data: &Dataset,
    start: &Start,
    config: &UnknownZConfig,
    solver: &SolverConfig,
    n_folds: usize,
    seed: u64,
) -> Result<f64> {
    let gamma = if config.restandardize {
        unit_variance(&start.x, &start.gamma)
    } else {
        start.gamma.clone()
    };
    let first = Dataset::new(
        start.y.clone(),
        start.x.clone(),
        as_column(&(&start.x * &gamma)),
    )?;
    let options = PathOptions {
        n_lambda: config.n_lambda,
        lambda_min_ratio: None,
        standardize: StandardizeOptions::none(),
    };
    let lambdas = lambda_grid_for(&first, solver, &options)?;
    let folds = assign_folds(data.n(), n_folds, seed)?;

    let per_fold: Vec<(f64, Vec<f64>)> = (0..n_folds)
        .into_par_iter()
        .map(|f| {
            let train_rows: Vec<usize> = (0..data.n()).filter(|&i| folds[i] != f).collect();
            let test_rows: Vec<usize> = (0..data.n()).filter(|&i| folds[i] == f).collect();
            let train = data.select_rows(&train_rows);
            let test = data.select_rows(&test_rows);
            let fold_start = Start::new(&train)?;
            let mut first: Option<PliableFit> = None;
            let mut errors = Vec::with_capacity(lambdas.len());
            for &l in &lambdas {
                let fixed = UnknownZConfig {
                    lambda: LambdaChoice::Fixed(l),
                    ..*config
                };
                let (fit, first_fit) =
                    alternate(fold_start.clone(), &fixed, solver, first.as_ref())?;
                let yhat = fit.predict(test.x())?;
                errors.push((test.y() - yhat).norm_squared() / test.n() as f64);
                first = Some(first_fit);
            }
            Ok((test_rows.len() as f64, errors))
        })
        .collect::<Result<Vec<_>>>()?;

    let total: f64 = per_fold.iter().map(|(w, _)| w).sum();
    let mean: Vec<f64> = (0..lambdas.len())
        .map(|i| per_fold.iter().map(|(w, e)| w * e[i]).sum::<f64>() / total)
        .collect();
    let best = (0..mean.len()).fold(0, |b, i| if mean[i] < mean[b] { i } else { b });
    Ok(lambdas[best])
}

/// Runs the cycles; also returns the first cycle's lasso fit, which `first_warm`
/// can seed on a neighbouring lambda.
fn alternate(
    start: Start,
    config: &UnknownZConfig,
    solver: &SolverConfig,
    first_warm: Option<&PliableFit>,
) -> Result<(UnknownZFit, PliableFit)> {
    let Start {
        y,
        x,
        map,
        mut gamma,
    } = start;
    let mut cycles = Vec::with_capacity(config.n_cycles);
    let mut fit: Option<PliableFit> = None;
    let mut first: Option<PliableFit> = None;
    for _ in 0..config.n_cycles {
        if config.restandardize {
            gamma = unit_variance(&x, &gamma);
        }
        let z = as_column(&(&x * &gamma));
        let cycle_data = Dataset::new(y.clone(), x.clone(), z)?;
        let warm = match fit.as_ref() {
            None => first_warm,
            Some(f) => Some(f).filter(|_| matches!(config.lambda, LambdaChoice::Fixed(_))),
        };
        let current = solve_fit_step(&cycle_data, config.lambda, solver, config.n_lambda, warm)?;
        let lambda = current.lambda;

        let w = ridge_design(&current, &x);
        let lambda2 = config.lambda2.unwrap_or_else(|| default_lambda2(&w));
        let objective_after_fit = enlarged_objective(&current, &y, &x, &gamma, lambda, lambda2)?;
        let gamma_in = gamma.clone();
        let ridge_skipped = w.iter().all(|&v| v == 0.0) || !(lambda2 > 0.0);
        if !ridge_skipped {
            let r = ridge_target(&current, &y, &x);
            gamma = ridge_solve(&w, &r, lambda2)?;
        }
        let objective_after_ridge = enlarged_objective(&current, &y, &x, &gamma, lambda, lambda2)?;
        cycles.push(CycleRecord {
            gamma_in,
            lambda,
            lambda2,
            objective_after_fit,
            objective_after_ridge,
            ridge_skipped,
        });
        if first.is_none() {
            first = Some(current.clone());
        }
        fit = Some(current);
    }

    let out = UnknownZFit {
        fit: fit.expect("at least one cycle"),
        gamma,
        map,
        cycles,
    };
    Ok((out, first.expect("at least one cycle")))
}
