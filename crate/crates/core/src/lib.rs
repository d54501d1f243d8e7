//! Pliable lasso: a lasso whose coefficients vary linearly with a set of
//! modifying variables `Z`,
//!
//! ```text
//! yhat = beta0 + Z theta0 + X beta + sum_j (X_j * Z) theta_j
//! ```
//!
//! fitted with a hierarchical group penalty so that `theta_j` can be nonzero
//! only when `beta_j` is.
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use pliable::{fit_single_lambda, Dataset, SolverConfig};
//!
//! let x = DMatrix::from_fn(20, 3, |i, j| ((i * (j + 2)) % 7) as f64 - 3.0);
//! let z = DMatrix::from_fn(20, 1, |i, _| (i % 2) as f64);
//! let y = x.column(0) * 2.0;
//! let data = Dataset::new(y, x, z).unwrap();
//! let out = fit_single_lambda(&data, 0.1, &SolverConfig::default(), None).unwrap();
//! assert!(out.fit.beta[0] > 0.0);
//! ```

pub mod cv;
pub mod error;
pub mod inference;
pub mod io;
pub mod model;
pub mod path;
pub mod preprocess;
pub mod simgen;
pub mod solver;

pub use cv::{assign_folds, evaluate, k_fold_cv, k_fold_cv_with_folds, CvResult, DEFAULT_FOLDS};
pub use error::{PliableError, Result};
pub use model::{
    interaction, objective, partial_residual, predict, residual, Dataset, PenaltyValue, PliableFit,
    ThetaRows,
};
pub use path::{
    default_lambda_min_ratio, fit_path, fit_path_on_grid, fit_path_standardized,
    fit_path_standardized_on_grid, lambda_grid, lambda_grid_for, lambda_max, FittedPath,
    PathOptions, PathPointDiagnostics, PathResult, DEFAULT_N_LAMBDA,
};
pub use preprocess::{destandardize_fit, standardize, StandardizationMap, StandardizeOptions};
pub use simgen::{generate, SimData, SimName, SimSpec, SimVariant, Split};
pub use solver::{
    check_kkt, fit_single_lambda, FitDiagnostics, FitOutput, KktReport, PliableSolver, SolverConfig,
};
