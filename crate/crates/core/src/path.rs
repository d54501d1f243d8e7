//! Decreasing lambda grid and warm-started regularization path.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PliableError, Result};
use crate::model::{predict, Dataset, PliableFit};
use crate::preprocess::{destandardize_fit, standardize, StandardizationMap, StandardizeOptions};
use crate::solver::prox::soft_vec;
use crate::solver::screening::{group_correlations, zero_group_holds};
use crate::solver::{FitOutput, PliableSolver, SolverConfig};

pub const DEFAULT_N_LAMBDA: usize = 50;

/// `0.01` when `N > p (K + 1)`, else `0.05`.
pub fn default_lambda_min_ratio(n: usize, p: usize, k: usize) -> f64 {
    if n > p * (k + 1) {
        0.01
    } else {
        0.05
    }
}

fn intercept_only_residual(data: &Dataset) -> DVector<f64> {
    let (n, k) = (data.n(), data.k());
    let mut design = DMatrix::from_element(n, k + 1, 1.0);
    design.columns_mut(1, k).copy_from(data.z());
    // Projection onto span(1, Z); the SVD handles rank-deficient Z.
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(
            data.y(),
            1e-12 * svd.singular_values.amax().max(f64::MIN_POSITIVE),
        )
        .expect("SVD computed with both factors");
    data.y() - &design * coef
}

/// Smallest lambda at which every group passes the zero test for the
/// intercept-only residual, found per group by bisection and returned
/// `1e-10` (relative) above the boundary so the empty model is strictly optimal.
pub fn lambda_max(data: &Dataset, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(PliableError::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must lie in [0, 1); the group penalty vanishes at 1",
        });
    }
    let r = intercept_only_residual(data);
    let mut best = 0.0_f64;
    for j in 0..data.p() {
        let (a, w) = group_correlations(data, j, &r);
        let holds =
            |lam: f64| zero_group_holds(a, soft_vec(&w, alpha * lam).norm(), (1.0 - alpha) * lam);
        let mut hi = a.abs().max(w.norm()) / (1.0 - alpha);
        if hi == 0.0 || hi <= best {
            continue;
        }
        // hi may sit exactly on the boundary in floating point; nudge until it holds.
        while !holds(hi) {
            hi *= 1.0 + 1e-12;
        }
        let mut lo = 0.0;
        if holds(best.max(lo)) {
            continue;
        }
        lo = lo.max(best);
        for _ in 0..200 {
            if hi - lo <= 1e-13 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if holds(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        best = best.max(hi);
    }
    Ok(best * (1.0 + 1e-10))
}

/// Geometric grid from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, n_lambda: usize, ratio: f64) -> Result<Vec<f64>> {
    if n_lambda == 0 {
        return Err(PliableError::InvalidParameter {
            name: "n_lambda",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PliableError::InvalidParameter {
            name: "lambda_min_ratio",
            value: ratio,
            reason: "must lie in (0, 1)",
        });
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(PliableError::InvalidParameter {
            name: "lambda_max",
            value: lambda_max,
            reason: "response carries no signal along any group",
        });
    }
    if n_lambda == 1 {
        return Ok(vec![lambda_max]);
    }
    let step = ratio.ln() / (n_lambda - 1) as f64;
    Ok((0..n_lambda)
        .map(|i| lambda_max * (step * i as f64).exp())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPointDiagnostics {
    pub passes: usize,
    pub active_groups: usize,
    pub active_theta_rows: usize,
    pub kkt_max_violation: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub lambdas: Vec<f64>,
    pub fits: Vec<PliableFit>,
    pub diagnostics: Vec<PathPointDiagnostics>,
}

impl PathResult {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

fn point_diagnostics(out: &FitOutput) -> PathPointDiagnostics {
    PathPointDiagnostics {
        passes: out.diagnostics.passes,
        active_groups: out.fit.active_groups().len(),
        active_theta_rows: out.fit.theta.active_rows().len(),
        kkt_max_violation: out.diagnostics.kkt.max_violation,
        objective: out.diagnostics.objective,
    }
}

/// Fit every lambda of a strictly decreasing grid, each warm-started from the previous fit.
pub fn fit_path_on_grid(
    data: &Dataset,
    config: &SolverConfig,
    lambdas: &[f64],
) -> Result<PathResult> {
    if lambdas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(PliableError::InvalidParameter {
            name: "lambda grid",
            value: f64::NAN,
            reason: "must be strictly decreasing",
        });
    }
    let mut solver = PliableSolver::new(data, *config)?;
    let mut fits: Vec<PliableFit> = Vec::with_capacity(lambdas.len());
    let mut diagnostics = Vec::with_capacity(lambdas.len());
    for (index, &lambda) in lambdas.iter().enumerate() {
        let out = solver
            .fit(lambda, fits.last())
            .map_err(|e| PliableError::PathFit {
                index,
                source: Box::new(e),
            })?;
        diagnostics.push(point_diagnostics(&out));
        fits.push(out.fit);
    }
    Ok(PathResult {
        lambdas: lambdas.to_vec(),
        fits,
        diagnostics,
    })
}

/// Path over a geometric grid starting at [`lambda_max`].
pub fn fit_path(
    data: &Dataset,
    config: &SolverConfig,
    n_lambda: usize,
    lambda_min_ratio: f64,
) -> Result<PathResult> {
    let lmax = lambda_max(data, config.alpha)?;
    let grid = lambda_grid(lmax, n_lambda, lambda_min_ratio)?;
    fit_path_on_grid(data, config, &grid)
}

/// A path fitted on standardized data together with its map back to raw scale.
#[derive(Debug, Clone)]
pub struct FittedPath {
    pub map: StandardizationMap,
    pub path: PathResult,
}

impl FittedPath {
    pub fn raw_fit(&self, index: usize) -> Result<PliableFit> {
        let fit = self
            .path
            .fits
            .get(index)
            .ok_or(PliableError::IndexOutOfRange {
                what: "lambda index",
                index,
                len: self.path.len(),
            })?;
        destandardize_fit(fit, &self.map)
    }

    pub fn raw_fits(&self) -> Result<Vec<PliableFit>> {
        (0..self.path.len()).map(|i| self.raw_fit(i)).collect()
    }

    /// Raw-scale predictions of the fit at `index`.
    pub fn predict(
        &self,
        index: usize,
        x: &DMatrix<f64>,
        z: &DMatrix<f64>,
    ) -> Result<DVector<f64>> {
        predict(&self.raw_fit(index)?, x, z)
    }
}

/// Path settings for the raw-data pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    pub n_lambda: usize,
    /// `None` selects [`default_lambda_min_ratio`].
    pub lambda_min_ratio: Option<f64>,
    pub standardize: StandardizeOptions,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            n_lambda: DEFAULT_N_LAMBDA,
            lambda_min_ratio: None,
            standardize: StandardizeOptions::default(),
        }
    }
}

impl PathOptions {
    pub fn ratio_for(&self, data: &Dataset) -> f64 {
        self.lambda_min_ratio
            .unwrap_or_else(|| default_lambda_min_ratio(data.n(), data.p(), data.k()))
    }
}

/// Lambda grid for raw data under the given standardization.
pub fn lambda_grid_for(
    raw: &Dataset,
    config: &SolverConfig,
    options: &PathOptions,
) -> Result<Vec<f64>> {
    let (std, _) = standardize(raw, options.standardize)?;
    let lmax = lambda_max(&std, config.alpha)?;
    lambda_grid(lmax, options.n_lambda, options.ratio_for(raw))
}

/// Standardize, fit the path, and keep the map for raw-scale output.
pub fn fit_path_standardized(
    raw: &Dataset,
    config: &SolverConfig,
    options: &PathOptions,
) -> Result<FittedPath> {
    let (std, map) = standardize(raw, options.standardize)?;
    let path = fit_path(&std, config, options.n_lambda, options.ratio_for(raw))?;
    Ok(FittedPath { map, path })
}

/// Same as [`fit_path_standardized`] on a caller-supplied grid.
pub fn fit_path_standardized_on_grid(
    raw: &Dataset,
    config: &SolverConfig,
    standardize_options: StandardizeOptions,
    lambdas: &[f64],
) -> Result<FittedPath> {
    let (std, map) = standardize(raw, standardize_options)?;
    let path = fit_path_on_grid(&std, config, lambdas)?;
    Ok(FittedPath { map, path })
}
