//! Treatment-effect estimation with a single binary treatment as the modifier.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cv::{k_fold_cv, DEFAULT_FOLDS};
use crate::error::{PliableError, Result};
use crate::model::PliableFit;
use crate::path::{fit_path_standardized_on_grid, PathOptions};
use crate::simgen::{generate, SimName, SimSpec};
use crate::solver::SolverConfig;

/// `yhat(x, W = 1) - yhat(x, W = 0) = theta0 + sum_j x_j theta_j`
/// for a raw-scale fit with `K = 1`.
pub fn treatment_effect(fit: &PliableFit, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    if fit.k() != 1 {
        return Err(PliableError::DimensionMismatch {
            what: "modifiers of a treatment-effect fit",
            expected: 1,
            found: fit.k(),
        });
    }
    if x.ncols() != fit.p() {
        return Err(PliableError::DimensionMismatch {
            what: "columns of X",
            expected: fit.p(),
            found: x.ncols(),
        });
    }
    let mut tau = DVector::from_element(x.nrows(), fit.theta0[0]);
    for (j, row) in fit.theta.iter() {
        tau.axpy(row[0], &x.column(j), 1.0);
    }
    Ok(tau)
}

/// `1 - sum (est - truth)^2 / sum (truth - mean(truth))^2`: agreement with the 45 degree line.
pub fn effect_r2(estimate: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    let m = truth.mean();
    let ss_tot: f64 = truth.iter().map(|t| (t - m) * (t - m)).sum();
    let ss_res = (estimate - truth).norm_squared();
    1.0 - ss_res / ss_tot
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HteReplicate {
    pub seed: u64,
    pub lambda: f64,
    pub r2: f64,
    pub effect_mse: f64,
}

/// One replicate of a treatment-effect scenario: CV-tuned fit on the training
/// draw, effect scored against the truth on the test draw.
pub fn hte_replicate(scenario: SimName, seed: u64, config: &SolverConfig) -> Result<HteReplicate> {
    if !matches!(scenario, SimName::HteA | SimName::HteB | SimName::HteC) {
        return Err(PliableError::Unknown {
            what: "treatment-effect scenario",
            name: scenario.to_string(),
        });
    }
    let sim = generate(&SimSpec::new(scenario, seed))?;
    let options = PathOptions::default();
    let cv = k_fold_cv(&sim.train.data, config, &options, DEFAULT_FOLDS, seed)?;
    let grid = &cv.lambdas[..=cv.idx_min];
    let fitted = fit_path_standardized_on_grid(&sim.train.data, config, options.standardize, grid)?;
    let fit = fitted.raw_fit(cv.idx_min)?;
    let estimate = treatment_effect(&fit, sim.test.data.x())?;
    let truth = sim
        .test
        .effect
        .as_ref()
        .expect("treatment-effect specs carry the effect");
    Ok(HteReplicate {
        seed,
        lambda: cv.lambda_min(),
        r2: effect_r2(&estimate, truth),
        effect_mse: (&estimate - truth).norm_squared() / truth.len() as f64,
    })
}
