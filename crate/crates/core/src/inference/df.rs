//! Degrees of freedom by the covariance formula `df = sum_i Cov(y_i, yhat_i) / sigma^2`,
//! estimated by parametric bootstrap around a known mean.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PliableError, Result};
use crate::model::{predict, Dataset};
use crate::path::{fit_path_standardized_on_grid, lambda_grid, lambda_max};
use crate::preprocess::{standardize, StandardizeOptions};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfEstimate {
    pub lambdas: Vec<f64>,
    pub df_cov: Vec<f64>,
    /// Mean number of nonzero `beta_j` across replicates.
    pub n_nonzero_beta: Vec<f64>,
    /// Mean number of nonzero `beta_j` and `theta_jk` across replicates.
    pub n_nonzero_all: Vec<f64>,
    pub bootstrap_reps: usize,
}

/// `sum_i Cov(y_i, yhat_i) / sigma^2` using the sample covariance over replicates.
pub fn covariance_df(ys: &[DVector<f64>], yhats: &[DVector<f64>], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(PliableError::InvalidParameter {
            name: "sigma",
            value: sigma,
            reason: "must be positive",
        });
    }
    let b = ys.len();
    if b < 2 {
        return Err(PliableError::InvalidParameter {
            name: "bootstrap replicates",
            value: b as f64,
            reason: "need at least two",
        });
    }
    if yhats.len() != b {
        return Err(PliableError::DimensionMismatch {
            what: "fitted replicates",
            expected: b,
            found: yhats.len(),
        });
    }
    let n = ys[0].len();
    let mean_y = ys.iter().fold(DVector::zeros(n), |acc, y| acc + y) / b as f64;
    let mean_f = yhats.iter().fold(DVector::zeros(n), |acc, f| acc + f) / b as f64;
    let cov_sum: f64 = ys
        .iter()
        .zip(yhats)
        .map(|(y, f)| (y - &mean_y).dot(&(f - &mean_f)))
        .sum::<f64>()
        / (b - 1) as f64;
    Ok(cov_sum / (sigma * sigma))
}

fn draw_response(mu: &DVector<f64>, sigma: f64, seed: u64, rep: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    DVector::from_fn(mu.len(), |i, _| {
        mu[i] + sigma * rng.sample::<f64, _>(StandardNormal)
    })
}

/// Lambda grid for a bootstrap experiment: `lambda_max` of one pilot draw
/// (stream `u64::MAX`, disjoint from the replicates), then a geometric grid.
#[allow(clippy::too_many_arguments)]
pub fn pilot_lambda_grid(
    mu: &DVector<f64>,
    sigma: f64,
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    config: &SolverConfig,
    n_lambda: usize,
    ratio: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let y = DVector::from_fn(mu.len(), |i, _| {
        mu[i] + sigma * rng.sample::<f64, _>(StandardNormal)
    });
    let (std, _) = standardize(
        &Dataset::new(y, x.clone(), z.clone())?,
        StandardizeOptions::default(),
    )?;
    lambda_grid(lambda_max(&std, config.alpha)?, n_lambda, ratio)
}

/// Parametric bootstrap `y_b = mu + sigma eps_b`; fits the path on every
/// replicate and applies the covariance formula per lambda.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_df(
    mu: &DVector<f64>,
    sigma: f64,
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    lambda_grid: &[f64],
    config: &SolverConfig,
    b: usize,
    seed: u64,
) -> Result<DfEstimate> {
    if !(sigma > 0.0) {
        return Err(PliableError::InvalidParameter {
            name: "sigma",
            value: sigma,
            reason: "must be positive",
        });
    }
    if b < 2 {
        return Err(PliableError::InvalidParameter {
            name: "bootstrap replicates",
            value: b as f64,
            reason: "need at least two",
        });
    }
    let n_lambda = lambda_grid.len();
    type Rep = (DVector<f64>, Vec<DVector<f64>>, Vec<usize>, Vec<usize>);
    let reps: Vec<Rep> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let y = draw_response(mu, sigma, seed, rep);
            let data = Dataset::new(y.clone(), x.clone(), z.clone())?;
            let fitted = fit_path_standardized_on_grid(
                &data,
                config,
                StandardizeOptions::default(),
                lambda_grid,
            )?;
            let mut yhat = Vec::with_capacity(n_lambda);
            let mut nb = Vec::with_capacity(n_lambda);
            let mut na = Vec::with_capacity(n_lambda);
            for (i, fit) in fitted.path.fits.iter().enumerate() {
                yhat.push(predict(&fitted.raw_fit(i)?, x, z)?);
                nb.push(fit.n_nonzero_beta());
                na.push(fit.n_nonzero_all());
            }
            Ok((y, yhat, nb, na))
        })
        .collect::<Result<Vec<_>>>()?;

    let ys: Vec<DVector<f64>> = reps.iter().map(|r| r.0.clone()).collect();
    let mut df_cov = Vec::with_capacity(n_lambda);
    let mut n_nonzero_beta = Vec::with_capacity(n_lambda);
    let mut n_nonzero_all = Vec::with_capacity(n_lambda);
    for i in 0..n_lambda {
        let fits: Vec<DVector<f64>> = reps.iter().map(|r| r.1[i].clone()).collect();
        df_cov.push(covariance_df(&ys, &fits, sigma)?);
        n_nonzero_beta.push(reps.iter().map(|r| r.2[i] as f64).sum::<f64>() / b as f64);
        n_nonzero_all.push(reps.iter().map(|r| r.3[i] as f64).sum::<f64>() / b as f64);
    }
    Ok(DfEstimate {
        lambdas: lambda_grid.to_vec(),
        df_cov,
        n_nonzero_beta,
        n_nonzero_all,
        bootstrap_reps: b,
    })
}
