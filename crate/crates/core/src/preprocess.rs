//! Column standardization of `X` and `Z`, response centering, and the inverse
//! map back to the original scale.
//!
//! Scales use the population convention (divide by `N`).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PliableError, Result};
use crate::model::{Dataset, PliableFit, ThetaRows};

/// Columns whose population standard deviation falls below this fraction of
/// their magnitude are treated as constant.
const CONSTANT_COLUMN_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardizeOptions {
    pub x: bool,
    pub z: bool,
    pub center_y: bool,
}

impl Default for StandardizeOptions {
    fn default() -> Self {
        Self {
            x: true,
            z: true,
            center_y: true,
        }
    }
}

impl StandardizeOptions {
    pub fn none() -> Self {
        Self {
            x: false,
            z: false,
            center_y: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationMap {
    pub x_means: DVector<f64>,
    pub x_scales: DVector<f64>,
    pub z_means: DVector<f64>,
    pub z_scales: DVector<f64>,
    pub y_mean: f64,
    pub options: StandardizeOptions,
}

impl StandardizationMap {
    pub fn identity(p: usize, k: usize) -> Self {
        Self {
            x_means: DVector::zeros(p),
            x_scales: DVector::from_element(p, 1.0),
            z_means: DVector::zeros(k),
            z_scales: DVector::from_element(k, 1.0),
            y_mean: 0.0,
            options: StandardizeOptions::none(),
        }
    }

    pub fn p(&self) -> usize {
        self.x_means.len()
    }

    pub fn k(&self) -> usize {
        self.z_means.len()
    }

    /// Map raw predictors and modifiers into standardized coordinates.
    pub fn apply(
        &self,
        x: &DMatrix<f64>,
        z: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
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
        Ok((
            forward(x, &self.x_means, &self.x_scales),
            forward(z, &self.z_means, &self.z_scales),
        ))
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Result<Dataset> {
        let (x, z) = self.apply(data.x(), data.z())?;
        let y = data.y().add_scalar(-self.y_mean);
        Dataset::new(y, x, z)
    }

    /// Inverse of [`StandardizationMap::apply_dataset`].
    pub fn invert_dataset(&self, data: &Dataset) -> Result<Dataset> {
        let x = inverse(data.x(), &self.x_means, &self.x_scales);
        let z = inverse(data.z(), &self.z_means, &self.z_scales);
        Dataset::new(data.y().add_scalar(self.y_mean), x, z)
    }
}

fn forward(m: &DMatrix<f64>, means: &DVector<f64>, scales: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
        col /= scales[j];
    }
    out
}

fn inverse(m: &DMatrix<f64>, means: &DVector<f64>, scales: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= scales[j];
        col.add_scalar_mut(means[j]);
    }
    out
}

fn column_moments(
    m: &DMatrix<f64>,
    enabled: bool,
    block: &'static str,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = m.nrows() as f64;
    let mut means = DVector::zeros(m.ncols());
    let mut scales = DVector::from_element(m.ncols(), 1.0);
    if !enabled {
        return Ok((means, scales));
    }
    for (j, col) in m.column_iter().enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        let magnitude = col.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if !(sd > CONSTANT_COLUMN_RTOL * magnitude) || sd == 0.0 {
            return Err(PliableError::ConstantColumn { block, index: j });
        }
        means[j] = mean;
        scales[j] = sd;
    }
    Ok((means, scales))
}

/// Standardize `X` and `Z` columns to mean 0 / variance 1 and center `y`.
pub fn standardize(
    data: &Dataset,
    options: StandardizeOptions,
) -> Result<(Dataset, StandardizationMap)> {
    let (x_means, x_scales) = column_moments(data.x(), options.x, "X")?;
    let (z_means, z_scales) = column_moments(data.z(), options.z, "Z")?;
    let y_mean = if options.center_y {
        data.y().mean()
    } else {
        0.0
    };
    let map = StandardizationMap {
        x_means,
        x_scales,
        z_means,
        z_scales,
        y_mean,
        options,
    };
    let std = map.apply_dataset(data)?;
    Ok((std, map))
}

/// Convert a fit made on standardized data into coefficients acting on raw
/// `X`, `Z` and producing raw-scale `y`.
///
/// With `x~ = (x - mx)/sx`, `z~ = (z - mz)/sz`, each product `x~_j z~_k`
/// expands into an interaction, two main effects and a constant; those pieces
/// are redistributed onto `theta_jk`, `beta_j`, `theta0_k` and `beta0`.
pub fn destandardize_fit(fit: &PliableFit, map: &StandardizationMap) -> Result<PliableFit> {
    if fit.p() != map.p() {
        return Err(PliableError::DimensionMismatch {
            what: "standardization map predictors",
            expected: fit.p(),
            found: map.p(),
        });
    }
    if fit.k() != map.k() {
        return Err(PliableError::DimensionMismatch {
            what: "standardization map modifiers",
            expected: fit.k(),
            found: map.k(),
        });
    }
    let (mx, sx, mz, sz) = (&map.x_means, &map.x_scales, &map.z_means, &map.z_scales);
    let k = fit.k();

    let mut beta = fit.beta.component_div(sx);
    let mut theta0 = fit.theta0.component_div(sz);
    let mut beta0 = map.y_mean + fit.beta0 - theta0.dot(mz) - beta.dot(mx);
    let mut theta = ThetaRows::zeros(fit.p(), k);

    for (j, row) in fit.theta.iter() {
        let raw = DVector::from_fn(k, |kk, _| row[kk] / (sx[j] * sz[kk]));
        // x_j z_k - mz_k x_j - mx_j z_k + mx_j mz_k
        let shift = raw.dot(mz);
        beta[j] -= shift;
        theta0.axpy(-mx[j], &raw, 1.0);
        beta0 += mx[j] * shift;
        theta.set(j, raw);
    }

    Ok(PliableFit {
        beta0,
        theta0,
        beta,
        theta,
        lambda: fit.lambda,
        alpha: fit.alpha,
    })
}
