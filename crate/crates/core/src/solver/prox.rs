//! Proximal map of the pliable group penalty and the blockwise
//! generalized-gradient step for `(beta_j, theta_j)`.
//!
//! For a gradient point `zeta = gamma_0 - t * grad` the prox problem is
//!
//! ```text
//! min (1/2t)||gamma - zeta||^2 + (1-alpha) lambda (||gamma|| + ||theta||) + alpha lambda |theta|_1
//! ```
//!
//! Its stationarity conditions reduce to two scalar norm equations in
//! `a = |beta|`, `b = ||theta||`:
//!
//! ```text
//! (1 + c / sqrt(a^2 + b^2)) a                 = g1
//! (1 + c (1/b + 1 / sqrt(a^2 + b^2))) b       = g2
//! ```
//!
//! with `c = t (1-alpha) lambda`, `g1 = |zeta_beta|` and
//! `g2 = ||S(zeta_theta, t alpha lambda)||`. Writing `R = sqrt(a^2 + b^2)`,
//! both equations scale the data by `R / (R + c)`, so `R + c = h` with
//! `h = sqrt(g1^2 + (g2 - c)^2)`. The root is therefore closed-form.

use nalgebra::{DMatrix, DVector};

use crate::error::{PliableError, Result};
use crate::model::{interaction, Dataset};

/// `sign(x) (|x| - t)_+`.
pub fn soft_threshold(x: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(PliableError::InvalidParameter {
            name: "threshold",
            value: t,
            reason: "must be non-negative",
        });
    }
    Ok(soft(x, t))
}

/// Elementwise soft-threshold.
pub fn soft_threshold_vec(x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    soft_threshold(0.0, t)?;
    Ok(soft_vec(x, t))
}

#[inline]
pub(crate) fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

pub(crate) fn soft_vec(x: &DVector<f64>, t: f64) -> DVector<f64> {
    x.map(|v| soft(v, t))
}

/// Solution of the norm equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSolution {
    /// `|beta_j|`
    pub a: f64,
    /// `||theta_j||_2`
    pub b: f64,
}

/// Solve the two norm equations for `(a, b)`, including the boundary
/// cases where `theta` or the whole group is zero.
pub fn solve_norm_equations(g1: f64, g2: f64, c: f64) -> NormSolution {
    debug_assert!(g1 >= 0.0 && g2 >= 0.0 && c >= 0.0);
    if g2 <= c {
        return NormSolution {
            a: (g1 - c).max(0.0),
            b: 0.0,
        };
    }
    let h = g1.hypot(g2 - c);
    if h <= c {
        return NormSolution { a: 0.0, b: 0.0 };
    }
    let scale = (h - c) / h;
    NormSolution {
        a: g1 * scale,
        b: (g2 - c) * scale,
    }
}

/// Residuals of the two norm equations at `(a, b)`; the second line is
/// multiplied through by `b` so it stays finite at `b = 0`.
pub fn norm_equation_residuals(sol: NormSolution, g1: f64, g2: f64, c: f64) -> (f64, f64) {
    let r = sol.a.hypot(sol.b);
    if r == 0.0 {
        return (-g1, -g2);
    }
    let first = sol.a + c * sol.a / r - g1;
    let second = sol.b + c + c * sol.b / r - g2;
    (first, second)
}

/// Proximal map at `zeta = (zeta_beta, zeta_theta)` with step `t`.
pub fn group_prox(
    zeta_beta: f64,
    zeta_theta: &DVector<f64>,
    t: f64,
    lambda: f64,
    alpha: f64,
) -> (f64, DVector<f64>) {
    let c = t * (1.0 - alpha) * lambda;
    let s = soft_vec(zeta_theta, t * alpha * lambda);
    let g1 = zeta_beta.abs();
    let g2 = s.norm();
    let sol = solve_norm_equations(g1, g2, c);
    let beta = if g1 > 0.0 {
        zeta_beta.signum() * sol.a
    } else {
        0.0
    };
    let theta = if sol.b > 0.0 {
        s * (sol.b / g2)
    } else {
        DVector::zeros(zeta_theta.len())
    };
    (beta, theta)
}

/// Group-local penalty `(1-alpha) lambda (||gamma|| + ||theta||) + alpha lambda |theta|_1`.
pub(crate) fn group_penalty_value(beta: f64, theta: &DVector<f64>, lambda: f64, alpha: f64) -> f64 {
    let tn2 = theta.norm_squared();
    (1.0 - alpha) * lambda * ((beta * beta + tn2).sqrt() + tn2.sqrt())
        + alpha * lambda * theta.iter().map(|v| v.abs()).sum::<f64>()
}

/// Cached second-order data for one predictor group: `D = [X_j, W_j]`,
/// `G = D^T D / N` and its largest eigenvalue.
#[derive(Debug, Clone)]
pub struct GroupGram {
    pub w: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    pub lipschitz: f64,
}

impl GroupGram {
    pub fn new(data: &Dataset, j: usize) -> Self {
        let n = data.n() as f64;
        let k = data.k();
        let w = interaction(data.x(), data.z(), j);
        let mut d = DMatrix::zeros(data.n(), k + 1);
        d.column_mut(0).copy_from(&data.x().column(j));
        d.columns_mut(1, k).copy_from(&w);
        let gram = d.tr_mul(&d) / n;
        let lipschitz = gram
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0_f64, |m, &v| m.max(v));
        Self { w, gram, lipschitz }
    }

    fn smooth(&self, gamma: &DVector<f64>, b: &DVector<f64>) -> f64 {
        0.5 * gamma.dot(&(&self.gram * gamma)) - b.dot(gamma)
    }
}

/// State of one group for the blockwise update.
#[derive(Debug, Clone)]
pub struct GroupState {
    pub j: usize,
    pub beta_j: f64,
    pub theta_j: DVector<f64>,
    /// `W_j = X_j o Z` when materialized.
    pub w_j_cache: Option<DMatrix<f64>>,
}

impl GroupState {
    pub fn new(j: usize, beta_j: f64, theta_j: DVector<f64>) -> Self {
        Self {
            j,
            beta_j,
            theta_j,
            w_j_cache: None,
        }
    }

    fn gamma(&self) -> DVector<f64> {
        stack(self.beta_j, &self.theta_j)
    }
}

pub(crate) fn stack(beta: f64, theta: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(theta.len() + 1);
    g[0] = beta;
    g.rows_mut(1, theta.len()).copy_from(theta);
    g
}

/// One generalized-gradient step on the majorized objective of group `j`
/// at partial residual `r_minus_j`: `gamma <- prox_t(gamma - t grad)`.
pub fn prox_joint_update(
    data: &Dataset,
    state: &GroupState,
    r_minus_j: &DVector<f64>,
    lambda: f64,
    alpha: f64,
    t: f64,
) -> Result<GroupState> {
    if !(t > 0.0) {
        return Err(PliableError::InvalidParameter {
            name: "step size",
            value: t,
            reason: "must be positive",
        });
    }
    if r_minus_j.len() != data.n() {
        return Err(PliableError::DimensionMismatch {
            what: "partial residual",
            expected: data.n(),
            found: r_minus_j.len(),
        });
    }
    if state.theta_j.len() != data.k() {
        return Err(PliableError::DimensionMismatch {
            what: "theta_j",
            expected: data.k(),
            found: state.theta_j.len(),
        });
    }
    let n = data.n() as f64;
    let w = match &state.w_j_cache {
        Some(w) => w.clone(),
        None => interaction(data.x(), data.z(), state.j),
    };
    let xj = data.x().column(state.j);
    let fitted = xj * state.beta_j + &w * &state.theta_j;
    let resid = r_minus_j - fitted;
    let grad_beta = -xj.dot(&resid) / n;
    let grad_theta = -w.tr_mul(&resid) / n;
    let zeta_beta = state.beta_j - t * grad_beta;
    let zeta_theta = &state.theta_j - grad_theta * t;
    let (beta_j, theta_j) = group_prox(zeta_beta, &zeta_theta, t, lambda, alpha);
    if !beta_j.is_finite() || !theta_j.iter().all(|v| v.is_finite()) {
        return Err(PliableError::NonFinite("prox update"));
    }
    Ok(GroupState {
        j: state.j,
        beta_j,
        theta_j,
        w_j_cache: Some(w),
    })
}

/// Settings for the inner accelerated proximal-gradient loop.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ProxSettings {
    pub max_iters: usize,
    pub tol: f64,
    pub step_init: f64,
    pub shrink: f64,
    pub nesterov: bool,
}

/// Minimize the group subproblem
/// `1/2 g^T G g - b^T g + penalty(g)` by proximal gradient with
/// backtracking and restarted Nesterov momentum. Returns the minimizer
/// and the number of iterations used.
pub(crate) fn solve_group(
    gg: &GroupGram,
    b: &DVector<f64>,
    start: DVector<f64>,
    lambda: f64,
    alpha: f64,
    s: ProxSettings,
) -> (DVector<f64>, usize) {
    let k = b.len() - 1;
    if gg.lipschitz <= 0.0 {
        return (DVector::zeros(k + 1), 0);
    }
    let objective = |g: &DVector<f64>| {
        gg.smooth(g, b) + group_penalty_value(g[0], &g.rows(1, k).into_owned(), lambda, alpha)
    };
    let prox = |zeta: &DVector<f64>, t: f64| {
        let (beta, theta) = group_prox(zeta[0], &zeta.rows(1, k).into_owned(), t, lambda, alpha);
        stack(beta, &theta)
    };

    let mut t = s.step_init / gg.lipschitz;
    let mut x = start;
    let mut fx = objective(&x);
    let start_value = fx;
    let start_point = x.clone();
    let mut y = x.clone();
    let mut momentum = 1.0_f64;
    let mut iters = 0;

    while iters < s.max_iters {
        iters += 1;
        let grad = &gg.gram * &y - b;
        let fy = gg.smooth(&y, b);
        let x_new = loop {
            let cand = prox(&(&y - &grad * t), t);
            let d = &cand - &y;
            let bound = fy + grad.dot(&d) + d.norm_squared() / (2.0 * t);
            if gg.smooth(&cand, b) <= bound + 1e-13 * (1.0 + fy.abs()) || t < 1e-300 {
                break cand;
            }
            t *= s.shrink;
        };
        let f_new = objective(&x_new);
        if s.nesterov && f_new > fx && momentum > 1.0 {
            y = x.clone();
            momentum = 1.0;
            continue;
        }
        let step = (&x_new - &x).amax();
        let scale = x_new.amax().max(1.0);
        if s.nesterov {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            y = &x_new + (&x_new - &x) * ((momentum - 1.0) / next);
            momentum = next;
        } else {
            y = x_new.clone();
        }
        x = x_new;
        fx = f_new;
        if step <= s.tol * scale {
            break;
        }
    }
    if fx > start_value + 1e-12 * (1.0 + start_value.abs()) {
        return (start_point, iters);
    }
    (x, iters)
}

/// Convenience wrapper used by tests and benchmarks: run the inner loop for
/// group `j` of `data` at partial residual `r_minus_j`.
pub fn minimize_group(
    data: &Dataset,
    state: &GroupState,
    r_minus_j: &DVector<f64>,
    lambda: f64,
    alpha: f64,
) -> (GroupState, usize) {
    let gg = GroupGram::new(data, state.j);
    let n = data.n() as f64;
    let xj = data.x().column(state.j);
    let b = stack(xj.dot(r_minus_j) / n, &(gg.w.tr_mul(r_minus_j) / n));
    let settings = ProxSettings {
        max_iters: 100_000,
        tol: 1e-14,
        step_init: 1.0,
        shrink: 0.8,
        nesterov: true,
    };
    let (g, iters) = solve_group(&gg, &b, state.gamma(), lambda, alpha, settings);
    let k = data.k();
    let out = GroupState {
        j: state.j,
        beta_j: g[0],
        theta_j: g.rows(1, k).into_owned(),
        w_j_cache: Some(gg.w),
    };
    (out, iters)
}
