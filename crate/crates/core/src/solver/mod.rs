//! Single-lambda solver: blockwise cyclic coordinate descent over the
//! predictor groups `(beta_j, theta_j)`, with intercept refresh at every pass.
//!
//! Each group update is an exact block minimization:
//!
//! 1. If the whole group passes the zero test it is set to zero.
//! 2. Otherwise the beta-only soft-threshold update is tried; if `theta_j = 0`
//!    is optimal at that `beta_j` it is kept.
//! 3. Otherwise the group subproblem is solved by accelerated proximal
//!    gradient with backtracking.

mod intercept;
pub mod prox;
pub mod screening;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{PliableError, Result};
use crate::model::{penalty_value, residual, validate_lambda_alpha, Dataset, PliableFit};

pub use intercept::update_intercepts;
pub use prox::{
    group_prox, minimize_group, norm_equation_residuals, prox_joint_update, soft_threshold,
    soft_threshold_vec, solve_norm_equations, GroupGram, GroupState, NormSolution,
};
pub use screening::{beta_only_update, screen_group, screen_group_box, screen_theta};

use intercept::InterceptSolver;
use prox::{soft_vec, solve_group, stack, ProxSettings};
use screening::{
    beta_from_correlation, group_correlations, theta_zero_holds, zero_group_holds,
    zero_group_violation,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight of the elementwise `l1` penalty on `Theta`, in `[0, 1)`.
    pub alpha: f64,
    /// Relative objective change per pass below which a pass counts as converged.
    pub tol_obj: f64,
    /// Maximum allowed subgradient violation at convergence.
    pub tol_kkt: f64,
    pub max_outer_iters: usize,
    pub max_prox_iters: usize,
    /// Initial step of the group prox loop, as a multiple of `1 / L_j`.
    pub step_init: f64,
    pub backtrack_shrink: f64,
    pub nesterov: bool,
    /// Relative step size that ends the group prox loop.
    pub prox_tol: f64,
    /// Use the closed-form zero tests before the prox loop.
    pub screening: bool,
    /// Iterate on the nonzero groups between full sweeps.
    pub active_set: bool,
    /// Use a minimum-norm solve when `(1, Z)` is rank deficient.
    pub min_norm_intercepts: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            tol_obj: 1e-7,
            tol_kkt: 1e-4,
            max_outer_iters: 10_000,
            max_prox_iters: 10_000,
            step_init: 1.0,
            backtrack_shrink: 0.8,
            nesterov: true,
            prox_tol: 1e-12,
            screening: true,
            active_set: true,
            min_norm_intercepts: false,
        }
    }
}

impl SolverConfig {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Tight tolerances for reference solutions.
    pub fn precise(mut self) -> Self {
        self.tol_obj = 1e-14;
        self.tol_kkt = 1e-9;
        self.prox_tol = 1e-14;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_lambda_alpha(0.0, self.alpha)?;
        let positive = [
            ("tol_obj", self.tol_obj),
            ("tol_kkt", self.tol_kkt),
            ("step_init", self.step_init),
            ("prox_tol", self.prox_tol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(PliableError::InvalidParameter {
                    name,
                    value,
                    reason: "must be positive",
                });
            }
        }
        if !(self.backtrack_shrink > 0.0 && self.backtrack_shrink < 1.0) {
            return Err(PliableError::InvalidParameter {
                name: "backtrack_shrink",
                value: self.backtrack_shrink,
                reason: "must lie in (0, 1)",
            });
        }
        if self.max_outer_iters == 0 || self.max_prox_iters == 0 {
            return Err(PliableError::InvalidParameter {
                name: "iteration cap",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }

    fn prox_settings(&self) -> ProxSettings {
        ProxSettings {
            max_iters: self.max_prox_iters,
            tol: self.prox_tol,
            step_init: self.step_init,
            shrink: self.backtrack_shrink,
            nesterov: self.nesterov,
        }
    }
}

/// Subgradient-equation violations of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub per_group: Vec<f64>,
    /// `max |(1, Z)^T r / N|`
    pub intercept_violation: f64,
    pub max_violation: f64,
    pub worst_group: Option<usize>,
}

/// Violation of the subgradient equations for one group, given
/// `a = X_j^T r / N` and `w = W_j^T r / N` at the full residual.
///
/// Free subgradient components are chosen to minimize the violation; on zero
/// entries of a nonzero `theta_j` that gives `v = clamp(w_k / (alpha lambda), -1, 1)`.
fn group_violation(
    a: f64,
    w: &DVector<f64>,
    beta: f64,
    theta: Option<&DVector<f64>>,
    lambda: f64,
    alpha: f64,
) -> f64 {
    let c = (1.0 - alpha) * lambda;
    let al = alpha * lambda;
    match theta {
        None if beta == 0.0 => zero_group_violation(a, soft_vec(w, al).norm(), c),
        None => {
            let rb = a - c * beta.signum();
            let rt = (soft_vec(w, al).norm() - c).max(0.0);
            rb.hypot(rt)
        }
        Some(theta) => {
            let tn = theta.norm();
            let norm = beta.hypot(tn);
            let rb = a - c * beta / norm;
            let rt = DVector::from_fn(w.len(), |k, _| {
                let th = theta[k];
                if th != 0.0 {
                    w[k] - c * (th / norm + th / tn) - al * th.signum()
                } else {
                    (w[k].abs() - al).max(0.0)
                }
            });
            rb.hypot(rt.norm())
        }
    }
}

fn kkt_from_residual(
    data: &Dataset,
    fit: &PliableFit,
    r: &DVector<f64>,
    intercept_violation: f64,
    lambda: f64,
    alpha: f64,
) -> KktReport {
    let per_group: Vec<f64> = (0..data.p())
        .map(|j| {
            let (a, w) = group_correlations(data, j, r);
            group_violation(a, &w, fit.beta[j], fit.theta.get(j), lambda, alpha)
        })
        .collect();
    let (mut worst_group, mut worst) = (None, 0.0);
    for (j, &v) in per_group.iter().enumerate() {
        if v > worst || worst_group.is_none() {
            worst = v;
            worst_group = Some(j);
        }
    }
    KktReport {
        max_violation: worst.max(intercept_violation),
        per_group,
        intercept_violation,
        worst_group,
    }
}

/// Subgradient-equation check of `fit` at `(lambda, alpha)`.
pub fn check_kkt(fit: &PliableFit, data: &Dataset, lambda: f64, alpha: f64) -> Result<KktReport> {
    validate_lambda_alpha(lambda, alpha)?;
    let r = residual(data, fit)?;
    let n = data.n() as f64;
    let mut iv = (r.sum() / n).abs();
    if data.k() > 0 {
        iv = iv.max((data.z().tr_mul(&r) / n).amax());
    }
    Ok(kkt_from_residual(data, fit, &r, iv, lambda, alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Coordinate passes (full sweeps and active-set sweeps).
    pub passes: usize,
    pub full_sweeps: usize,
    pub prox_iterations: usize,
    pub objective: f64,
    /// Objective after every pass, starting with the initial point.
    pub objective_history: Vec<f64>,
    pub kkt: KktReport,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub fit: PliableFit,
    pub diagnostics: FitDiagnostics,
}

/// Solver bound to one dataset; group Gram matrices are cached across calls
/// so a path of fits reuses them.
pub struct PliableSolver<'a> {
    data: &'a Dataset,
    config: SolverConfig,
    intercepts: InterceptSolver,
    x_sq_over_n: Vec<f64>,
    grams: Vec<Option<GroupGram>>,
}

impl<'a> PliableSolver<'a> {
    pub fn new(data: &'a Dataset, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let n = data.n() as f64;
        let x_sq_over_n = data
            .x()
            .column_iter()
            .map(|c| c.norm_squared() / n)
            .collect();
        Ok(Self {
            data,
            config,
            intercepts: InterceptSolver::new(data, config.min_norm_intercepts)?,
            x_sq_over_n,
            grams: vec![None; data.p()],
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    fn gram(&mut self, j: usize) -> &GroupGram {
        let data = self.data;
        self.grams[j].get_or_insert_with(|| GroupGram::new(data, j))
    }

    fn loss(&self, r: &DVector<f64>) -> f64 {
        r.norm_squared() / (2.0 * self.data.n() as f64)
    }

    /// Exact minimization over group `j`; `r` is the full residual and is kept current.
    fn update_group(
        &mut self,
        j: usize,
        fit: &mut PliableFit,
        r: &mut DVector<f64>,
        lambda: f64,
    ) -> usize {
        let alpha = self.config.alpha;
        let data = self.data;
        let n = data.n() as f64;
        let k = data.k();
        if self.x_sq_over_n[j] == 0.0 {
            return 0;
        }
        let was_zero = fit.is_group_zero(j);
        let xj = data.x().column(j);

        // r <- r_(-j)
        if !was_zero {
            r.axpy(fit.beta[j], &xj, 1.0);
            if let Some(theta_j) = fit.theta.get(j) {
                *r += xj.component_mul(&(data.z() * theta_j));
            }
        }
        let (a, w) = group_correlations(data, j, r);

        let mut new_beta = None;
        let mut new_theta: Option<DVector<f64>> = None;
        let mut prox_iters = 0;
        if self.config.screening {
            let c = (1.0 - alpha) * lambda;
            let s = soft_vec(&w, alpha * lambda).norm();
            if zero_group_holds(a, s, c) {
                new_beta = Some(0.0);
            } else {
                let bhat = beta_from_correlation(a, self.x_sq_over_n[j], lambda, alpha);
                if bhat != 0.0 {
                    let xx_z = data.z().tr_mul(&xj.component_mul(&xj)) / n;
                    let w_after = &w - xx_z * bhat;
                    if theta_zero_holds(&w_after, lambda, alpha) {
                        new_beta = Some(bhat);
                    }
                }
            }
        }
        if new_beta.is_none() {
            let settings = self.config.prox_settings();
            let start = stack(fit.beta[j], &fit.theta.row(j));
            let b = stack(a, &w);
            let gg = self.gram(j);
            let (g, iters) = solve_group(gg, &b, start, lambda, alpha, settings);
            prox_iters = iters;
            new_beta = Some(g[0]);
            new_theta = Some(g.rows(1, k).into_owned());
        }

        let beta = new_beta.unwrap_or(0.0);
        fit.beta[j] = beta;
        r.axpy(-beta, &xj, 1.0);
        match new_theta {
            Some(theta) if theta.iter().any(|&v| v != 0.0) => {
                *r -= xj.component_mul(&(data.z() * &theta));
                fit.theta.set(j, theta);
            }
            _ => fit.theta.set(j, DVector::zeros(k)),
        }
        prox_iters
    }

    fn kkt(&self, fit: &PliableFit, r: &DVector<f64>, lambda: f64) -> KktReport {
        let iv = self.intercepts.violation(r);
        kkt_from_residual(self.data, fit, r, iv, lambda, self.config.alpha)
    }

    /// Fit at `lambda`, optionally warm-started.
    pub fn fit(&mut self, lambda: f64, warm: Option<&PliableFit>) -> Result<FitOutput> {
        let alpha = self.config.alpha;
        validate_lambda_alpha(lambda, alpha)?;
        let (p, k) = (self.data.p(), self.data.k());
        let mut fit = match warm {
            Some(w) => {
                if w.p() != p || w.k() != k {
                    return Err(PliableError::DimensionMismatch {
                        what: "warm start groups",
                        expected: p,
                        found: w.p(),
                    });
                }
                let mut f = w.clone();
                f.lambda = lambda;
                f.alpha = alpha;
                f
            }
            None => PliableFit::zeros(p, k, lambda, alpha),
        };
        let mut r = residual(self.data, &fit)?;
        let objective = |s: &Self, f: &PliableFit, r: &DVector<f64>| {
            penalty_value(f, s.loss(r), lambda, alpha).total
        };

        let mut history = vec![objective(self, &fit, &r)];
        let mut passes = 0;
        let mut full_sweeps = 0;
        let mut prox_iterations = 0;
        let rel_change = |old: f64, new: f64| (old - new).abs() / new.abs().max(f64::MIN_POSITIVE);

        loop {
            self.intercepts.refresh(&mut fit, &mut r);
            for j in 0..p {
                prox_iterations += self.update_group(j, &mut fit, &mut r, lambda);
            }
            passes += 1;
            full_sweeps += 1;
            let obj = objective(self, &fit, &r);
            let change = rel_change(*history.last().unwrap(), obj);
            history.push(obj);
            if !obj.is_finite() {
                return Err(PliableError::NonFinite("objective"));
            }
            if change < self.config.tol_obj {
                let kkt = self.kkt(&fit, &r, lambda);
                if kkt.max_violation < self.config.tol_kkt {
                    return Ok(FitOutput {
                        fit,
                        diagnostics: FitDiagnostics {
                            passes,
                            full_sweeps,
                            prox_iterations,
                            objective: obj,
                            objective_history: history,
                            kkt,
                        },
                    });
                }
            }
            if passes >= self.config.max_outer_iters {
                let kkt = self.kkt(&fit, &r, lambda);
                return Err(PliableError::NotConverged {
                    lambda,
                    iterations: passes,
                    fit: Box::new(fit),
                    kkt,
                });
            }
            if self.config.active_set {
                let active = fit.active_groups();
                loop {
                    self.intercepts.refresh(&mut fit, &mut r);
                    for &j in &active {
                        prox_iterations += self.update_group(j, &mut fit, &mut r, lambda);
                    }
                    passes += 1;
                    let obj = objective(self, &fit, &r);
                    let change = rel_change(*history.last().unwrap(), obj);
                    history.push(obj);
                    if change < self.config.tol_obj || passes >= self.config.max_outer_iters {
                        break;
                    }
                }
            }
        }
    }
}

/// Fit the pliable lasso at a single `lambda`.
pub fn fit_single_lambda(
    data: &Dataset,
    lambda: f64,
    config: &SolverConfig,
    warm: Option<&PliableFit>,
) -> Result<FitOutput> {
    PliableSolver::new(data, *config)?.fit(lambda, warm)
}
