mod common;

use nalgebra::{DMatrix, DVector};
use pliable::{
    check_kkt, fit_path, fit_path_on_grid, fit_single_lambda, lambda_grid, lambda_max, residual,
    standardize, Dataset, PliableError, SolverConfig, StandardizeOptions,
};
use proptest::prelude::*;

use common::{lasso_cd, normal_matrix, normal_vector, random_dataset, rng, support};

fn standardized(seed: u64, n: usize, p: usize, k: usize) -> Dataset {
    standardize(
        &random_dataset(seed, n, p, k),
        StandardizeOptions::default(),
    )
    .unwrap()
    .0
}

#[test]
fn intercepts_leave_residual_orthogonal_to_one_and_z() {
    for seed in 0..5 {
        let data = random_dataset(seed, 60, 8, 3);
        let config = SolverConfig::default().precise();
        let lmax = lambda_max(&data, config.alpha).unwrap();
        let out = fit_single_lambda(&data, 0.3 * lmax, &config, None).unwrap();
        let r = residual(&data, &out.fit).unwrap();
        assert!(r.sum().abs() / 60.0 < 1e-9);
        assert!((data.z().tr_mul(&r) / 60.0).amax() < 1e-9);
    }
}

#[test]
fn path_fits_satisfy_subgradient_equations() {
    for seed in 0..5 {
        let data = standardized(seed, 80, 20, 3);
        let config = SolverConfig::default();
        let path = fit_path(&data, &config, 20, 0.05).unwrap();
        for (fit, &lambda) in path.fits.iter().zip(&path.lambdas) {
            let kkt = check_kkt(fit, &data, lambda, config.alpha).unwrap();
            assert!(
                kkt.max_violation <= 1e-4,
                "seed {seed} lambda {lambda}: {}",
                kkt.max_violation
            );
        }
    }
}

#[test]
fn screening_does_not_change_supports() {
    for seed in 0..5 {
        let data = standardized(seed + 40, 60, 15, 2);
        let on = SolverConfig::default().precise();
        let off = SolverConfig {
            screening: false,
            ..on
        };
        let lmax = lambda_max(&data, on.alpha).unwrap();
        let grid = lambda_grid(lmax, 15, 0.05).unwrap();
        let a = fit_path_on_grid(&data, &on, &grid).unwrap();
        let b = fit_path_on_grid(&data, &off, &grid).unwrap();
        for (fa, fb) in a.fits.iter().zip(&b.fits) {
            assert_eq!(support(fa), support(fb), "seed {seed} lambda {}", fa.lambda);
        }
    }
}

fn lasso_reduction(k: usize, min_norm: bool) {
    let mut r = rng(11);
    let (n, p) = (80, 30);
    let x = normal_matrix(&mut r, n, p);
    let mut y = normal_vector(&mut r, n);
    for j in 0..5 {
        y.axpy(2.0 - j as f64 * 0.7, &x.column(j), 1.0);
    }
    let data = Dataset::new(y.clone(), x.clone(), DMatrix::zeros(n, k)).unwrap();
    let config = SolverConfig {
        min_norm_intercepts: min_norm,
        ..SolverConfig::default().precise()
    };
    let path = fit_path(&data, &config, 20, 0.01).unwrap();
    let mut warm: Option<Vec<f64>> = None;
    for fit in &path.fits {
        let (b0, beta) = lasso_cd(&x, &y, (1.0 - config.alpha) * fit.lambda, warm.as_deref());
        for j in 0..p {
            assert!(
                (fit.beta[j] - beta[j]).abs() <= 1e-6,
                "lambda {} j {j}",
                fit.lambda
            );
        }
        assert!((fit.beta0 - b0).abs() <= 1e-6);
        assert_eq!(fit.theta.nnz(), 0);
        warm = Some(beta);
    }
}

#[test]
fn reduces_to_lasso_without_modifiers() {
    lasso_reduction(0, false);
}

#[test]
fn reduces_to_lasso_with_zero_modifiers() {
    lasso_reduction(2, true);
}

#[test]
fn zero_modifiers_need_min_norm_intercepts() {
    let data = Dataset::new(
        DVector::from_element(5, 1.0),
        DMatrix::identity(5, 2),
        DMatrix::zeros(5, 1),
    )
    .unwrap();
    let err = fit_single_lambda(&data, 0.1, &SolverConfig::default(), None).unwrap_err();
    assert!(matches!(err, PliableError::RankDeficient));
}

#[test]
fn lambda_max_brackets_the_empty_model() {
    for seed in 0..10 {
        let data = standardized(seed, 50, 10, 2);
        let config = SolverConfig::default().precise();
        let lmax = lambda_max(&data, config.alpha).unwrap();
        let above = fit_single_lambda(&data, 1.01 * lmax, &config, None).unwrap();
        assert!(above.fit.active_groups().is_empty(), "seed {seed}");
        let below = fit_single_lambda(&data, 0.95 * lmax, &config, None).unwrap();
        assert!(!below.fit.active_groups().is_empty(), "seed {seed}");
    }
}

#[test]
fn lambda_max_is_sharp_for_the_lasso() {
    let data = standardized(3, 50, 10, 0);
    let config = SolverConfig::default().precise();
    let lmax = lambda_max(&data, config.alpha).unwrap();
    assert!(fit_single_lambda(&data, 1.001 * lmax, &config, None)
        .unwrap()
        .fit
        .active_groups()
        .is_empty());
    assert!(!fit_single_lambda(&data, 0.999 * lmax, &config, None)
        .unwrap()
        .fit
        .active_groups()
        .is_empty());
}

#[test]
fn warm_and_cold_starts_agree() {
    for seed in 0..5 {
        // N well above p(K+1) so the solution is unique.
        let data = standardized(seed + 7, 120, 10, 2);
        let config = SolverConfig::default().precise();
        let path = fit_path(&data, &config, 15, 0.01).unwrap();
        for warm in &path.fits {
            let cold = fit_single_lambda(&data, warm.lambda, &config, None)
                .unwrap()
                .fit;
            assert!((&warm.beta - &cold.beta).amax() <= 1e-6);
            assert!((warm.theta.to_dense() - cold.theta.to_dense()).amax() <= 1e-6);
            assert!((warm.beta0 - cold.beta0).abs() <= 1e-6);
        }
    }
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let data = standardized(1, 60, 10, 2);
    let config = SolverConfig {
        max_outer_iters: 1,
        ..SolverConfig::default().precise()
    };
    let lmax = lambda_max(&data, config.alpha).unwrap();
    let err = fit_single_lambda(&data, 0.05 * lmax, &config, None).unwrap_err();
    assert!(err.is_convergence_failure());
    match err {
        PliableError::NotConverged { fit, .. } => assert_eq!(fit.p(), 10),
        other => panic!("unexpected {other}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn objective_never_increases_across_passes(seed in any::<u64>(), frac in 0.05f64..0.9, nesterov in any::<bool>()) {
        let data = standardized(seed, 50, 12, 2);
        let config = SolverConfig { nesterov, ..SolverConfig::default() };
        let lmax = lambda_max(&data, config.alpha).unwrap();
        let out = fit_single_lambda(&data, frac * lmax, &config, None).unwrap();
        for w in out.diagnostics.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn interactions_only_with_main_effects(seed in any::<u64>(), frac in 0.02f64..0.9, alpha in 0.0f64..0.95) {
        let data = standardized(seed, 40, 15, 3);
        let config = SolverConfig::default().with_alpha(alpha);
        let lmax = lambda_max(&data, alpha).unwrap();
        let out = fit_single_lambda(&data, frac * lmax, &config, None).unwrap();
        prop_assert!(out.fit.hierarchy_violations().is_empty());
    }
}
