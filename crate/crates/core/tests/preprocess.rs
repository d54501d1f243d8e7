mod common;

use nalgebra::{DMatrix, DVector};
use pliable::{
    destandardize_fit, fit_path_standardized, predict, standardize, Dataset, PathOptions,
    PliableError, SolverConfig, StandardizeOptions,
};
use proptest::prelude::*;

use common::{normal_matrix, random_dataset, random_fit, rng};

fn shifted(seed: u64) -> Dataset {
    let data = random_dataset(seed, 40, 6, 3);
    let x = data.x().map(|v| 3.0 * v + 1.5);
    let z = data.z().map(|v| 0.2 * v - 4.0);
    Dataset::new(data.y().add_scalar(10.0), x, z).unwrap()
}

#[test]
fn two_point_column_maps_to_plus_minus_one() {
    let data = Dataset::new(
        DVector::from_vec(vec![1.0, 3.0]),
        DMatrix::from_column_slice(2, 1, &[0.0, 2.0]),
        DMatrix::from_column_slice(2, 1, &[5.0, 7.0]),
    )
    .unwrap();
    let (std, map) = standardize(&data, StandardizeOptions::default()).unwrap();
    assert_eq!(std.x().as_slice(), &[-1.0, 1.0]);
    assert_eq!(std.z().as_slice(), &[-1.0, 1.0]);
    assert_eq!(std.y().as_slice(), &[-1.0, 1.0]);
    assert_eq!(map.y_mean, 2.0);
}

#[test]
fn constant_column_is_named() {
    let mut x = normal_matrix(&mut rng(1), 10, 3);
    x.column_mut(2).fill(4.0);
    let data = Dataset::new(DVector::zeros(10), x, normal_matrix(&mut rng(2), 10, 1)).unwrap();
    let err = standardize(&data, StandardizeOptions::default()).unwrap_err();
    assert!(
        matches!(
            err,
            PliableError::ConstantColumn {
                block: "X",
                index: 2
            }
        ),
        "{err}"
    );
    assert!(standardize(
        &data,
        StandardizeOptions {
            x: false,
            ..Default::default()
        }
    )
    .is_ok());
}

#[test]
fn standardized_input_is_a_fixed_point() {
    let (once, _) = standardize(&shifted(3), StandardizeOptions::default()).unwrap();
    let (twice, map) = standardize(&once, StandardizeOptions::default()).unwrap();
    assert!(map.x_means.amax() < 1e-12 && (map.x_scales.add_scalar(-1.0)).amax() < 1e-12);
    assert!((once.x() - twice.x()).amax() < 1e-12);
    assert!((once.z() - twice.z()).amax() < 1e-12);
}

#[test]
fn fitted_path_predicts_identically_on_both_scales() {
    let raw = shifted(4);
    let fitted = fit_path_standardized(
        &raw,
        &SolverConfig::default(),
        &PathOptions {
            n_lambda: 10,
            ..Default::default()
        },
    )
    .unwrap();
    let std = fitted.map.apply_dataset(&raw).unwrap();
    for i in 0..10 {
        let a = predict(&fitted.raw_fit(i).unwrap(), raw.x(), raw.z()).unwrap();
        let b = predict(&fitted.path.fits[i], std.x(), std.z())
            .unwrap()
            .add_scalar(fitted.map.y_mean);
        assert!((a - b).amax() <= 1e-10);
    }
}

#[test]
fn rescaling_a_column_leaves_predictions_unchanged() {
    let raw = random_dataset(12, 80, 8, 2);
    let mut x = raw.x().clone();
    x.column_mut(1).scale_mut(7.5);
    x.column_mut(4).scale_mut(0.01);
    let scaled = Dataset::new(raw.y().clone(), x, raw.z().clone()).unwrap();

    let (a, _) = standardize(&raw, StandardizeOptions::default()).unwrap();
    let (b, _) = standardize(&scaled, StandardizeOptions::default()).unwrap();
    assert!((a.x() - b.x()).amax() <= 1e-12);

    let config = SolverConfig::default().precise();
    let options = PathOptions {
        n_lambda: 12,
        ..Default::default()
    };
    let fa = fit_path_standardized(&raw, &config, &options).unwrap();
    let fb = fit_path_standardized(&scaled, &config, &options).unwrap();
    for i in 0..12 {
        let pa = predict(&fa.raw_fit(i).unwrap(), raw.x(), raw.z()).unwrap();
        let pb = predict(&fb.raw_fit(i).unwrap(), scaled.x(), scaled.z()).unwrap();
        assert!((pa - pb).amax() <= 1e-6, "lambda index {i}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_then_inverse_is_identity(seed in any::<u64>()) {
        let raw = shifted(seed);
        let (std, map) = standardize(&raw, StandardizeOptions::default()).unwrap();
        let back = map.invert_dataset(&std).unwrap();
        prop_assert!((back.x() - raw.x()).amax() <= 1e-12 * (1.0 + raw.x().amax()));
        prop_assert!((back.z() - raw.z()).amax() <= 1e-12 * (1.0 + raw.z().amax()));
        prop_assert!((back.y() - raw.y()).amax() <= 1e-12 * (1.0 + raw.y().amax()));
    }

    #[test]
    fn destandardized_fit_predicts_like_the_original(seed in any::<u64>()) {
        let raw = shifted(seed);
        let (std, map) = standardize(&raw, StandardizeOptions::default()).unwrap();
        let fit = random_fit(&mut rng(seed ^ 7), 6, 3, 0.7);
        let on_raw = predict(&destandardize_fit(&fit, &map).unwrap(), raw.x(), raw.z()).unwrap();
        let on_std = predict(&fit, std.x(), std.z()).unwrap().add_scalar(map.y_mean);
        prop_assert!((on_raw - on_std).amax() <= 1e-10);
    }
}
