mod common;

use pliable::io::{matrix_table, parse_table, read_table, ModelFile, Selection, TsvTable};
use pliable::{fit_path_standardized, predict, PathOptions, SolverConfig, StandardizationMap};
use proptest::prelude::*;

use common::{normal_matrix, random_dataset, random_fit, rng};

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

#[test]
fn saved_path_predicts_like_the_fitted_one() {
    let data = random_dataset(1, 60, 6, 2);
    let fitted = fit_path_standardized(
        &data,
        &SolverConfig::default(),
        &PathOptions {
            n_lambda: 8,
            ..Default::default()
        },
    )
    .unwrap();
    let fits = fitted.raw_fits().unwrap();
    let mut file = ModelFile::new(
        0.5,
        names("x", 6),
        names("z", 2),
        &fitted.map,
        &fits,
        fitted.path.diagnostics.clone(),
    );
    file.selection = Some(Selection {
        folds: 5,
        seed: 3,
        idx_min: 4,
        idx_1se: 2,
    });

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    file.save(&path).unwrap();
    let back = ModelFile::load(&path).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.default_index(), 4);
    for (i, fit) in fits.iter().enumerate() {
        let a = predict(fit, data.x(), data.z()).unwrap();
        let b = predict(&back.fit(i).unwrap(), data.x(), data.z()).unwrap();
        assert!((a - b).amax() <= 1e-12);
    }
    assert!(back.fit(8).is_err());
}

#[test]
fn missing_file_error_names_the_path() {
    let err = ModelFile::load(std::path::Path::new("/nonexistent/model.json")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/model.json"), "{err}");
}

#[test]
fn written_table_reads_back() {
    let m = normal_matrix(&mut rng(4), 7, 3);
    let table = matrix_table("pliable test --flag", &names("c", 3), &m);
    let text = table.render();
    assert!(text.starts_with("# pliable test --flag\n"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.tsv");
    table.write(&path).unwrap();
    let back = read_table(&path).unwrap();
    assert_eq!(back.names, names("c", 3));
    assert!((back.values - m).amax() <= 1e-15 * 10.0);
}

#[test]
fn comments_and_headers() {
    let mut t = TsvTable::new("inv", &["a", "b"]);
    t.comment("note\t1");
    t.push(vec!["1".into(), "2".into()]);
    assert_eq!(t.render(), "# inv\n# note\t1\na\tb\n1\t2\n");
    let parsed = parse_table(&t.render()).unwrap();
    assert_eq!(parsed.n_rows(), 1);
    assert_eq!(parsed.column("b").unwrap()[0], 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn model_file_round_trip_preserves_predictions(seed in any::<u64>(), density in 0.0f64..1.0) {
        let mut r = rng(seed);
        let (p, k) = (5, 3);
        let fits: Vec<_> = (0..3).map(|_| random_fit(&mut r, p, k, density)).collect();
        let file = ModelFile::new(0.5, names("x", p), names("z", k), &StandardizationMap::identity(p, k), &fits, vec![]);
        let back = ModelFile::from_json(&file.to_json().unwrap()).unwrap();
        let x = normal_matrix(&mut r, 20, p);
        let z = normal_matrix(&mut r, 20, k);
        for (i, fit) in fits.iter().enumerate() {
            let a = predict(fit, &x, &z).unwrap();
            let b = predict(&back.fit(i).unwrap(), &x, &z).unwrap();
            prop_assert!((&a - &b).amax() <= 1e-12 * (1.0 + a.amax()));
        }
    }
}
