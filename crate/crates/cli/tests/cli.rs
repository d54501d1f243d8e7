use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pliable::io::{read_table, ModelFile};
use pliable::predict;

fn pliable(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pliable"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn pliable")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pliable(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Data rows of a rendered table, split on tabs, header first.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

fn simulate_example(dir: &Path) {
    ok(
        dir,
        &[
            "simulate",
            "--spec",
            "example1",
            "--seed",
            "1",
            "--out-dir",
            ".",
        ],
    );
}

#[test]
fn cv_selects_the_true_modifier_rows() {
    let dir = tempfile::tempdir().unwrap();
    simulate_example(dir.path());
    ok(
        dir.path(),
        &[
            "cv",
            "--data",
            "train.tsv",
            "--z-cols",
            "z1",
            "--out",
            "cv.json",
            "--table",
            "cv.tsv",
        ],
    );
    let text = fs::read_to_string(dir.path().join("cv.tsv")).unwrap();
    let idx_min: usize = text
        .lines()
        .find_map(|l| l.strip_prefix("# idx_min\t"))
        .and_then(|rest| rest.split('\t').next())
        .unwrap()
        .parse()
        .unwrap();
    let table = rows(&text);
    let col = table[0].iter().position(|h| h == "theta_rows").unwrap();
    let selected = &table[idx_min + 1][col];
    let names: Vec<&str> = selected.split(',').collect();
    assert!(names.contains(&"x2") && names.contains(&"x3"), "{selected}");
}

#[test]
fn predictions_round_trip_through_the_model_file() {
    let dir = tempfile::tempdir().unwrap();
    simulate_example(dir.path());
    ok(
        dir.path(),
        &[
            "fit",
            "--data",
            "train.tsv",
            "--z-cols",
            "z1",
            "--out",
            "m.json",
            "--table",
            "fit.tsv",
        ],
    );
    for index in ["0", "20", "49"] {
        let out = ok(
            dir.path(),
            &[
                "predict", "--model", "m.json", "--data", "test.tsv", "--index", index,
            ],
        );
        let got: Vec<f64> = rows(&out)[1..]
            .iter()
            .map(|r| r[0].parse().unwrap())
            .collect();

        let model = ModelFile::load(&dir.path().join("m.json")).unwrap();
        let fit = model.fit(index.parse().unwrap()).unwrap();
        let test = read_table(&dir.path().join("test.tsv")).unwrap();
        let x = test.select(&model.x_names).unwrap();
        let z = test.select(&model.z_names).unwrap();
        let want = predict(&fit, &x, &z).unwrap();
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-10 * (1.0 + w.abs()), "{g} vs {w}");
        }
    }
}

#[test]
fn single_lambda_path_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    simulate_example(dir.path());
    let out = ok(
        dir.path(),
        &[
            "fit",
            "--data",
            "train.tsv",
            "--z-cols",
            "z1",
            "--nlambda",
            "1",
            "--out",
            "m.json",
        ],
    );
    let table = rows(&out);
    assert_eq!(table.len(), 2);
    let header = &table[0];
    let at = |name: &str| &table[1][header.iter().position(|h| h == name).unwrap()];
    assert_eq!(at("n_beta"), "0");
    assert_eq!(at("n_theta"), "0");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        simulate_example(dir.path());
        ok(
            dir.path(),
            &[
                "cv",
                "--data",
                "train.tsv",
                "--z-cols",
                "z1",
                "--nlambda",
                "15",
                "--out",
                "cv.json",
                "--table",
                "cv.tsv",
            ],
        );
        let pred = ok(
            dir.path(),
            &["predict", "--model", "cv.json", "--data", "test.tsv"],
        );
        let files: Vec<Vec<u8>> = ["train.tsv", "test.tsv", "truth.tsv", "cv.json", "cv.tsv"]
            .iter()
            .map(|f| fs::read(dir.path().join(f)).unwrap())
            .collect();
        (files, pred)
    };
    assert_eq!(run(), run());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = pliable(dir.path(), &["fit", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let out = pliable(
        dir.path(),
        &["simulate", "--spec", "no_such_spec", "--out-dir", "."],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_two_and_locate_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = pliable(
        dir.path(),
        &["fit", "--data", "missing.tsv", "--out", "m.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.tsv"));

    fs::write(
        dir.path().join("bad.tsv"),
        "y\tx1\tx2\n1\t2\t3\n4\tfive\t6\n",
    )
    .unwrap();
    let out = pliable(dir.path(), &["fit", "--data", "bad.tsv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("line") && err.contains("column"), "{err}");
}

#[test]
fn unknown_modifier_fit_runs() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "--spec",
            "unknown_z",
            "--seed",
            "3",
            "--out-dir",
            ".",
        ],
    );
    let out = ok(
        dir.path(),
        &[
            "unknownz",
            "--data",
            "train.tsv",
            "--lambda",
            "0.1",
            "--cycles",
            "2",
        ],
    );
    assert!(!rows(&out).is_empty());
}
