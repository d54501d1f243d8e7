use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use pliable::inference::{
    bootstrap_df, fit_unknown_z, hte_replicate, pilot_lambda_grid, LambdaChoice, UnknownZConfig,
};
use pliable::io::{fmt_f64, matrix_table, read_table, ModelFile, Selection, TsvTable};
use pliable::{
    default_lambda_min_ratio, fit_path_standardized, fit_path_standardized_on_grid, generate,
    k_fold_cv, predict, Dataset, PathOptions, PathPointDiagnostics, PliableError, PliableFit,
    Result, SimName, SimSpec, SolverConfig, StandardizeOptions,
};

use crate::inputs::{self, Inputs};
use crate::{DataArgs, PathArgs};

fn solver_config(alpha: f64, tol: Option<f64>) -> Result<SolverConfig> {
    let mut config = SolverConfig::default().with_alpha(alpha);
    if let Some(tol) = tol {
        config.tol_obj = tol;
    }
    config.validate()?;
    Ok(config)
}

fn path_options(args: &PathArgs) -> PathOptions {
    PathOptions {
        n_lambda: args.nlambda,
        lambda_min_ratio: args.lambda_min_ratio,
        standardize: if args.no_standardize {
            StandardizeOptions::none()
        } else {
            StandardizeOptions::default()
        },
    }
}

fn emit(table: &TsvTable, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => table.write(p),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(table.render().as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn names_or_dash(names: Vec<&str>) -> String {
    if names.is_empty() {
        "-".to_string()
    } else {
        names.join(",")
    }
}

fn support(fit: &PliableFit, x_names: &[String]) -> (String, String) {
    let beta = fit
        .nonzero_beta()
        .into_iter()
        .map(|j| x_names[j].as_str())
        .collect();
    let theta = fit
        .theta
        .active_rows()
        .into_iter()
        .map(|j| x_names[j].as_str())
        .collect();
    (names_or_dash(beta), names_or_dash(theta))
}

fn path_table(
    inv: &str,
    inputs: &Inputs,
    fits: &[PliableFit],
    diagnostics: &[PathPointDiagnostics],
) -> Result<TsvTable> {
    let mut t = TsvTable::new(
        inv,
        &[
            "index",
            "lambda",
            "n_beta",
            "n_theta",
            "beta_support",
            "theta_rows",
            "train_mse",
            "objective",
            "kkt_max",
            "passes",
        ],
    );
    let data = &inputs.data;
    for (i, (fit, d)) in fits.iter().zip(diagnostics).enumerate() {
        let yhat = predict(fit, data.x(), data.z())?;
        let mse = (data.y() - yhat).norm_squared() / data.n() as f64;
        let (beta, theta) = support(fit, &inputs.x_names);
        t.push(vec![
            i.to_string(),
            fmt_f64(fit.lambda),
            fit.n_nonzero_beta().to_string(),
            fit.theta.nnz().to_string(),
            beta,
            theta,
            fmt_f64(mse),
            fmt_f64(d.objective),
            fmt_f64(d.kkt_max_violation),
            d.passes.to_string(),
        ]);
    }
    Ok(t)
}

pub fn fit(
    inv: &str,
    data: &DataArgs,
    path: &PathArgs,
    out: &Path,
    table: Option<&Path>,
) -> Result<()> {
    let inputs = inputs::load(data)?;
    let config = solver_config(path.alpha, path.tol)?;
    let fitted = fit_path_standardized(&inputs.data, &config, &path_options(path))?;
    let fits = fitted.raw_fits()?;
    let model = ModelFile::new(
        config.alpha,
        inputs.x_names.clone(),
        inputs.z_names.clone(),
        &fitted.map,
        &fits,
        fitted.path.diagnostics.clone(),
    );
    model.save(out)?;
    emit(
        &path_table(inv, &inputs, &fits, &fitted.path.diagnostics)?,
        table,
    )
}

pub fn cv(
    inv: &str,
    data: &DataArgs,
    path: &PathArgs,
    folds: usize,
    seed: u64,
    out: Option<&Path>,
    table: Option<&Path>,
) -> Result<()> {
    let inputs = inputs::load(data)?;
    let config = solver_config(path.alpha, path.tol)?;
    let options = path_options(path);
    let cv = k_fold_cv(&inputs.data, &config, &options, folds, seed)?;
    let fitted =
        fit_path_standardized_on_grid(&inputs.data, &config, options.standardize, &cv.lambdas)?;
    let fits = fitted.raw_fits()?;

    let mut t = TsvTable::new(
        inv,
        &[
            "index",
            "lambda",
            "cv_mean",
            "cv_se",
            "n_beta",
            "n_theta",
            "beta_support",
            "theta_rows",
        ],
    );
    t.comment(format!(
        "idx_min\t{}\tlambda_min\t{}",
        cv.idx_min,
        cv.lambda_min()
    ));
    t.comment(format!(
        "idx_1se\t{}\tlambda_1se\t{}",
        cv.idx_1se,
        cv.lambda_1se()
    ));
    for (i, fit) in fits.iter().enumerate() {
        let (beta, theta) = support(fit, &inputs.x_names);
        t.push(vec![
            i.to_string(),
            fmt_f64(cv.lambdas[i]),
            fmt_f64(cv.cv_mean[i]),
            fmt_f64(cv.cv_se[i]),
            fit.n_nonzero_beta().to_string(),
            fit.theta.nnz().to_string(),
            beta,
            theta,
        ]);
    }
    if let Some(out) = out {
        let mut model = ModelFile::new(
            config.alpha,
            inputs.x_names.clone(),
            inputs.z_names.clone(),
            &fitted.map,
            &fits,
            fitted.path.diagnostics.clone(),
        );
        model.selection = Some(Selection {
            folds,
            seed,
            idx_min: cv.idx_min,
            idx_1se: cv.idx_1se,
        });
        model.save(out)?;
    }
    emit(&t, table)
}

pub fn predict_cmd(
    inv: &str,
    model: &Path,
    data: &Path,
    z_file: Option<&Path>,
    index: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let model = ModelFile::load(model)?;
    let index = index.unwrap_or_else(|| model.default_index());
    let fit = model.fit(index)?;
    let (x, z) = inputs::load_for_model(data, z_file, &model.x_names, &model.z_names)?;
    let yhat = predict(&fit, &x, &z)?;
    let mut t = TsvTable::new(inv, &["yhat"]);
    t.comment(format!("index\t{index}\tlambda\t{}", fit.lambda));
    for v in yhat.iter() {
        t.push(vec![fmt_f64(*v)]);
    }
    emit(&t, out)
}

fn column_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn dataset_matrix(data: &Dataset) -> DMatrix<f64> {
    let (n, p, k) = (data.n(), data.p(), data.k());
    let mut m = DMatrix::zeros(n, 1 + p + k);
    m.column_mut(0).copy_from(data.y());
    m.columns_mut(1, p).copy_from(data.x());
    m.columns_mut(1 + p, k).copy_from(data.z());
    m
}

pub fn simulate(
    inv: &str,
    spec: &str,
    seed: u64,
    out_dir: &Path,
    n: Option<usize>,
    p: Option<usize>,
) -> Result<()> {
    let name: SimName = spec.parse()?;
    let mut spec = SimSpec::new(name, seed);
    spec = spec.with_dims(n.unwrap_or(spec.n), p.unwrap_or(spec.p));
    let sim = generate(&spec)?;
    std::fs::create_dir_all(out_dir)?;

    let mut names = vec!["y".to_string()];
    names.extend(column_names("x", spec.p));
    names.extend(column_names("z", spec.k));
    for (file, split) in [("train.tsv", &sim.train), ("test.tsv", &sim.test)] {
        let mut t = matrix_table(inv, &names, &dataset_matrix(&split.data));
        t.comment(format!(
            "spec\t{}\tseed\t{}\tnoise_sd\t{}",
            spec.name, spec.seed, spec.noise_sd
        ));
        t.write(&out_dir.join(file))?;
    }

    let mut header = vec!["split", "row", "mean"];
    let extras: [(&str, fn(&pliable::Split) -> Option<&nalgebra::DVector<f64>>); 3] = [
        ("effect", |s| s.effect.as_ref()),
        ("latent", |s| s.latent.as_ref()),
        ("class_prob", |s| s.class_prob.as_ref()),
    ];
    let present: Vec<_> = extras
        .iter()
        .filter(|(_, get)| get(&sim.train).is_some())
        .collect();
    header.extend(present.iter().map(|(h, _)| *h));
    let mut t = TsvTable::new(inv, &header);
    t.comment(format!("snr\t{}", sim.snr()));
    if let Some(b) = &sim.class_direction {
        let list: Vec<String> = b.iter().map(|&v| fmt_f64(v)).collect();
        t.comment(format!("class_direction\t{}", list.join(",")));
    }
    for (label, split) in [("train", &sim.train), ("test", &sim.test)] {
        for i in 0..split.mean.len() {
            let mut row = vec![label.to_string(), i.to_string(), fmt_f64(split.mean[i])];
            row.extend(
                present
                    .iter()
                    .map(|(_, get)| fmt_f64(get(split).unwrap()[i])),
            );
            t.push(row);
        }
    }
    t.write(&out_dir.join("truth.tsv"))
}

pub struct DfArgs {
    pub spec: String,
    pub b: usize,
    pub sigma: Option<f64>,
    pub seed: u64,
    pub p: Option<usize>,
    pub alpha: f64,
    pub nlambda: usize,
    pub lambda_min_ratio: Option<f64>,
}

pub fn df(inv: &str, args: &DfArgs, out: Option<&Path>) -> Result<()> {
    let name: SimName = args.spec.parse()?;
    let mut spec = SimSpec::new(name, args.seed);
    spec = spec.with_dims(spec.n, args.p.unwrap_or(spec.p));
    let sigma = args.sigma.unwrap_or(spec.noise_sd);
    let sim = generate(&spec)?;
    let config = solver_config(args.alpha, None)?;
    let (x, z, mu) = (sim.train.data.x(), sim.train.data.z(), &sim.train.mean);
    let ratio = args
        .lambda_min_ratio
        .unwrap_or_else(|| default_lambda_min_ratio(spec.n, spec.p, spec.k));
    let grid = pilot_lambda_grid(mu, sigma, x, z, &config, args.nlambda, ratio, args.seed)?;
    let est = bootstrap_df(mu, sigma, x, z, &grid, &config, args.b, args.seed)?;
    let mut t = TsvTable::new(
        inv,
        &[
            "index",
            "lambda",
            "df_cov",
            "n_nonzero_beta",
            "n_nonzero_all",
        ],
    );
    for i in 0..est.lambdas.len() {
        t.push(vec![
            i.to_string(),
            fmt_f64(est.lambdas[i]),
            fmt_f64(est.df_cov[i]),
            fmt_f64(est.n_nonzero_beta[i]),
            fmt_f64(est.n_nonzero_all[i]),
        ]);
    }
    emit(&t, out)
}

pub struct UnknownzArgs {
    pub data: PathBuf,
    pub response: String,
    pub lambda2: Option<f64>,
    pub cycles: usize,
    pub lambda: Option<f64>,
    pub cv_each_cycle: bool,
    pub folds: usize,
    pub seed: u64,
    pub alpha: f64,
}

pub fn unknownz(inv: &str, args: &UnknownzArgs, out: Option<&Path>) -> Result<()> {
    let table = read_table(&args.data)?;
    let y = table.column(&args.response)?;
    let (x_names, x) = table.without(std::slice::from_ref(&args.response));
    let data = Dataset::without_modifiers(y, x)?;
    let config = UnknownZConfig {
        lambda2: args.lambda2,
        n_cycles: args.cycles,
        lambda: match (args.lambda, args.cv_each_cycle) {
            (Some(l), _) => LambdaChoice::Fixed(l),
            (None, true) => LambdaChoice::CvMin {
                folds: args.folds,
                seed: args.seed,
            },
            (None, false) => LambdaChoice::CvAlternation {
                folds: args.folds,
                seed: args.seed,
            },
        },
        ..UnknownZConfig::default()
    };
    let fitted = fit_unknown_z(&data, &config, &solver_config(args.alpha, None)?)?;
    let mut t = TsvTable::new(inv, &["column", "gamma", "beta_std", "theta_std"]);
    for (i, c) in fitted.cycles.iter().enumerate() {
        t.comment(format!(
            "cycle\t{i}\tlambda\t{}\tlambda2\t{}\tobjective_after_fit\t{}\tobjective_after_ridge\t{}\tridge_skipped\t{}",
            c.lambda, c.lambda2, c.objective_after_fit, c.objective_after_ridge, c.ridge_skipped
        ));
    }
    let gamma = fitted.gamma_raw();
    let fit = &fitted.fit;
    for (j, name) in x_names.iter().enumerate() {
        t.push(vec![
            name.clone(),
            fmt_f64(gamma[j]),
            fmt_f64(fit.beta[j]),
            fmt_f64(fit.theta.get(j).map_or(0.0, |r| r[0])),
        ]);
    }
    emit(&t, out)
}

pub fn hte(
    inv: &str,
    scenario: &str,
    seed: u64,
    reps: usize,
    alpha: f64,
    out: Option<&Path>,
) -> Result<()> {
    let name = match scenario {
        "a" => SimName::HteA,
        "b" => SimName::HteB,
        "c" => SimName::HteC,
        other => {
            return Err(PliableError::Unknown {
                what: "simulation spec",
                name: other.to_string(),
            })
        }
    };
    let config = solver_config(alpha, None)?;
    let mut t = TsvTable::new(inv, &["seed", "lambda", "r2", "effect_mse"]);
    let mut r2s = Vec::with_capacity(reps);
    for s in seed..seed + reps as u64 {
        let r = hte_replicate(name, s, &config)?;
        r2s.push(r.r2);
        t.push(vec![
            r.seed.to_string(),
            fmt_f64(r.lambda),
            fmt_f64(r.r2),
            fmt_f64(r.effect_mse),
        ]);
    }
    r2s.sort_by(f64::total_cmp);
    if let Some(m) = median(&r2s) {
        t.comment(format!("median_r2\t{m}"));
    }
    emit(&t, out)
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}
