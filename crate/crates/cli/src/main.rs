use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod inputs;

use pliable::PliableError;

#[derive(Debug, Parser)]
#[command(
    name = "pliable",
    version,
    about = "Pliable lasso fitting, cross-validation and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Delimited table with a header row holding the response and predictors.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Separate table of modifier columns, row-aligned with --data.
    #[arg(long, conflicts_with = "z_cols")]
    pub z_file: Option<PathBuf>,
    /// Comma-separated names of modifier columns inside --data.
    #[arg(long, value_delimiter = ',')]
    pub z_cols: Vec<String>,
    /// Keep --z-cols among the predictors as well.
    #[arg(long, requires = "z_cols")]
    pub keep_z_in_x: bool,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = pliable::DEFAULT_N_LAMBDA)]
    pub nlambda: usize,
    /// Defaults to 0.01 when N > p(K+1), else 0.05.
    #[arg(long)]
    pub lambda_min_ratio: Option<f64>,
    #[arg(long)]
    pub no_standardize: bool,
    /// Relative objective tolerance of the solver.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the regularization path and save a model file.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        path: PathArgs,
        /// Unused by the path fit, which draws no random numbers.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Path-metrics table; stdout when omitted.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Cross-validate the path and report the selected lambda.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        path: PathArgs,
        #[arg(long, default_value_t = pliable::DEFAULT_FOLDS)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model file with the CV selection recorded.
        #[arg(long)]
        out: Option<PathBuf>,
        /// CV table; stdout when omitted.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Predict from a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Table holding the model's predictor columns (and modifier columns unless --z-file).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        z_file: Option<PathBuf>,
        /// Model index; defaults to the CV minimum if recorded, else the last lambda.
        #[arg(long)]
        index: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write train, test and truth tables for a named simulation.
    Simulate {
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
    },
    /// Bootstrap degrees of freedom along the path.
    Df {
        #[arg(long, default_value = "df_null")]
        spec: String,
        #[arg(long = "B", default_value_t = 200)]
        b: usize,
        /// Noise level; defaults to the spec's.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 20)]
        nlambda: usize,
        #[arg(long)]
        lambda_min_ratio: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate an unobserved modifier Z = X gamma by alternating fits.
    Unknownz {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "y")]
        response: String,
        /// Ridge penalty on gamma; defaults to 1e-3 tr(W'W/N)/p.
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long, default_value_t = 2)]
        cycles: usize,
        /// Fixed lambda; when omitted, one lambda is chosen by cross-validating the whole alternation.
        #[arg(long)]
        lambda: Option<f64>,
        /// Re-select lambda by CV for the current Z in every cycle instead.
        #[arg(long, conflicts_with = "lambda")]
        cv_each_cycle: bool,
        #[arg(long, default_value_t = pliable::DEFAULT_FOLDS)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Treatment-effect simulation replicates.
    Hte {
        #[arg(long, value_parser = ["a", "b", "c"])]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn invocation() -> String {
    let mut parts = vec!["pliable".to_string()];
    parts.extend(std::env::args().skip(1));
    parts.join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let inv = invocation();
    let result = match cli.command {
        Command::Fit {
            data,
            path,
            seed: _,
            out,
            table,
        } => commands::fit(&inv, &data, &path, &out, table.as_deref()),
        Command::Cv {
            data,
            path,
            folds,
            seed,
            out,
            table,
        } => commands::cv(
            &inv,
            &data,
            &path,
            folds,
            seed,
            out.as_deref(),
            table.as_deref(),
        ),
        Command::Predict {
            model,
            data,
            z_file,
            index,
            out,
        } => commands::predict_cmd(
            &inv,
            &model,
            &data,
            z_file.as_deref(),
            index,
            out.as_deref(),
        ),
        Command::Simulate {
            spec,
            seed,
            out_dir,
            n,
            p,
        } => commands::simulate(&inv, &spec, seed, &out_dir, n, p),
        Command::Df {
            spec,
            b,
            sigma,
            seed,
            p,
            alpha,
            nlambda,
            lambda_min_ratio,
            out,
        } => commands::df(
            &inv,
            &commands::DfArgs {
                spec,
                b,
                sigma,
                seed,
                p,
                alpha,
                nlambda,
                lambda_min_ratio,
            },
            out.as_deref(),
        ),
        Command::Unknownz {
            data,
            response,
            lambda2,
            cycles,
            lambda,
            cv_each_cycle,
            folds,
            seed,
            alpha,
            out,
        } => commands::unknownz(
            &inv,
            &commands::UnknownzArgs {
                data,
                response,
                lambda2,
                cycles,
                lambda,
                cv_each_cycle,
                folds,
                seed,
                alpha,
            },
            out.as_deref(),
        ),
        Command::Hte {
            scenario,
            seed,
            reps,
            alpha,
            out,
        } => commands::hte(&inv, &scenario, seed, reps, alpha, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &PliableError) -> u8 {
    match e {
        e if e.is_convergence_failure() => 3,
        PliableError::InvalidParameter { .. }
        | PliableError::Unknown {
            what: "simulation spec",
            ..
        } => 1,
        _ => 2,
    }
}
