use std::path::Path;

use nalgebra::DMatrix;
use pliable::io::{read_table, Table};
use pliable::{Dataset, PliableError, Result};

use crate::DataArgs;

pub struct Inputs {
    pub data: Dataset,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
}

fn check_rows(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(PliableError::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

fn read_z_file(path: &Path, n: usize) -> Result<Table> {
    let t = read_table(path)?;
    check_rows("rows of the Z file", n, t.n_rows())?;
    Ok(t)
}

pub fn load(args: &DataArgs) -> Result<Inputs> {
    let table = read_table(&args.data)?;
    let y = table.column(&args.response)?;
    let mut dropped = vec![args.response.clone()];
    let (z_names, z) = if let Some(path) = &args.z_file {
        let zt = read_z_file(path, table.n_rows())?;
        (zt.names.clone(), zt.values)
    } else if !args.z_cols.is_empty() {
        if args.z_cols.contains(&args.response) {
            return Err(PliableError::Unknown {
                what: "modifier column (it is the response)",
                name: args.response.clone(),
            });
        }
        if !args.keep_z_in_x {
            dropped.extend(args.z_cols.iter().cloned());
        }
        (args.z_cols.clone(), table.select(&args.z_cols)?)
    } else {
        (Vec::new(), DMatrix::zeros(table.n_rows(), 0))
    };
    let (x_names, x) = table.without(&dropped);
    Ok(Inputs {
        data: Dataset::new(y, x, z)?,
        x_names,
        z_names,
    })
}

/// Predictor and modifier matrices for a saved model, looked up by column name.
pub fn load_for_model(
    data: &Path,
    z_file: Option<&Path>,
    x_names: &[String],
    z_names: &[String],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let table = read_table(data)?;
    let x = table.select(x_names)?;
    let z = match z_file {
        Some(path) => read_z_file(path, table.n_rows())?.select(z_names)?,
        None => table.select(z_names)?,
    };
    Ok((x, z))
}
