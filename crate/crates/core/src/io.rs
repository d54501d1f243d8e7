//! Delimited-text tables and the versioned JSON model file.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PliableError, Result};
use crate::model::{PliableFit, ThetaRows};
use crate::path::PathPointDiagnostics;
use crate::preprocess::{StandardizationMap, StandardizeOptions};

pub const SCHEMA_VERSION: u32 = 1;

/// Numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| PliableError::Unknown {
                what: "column",
                name: name.to_string(),
            })
    }

    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        Ok(self.values.column(self.index_of(name)?).into_owned())
    }

    /// Columns in the given order.
    pub fn select(&self, names: &[String]) -> Result<DMatrix<f64>> {
        let idx = names
            .iter()
            .map(|n| self.index_of(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.values.select_columns(&idx))
    }

    /// All columns except the named ones, with their names.
    pub fn without(&self, names: &[String]) -> (Vec<String>, DMatrix<f64>) {
        let idx: Vec<usize> = (0..self.names.len())
            .filter(|&i| !names.contains(&self.names[i]))
            .collect();
        let kept = idx.iter().map(|&i| self.names[i].clone()).collect();
        (kept, self.values.select_columns(&idx))
    }
}

/// Parse a delimited table with a header row. Tabs are used when the header
/// contains one, commas otherwise. Lines starting with `#` are skipped.
pub fn parse_table(text: &str) -> Result<Table> {
    let header_line = text
        .lines()
        .find(|l| !l.starts_with('#') && !l.trim().is_empty())
        .ok_or(PliableError::Parse {
            line: 1,
            column: 1,
            message: "missing header row".into(),
        })?;
    let delimiter = if header_line.contains('\t') {
        b'\t'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if names.iter().any(String::is_empty) {
        return Err(PliableError::Parse {
            line: 1,
            column: names.iter().position(String::is_empty).unwrap() + 1,
            message: "empty column name".into(),
        });
    }
    let mut data = Vec::new();
    let mut n_rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != names.len() {
            return Err(PliableError::Parse {
                line,
                column: record.len().min(names.len()) + 1,
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| PliableError::Parse {
                line,
                column: c + 1,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(PliableError::Parse {
                    line,
                    column: c + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            data.push(v);
        }
        n_rows += 1;
    }
    Ok(Table {
        values: DMatrix::from_row_slice(n_rows, names.len(), &data),
        names,
    })
}

fn csv_error(e: csv::Error) -> PliableError {
    let line = e.position().map_or(0, |p| p.line());
    PliableError::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(PliableError::file(path))?;
    parse_table(&text)
}

/// Tab-separated output with a leading `# invocation` comment.
#[derive(Debug, Clone)]
pub struct TsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TsvTable {
    pub fn new(invocation: &str, header: &[&str]) -> Self {
        Self {
            comments: vec![invocation.to_string()],
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.header.join("\t"));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join("\t"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(PliableError::file(path))
    }
}

/// Shortest round-trip decimal form, in exponent notation for very small or large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Table from a matrix with named columns.
pub fn matrix_table(invocation: &str, names: &[String], m: &DMatrix<f64>) -> TsvTable {
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = TsvTable::new(invocation, &header);
    for i in 0..m.nrows() {
        t.push(m.row(i).iter().map(|&v| fmt_f64(v)).collect());
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationRecord {
    pub x_means: Vec<f64>,
    pub x_scales: Vec<f64>,
    pub z_means: Vec<f64>,
    pub z_scales: Vec<f64>,
    pub y_mean: f64,
    pub options: StandardizeOptions,
}

impl From<&StandardizationMap> for StandardizationRecord {
    fn from(m: &StandardizationMap) -> Self {
        Self {
            x_means: m.x_means.as_slice().to_vec(),
            x_scales: m.x_scales.as_slice().to_vec(),
            z_means: m.z_means.as_slice().to_vec(),
            z_scales: m.z_scales.as_slice().to_vec(),
            y_mean: m.y_mean,
            options: m.options,
        }
    }
}

impl From<&StandardizationRecord> for StandardizationMap {
    fn from(r: &StandardizationRecord) -> Self {
        Self {
            x_means: DVector::from_vec(r.x_means.clone()),
            x_scales: DVector::from_vec(r.x_scales.clone()),
            z_means: DVector::from_vec(r.z_means.clone()),
            z_scales: DVector::from_vec(r.z_scales.clone()),
            y_mean: r.y_mean,
            options: r.options,
        }
    }
}

/// Raw-scale coefficients at one lambda, stored sparsely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub lambda: f64,
    pub beta0: f64,
    pub theta0: Vec<f64>,
    /// `(j, beta_j)` for nonzero entries.
    pub beta: Vec<(usize, f64)>,
    /// `(j, k, theta_jk)` for nonzero entries.
    pub theta: Vec<(usize, usize, f64)>,
}

impl ModelEntry {
    pub fn from_fit(fit: &PliableFit) -> Self {
        let beta = fit
            .beta
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, v))
            .collect();
        let mut theta = Vec::new();
        for (j, row) in fit.theta.iter() {
            for (k, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    theta.push((j, k, v));
                }
            }
        }
        Self {
            lambda: fit.lambda,
            beta0: fit.beta0,
            theta0: fit.theta0.as_slice().to_vec(),
            beta,
            theta,
        }
    }

    pub fn to_fit(&self, p: usize, k: usize, alpha: f64) -> Result<PliableFit> {
        if self.theta0.len() != k {
            return Err(PliableError::DimensionMismatch {
                what: "theta0 in model file",
                expected: k,
                found: self.theta0.len(),
            });
        }
        let mut fit = PliableFit::zeros(p, k, self.lambda, alpha);
        fit.beta0 = self.beta0;
        fit.theta0 = DVector::from_vec(self.theta0.clone());
        for &(j, v) in &self.beta {
            if j >= p {
                return Err(PliableError::IndexOutOfRange {
                    what: "beta index in model file",
                    index: j,
                    len: p,
                });
            }
            fit.beta[j] = v;
        }
        let mut dense = DMatrix::zeros(p, k);
        for &(j, kk, v) in &self.theta {
            if j >= p || kk >= k {
                return Err(PliableError::IndexOutOfRange {
                    what: "theta index in model file",
                    index: if j >= p { j } else { kk },
                    len: if j >= p { p } else { k },
                });
            }
            dense[(j, kk)] = v;
        }
        fit.theta = ThetaRows::from_dense(&dense);
        Ok(fit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub folds: usize,
    pub seed: u64,
    pub idx_min: usize,
    pub idx_1se: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub alpha: f64,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    pub standardization: StandardizationRecord,
    pub lambdas: Vec<f64>,
    pub models: Vec<ModelEntry>,
    pub diagnostics: Vec<PathPointDiagnostics>,
    pub selection: Option<Selection>,
}

impl ModelFile {
    /// Build from raw-scale fits sharing one lambda grid.
    pub fn new(
        alpha: f64,
        x_names: Vec<String>,
        z_names: Vec<String>,
        map: &StandardizationMap,
        fits: &[PliableFit],
        diagnostics: Vec<PathPointDiagnostics>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            alpha,
            x_names,
            z_names,
            standardization: map.into(),
            lambdas: fits.iter().map(|f| f.lambda).collect(),
            models: fits.iter().map(ModelEntry::from_fit).collect(),
            diagnostics,
            selection: None,
        }
    }

    pub fn p(&self) -> usize {
        self.x_names.len()
    }

    pub fn k(&self) -> usize {
        self.z_names.len()
    }

    pub fn fit(&self, index: usize) -> Result<PliableFit> {
        let entry = self
            .models
            .get(index)
            .ok_or(PliableError::IndexOutOfRange {
                what: "model index",
                index,
                len: self.models.len(),
            })?;
        entry.to_fit(self.p(), self.k(), self.alpha)
    }

    /// Index used when none is requested: the CV minimum if present, else the last model.
    pub fn default_index(&self) -> usize {
        self.selection
            .map_or(self.models.len().saturating_sub(1), |s| s.idx_min)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| PliableError::ModelFile(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PliableError::ModelFile(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(PliableError::ModelFile(format!(
                    "unsupported schema_version {v}"
                )))
            }
            None => return Err(PliableError::ModelFile("missing schema_version".into())),
        }
        let file: Self =
            serde_json::from_value(value).map_err(|e| PliableError::ModelFile(e.to_string()))?;
        if file.lambdas.len() != file.models.len() {
            return Err(PliableError::DimensionMismatch {
                what: "models in model file",
                expected: file.lambdas.len(),
                found: file.models.len(),
            });
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(PliableError::file(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(PliableError::file(path))?;
        Self::from_json(&text)
    }
}
