//! CSV ingestion.
//!
//! Inputs carry a header row. Every column other than the group label and
//! the named covariates is a feature. Values must be finite numbers; empty
//! cells are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use ract_core::{CovariateMatrix, TwoSampleDataset};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Smallest group size accepted by `test`.
pub const MIN_GROUP: usize = 3;

struct Table {
    path: PathBuf,
    headers: Vec<String>,
    /// `(line, fields)` per record.
    records: Vec<(u64, Vec<String>)>,
    digest: String,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn malformed(path: &Path, line: u64, column: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Malformed {
        path: path.to_path_buf(),
        line,
        column: column.into(),
        reason: reason.into(),
    }
}

fn read_table(path: &Path) -> CliResult<Table> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    let digest = hex(&Sha256::digest(&bytes));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let convert = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => malformed(
                path,
                line,
                "-",
                format!("record has {len} fields, expected {expected_len}"),
            ),
            csv::ErrorKind::Utf8 { err, .. } => malformed(path, line, (err.field() + 1).to_string(), "invalid UTF-8"),
            _ => malformed(path, line, "-", e.to_string()),
        }
    };
    let headers: Vec<String> = reader.headers().map_err(convert)?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(malformed(path, 1, "-", "missing header row"));
    }
    let mut seen = BTreeSet::new();
    for (j, h) in headers.iter().enumerate() {
        if h.is_empty() {
            return Err(malformed(path, 1, (j + 1).to_string(), "empty column name"));
        }
        if !seen.insert(h.as_str()) {
            return Err(malformed(path, 1, h.clone(), "duplicate column name"));
        }
    }
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(convert)?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table {
        path: path.to_path_buf(),
        headers,
        records,
        digest,
    })
}

impl Table {
    fn column(&self, name: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::usage(format!("{}: no column named `{name}`", self.path.display())))
    }

    fn number(&self, line: u64, col: usize, raw: &str) -> CliResult<f64> {
        let column = format!("{} ({})", col + 1, self.headers[col]);
        if raw.is_empty() {
            return Err(malformed(&self.path, line, column, "missing value"));
        }
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(malformed(&self.path, line, column, format!("non-finite value `{raw}`"))),
            Err(_) => Err(malformed(&self.path, line, column, format!("not a number: `{raw}`"))),
        }
    }

    /// Numeric matrix of `cols` over the records selected by `keep`.
    fn matrix(&self, cols: &[usize], keep: impl Fn(&[String]) -> bool) -> CliResult<DMatrix<f64>> {
        let mut values = Vec::new();
        let mut rows = 0;
        for (line, fields) in &self.records {
            if !keep(fields) {
                continue;
            }
            for &c in cols {
                values.push(self.number(*line, c, &fields[c])?);
            }
            rows += 1;
        }
        Ok(DMatrix::from_row_slice(rows, cols.len(), &values))
    }
}

/// Where the two groups come from.
#[derive(Debug, Clone)]
pub enum Source {
    TwoFiles(PathBuf, PathBuf),
    Labeled {
        path: PathBuf,
        group_col: String,
        /// Label of group 1; defaults to the first label in the file.
        group1: Option<String>,
    },
}

#[derive(Debug)]
pub struct Loaded {
    pub dataset: TwoSampleDataset,
    /// SHA-256 of each input file, in argument order.
    pub digests: Vec<String>,
}

fn split_columns(table: &Table, exclude: &[usize], covariates: &[String]) -> CliResult<(Vec<usize>, Vec<usize>)> {
    let cov: Vec<usize> = covariates.iter().map(|c| table.column(c)).collect::<CliResult<_>>()?;
    let features: Vec<usize> = (0..table.headers.len())
        .filter(|j| !exclude.contains(j) && !cov.contains(j))
        .collect();
    if features.is_empty() {
        return Err(CliError::usage(format!(
            "{}: no feature columns left",
            table.path.display()
        )));
    }
    Ok((features, cov))
}

pub fn load(source: &Source, covariates: &[String]) -> CliResult<Loaded> {
    let (g1, g2, c1, c2, names, digests) = match source {
        Source::TwoFiles(a, b) => {
            let (ta, tb) = (read_table(a)?, read_table(b)?);
            if ta.headers != tb.headers {
                return Err(CliError::usage(format!(
                    "{} and {} have different header rows",
                    a.display(),
                    b.display()
                )));
            }
            let (features, cov) = split_columns(&ta, &[], covariates)?;
            let names = features.iter().map(|&j| ta.headers[j].clone()).collect::<Vec<_>>();
            (
                ta.matrix(&features, |_| true)?,
                tb.matrix(&features, |_| true)?,
                ta.matrix(&cov, |_| true)?,
                tb.matrix(&cov, |_| true)?,
                names,
                vec![ta.digest.clone(), tb.digest.clone()],
            )
        }
        Source::Labeled {
            path,
            group_col,
            group1,
        } => {
            let t = read_table(path)?;
            let g = t.column(group_col)?;
            let mut labels: Vec<&str> = Vec::new();
            for (line, fields) in &t.records {
                let label = fields[g].as_str();
                if label.is_empty() {
                    return Err(malformed(
                        path,
                        *line,
                        format!("{} ({group_col})", g + 1),
                        "missing group label",
                    ));
                }
                if !labels.contains(&label) {
                    labels.push(label);
                }
            }
            if labels.len() != 2 {
                return Err(CliError::Data(format!(
                    "{}: column `{group_col}` must hold exactly two labels, found {}",
                    path.display(),
                    labels.len()
                )));
            }
            let first = match group1 {
                Some(l) if labels.contains(&l.as_str()) => l.clone(),
                Some(l) => {
                    return Err(CliError::usage(format!(
                        "group label `{l}` does not occur in `{group_col}`"
                    )))
                }
                None => labels[0].to_string(),
            };
            let (features, cov) = split_columns(&t, &[g], covariates)?;
            let names = features.iter().map(|&j| t.headers[j].clone()).collect::<Vec<_>>();
            let in1 = |f: &[String]| f[g] == first;
            let in2 = |f: &[String]| f[g] != first;
            (
                t.matrix(&features, in1)?,
                t.matrix(&features, in2)?,
                t.matrix(&cov, in1)?,
                t.matrix(&cov, in2)?,
                names,
                vec![t.digest.clone()],
            )
        }
    };
    let (n1, n2) = (g1.nrows(), g2.nrows());
    if n1 < MIN_GROUP || n2 < MIN_GROUP {
        return Err(CliError::Data(format!(
            "each group needs at least {MIN_GROUP} rows, got {n1} and {n2}"
        )));
    }
    let mut dataset = TwoSampleDataset::new(g1, g2)?.with_feature_names(names)?;
    if !covariates.is_empty() {
        let d1 = CovariateMatrix::with_intercept(&c1)?;
        let d2 = CovariateMatrix::with_intercept(&c2)?;
        dataset = dataset.residualize_within_groups(&d1, &d2)?;
    }
    Ok(Loaded { dataset, digests })
}

/// A square numeric matrix stored with a header row of column names.
pub fn load_matrix(path: &Path) -> CliResult<(DMatrix<f64>, String)> {
    let t = read_table(path)?;
    let cols: Vec<usize> = (0..t.headers.len()).collect();
    let m = t.matrix(&cols, |_| true)?;
    if m.nrows() != m.ncols() {
        return Err(CliError::Data(format!(
            "{}: expected a square matrix, got {} x {}",
            path.display(),
            m.nrows(),
            m.ncols()
        )));
    }
    Ok((m, t.digest))
}
