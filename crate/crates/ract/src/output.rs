//! Report and grid writers. Every file starts with the run metadata.

use std::collections::BTreeMap;
use std::io::Write;

use ract_core::sim::{ExperimentResult, NullShapeTable};
use ract_core::theory::DiagnosticRow;
use ract_core::TestReport;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::input::hex;

/// Identifies the run that produced a file.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub master_seed: Option<u64>,
    #[serde(rename = "B")]
    pub b: Option<usize>,
    pub config_hash: String,
}

impl Meta {
    /// `config` must not contain the worker budget or output locations.
    pub fn new(command: &str, master_seed: Option<u64>, b: Option<usize>, config: &impl Serialize) -> CliResult<Self> {
        let canonical = serde_json::to_vec(config).map_err(|e| CliError::Internal(e.to_string()))?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            master_seed,
            b,
            config_hash: hex(&Sha256::digest(&canonical)),
        })
    }

    pub fn csv_header(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        format!(
            "# {} {}\n# command={}\n# master_seed={}\n# B={}\n# config_hash={}\n",
            self.tool,
            self.version,
            self.command,
            opt(self.master_seed.map(|v| v.to_string())),
            opt(self.b.map(|v| v.to_string())),
            self.config_hash
        )
    }
}

/// Serialized form of a [`TestReport`].
#[derive(Debug, Serialize)]
pub struct ReportDoc<'a> {
    pub meta: &'a Meta,
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub cutoff: f64,
    pub alpha: f64,
    pub p_ract: f64,
    pub p_minp: f64,
    pub t_ract: f64,
    pub t_minp: f64,
    pub per_k_pvalues: &'a [f64],
    pub kyfan_pvalues: &'a [f64],
    pub baseline_pvalues: &'a BTreeMap<String, f64>,
    pub superdiag_pvalues: &'a [f64],
    pub observed: BTreeMap<&'static str, &'a [f64]>,
    pub dropped_k: &'a [usize],
    pub reject_minp: bool,
    pub reject_ract: bool,
}

impl<'a> ReportDoc<'a> {
    pub fn new(meta: &'a Meta, report: &'a TestReport, dims: (usize, usize, usize), alpha: f64) -> Self {
        Self {
            meta,
            n1: dims.0,
            n2: dims.1,
            p: dims.2,
            k: report.k,
            cutoff: report.cutoff,
            alpha,
            p_ract: report.p_ract,
            p_minp: report.p_minp,
            t_ract: report.t_ract,
            t_minp: report.t_minp,
            per_k_pvalues: &report.per_k_pvalues,
            kyfan_pvalues: &report.kyfan_pvalues,
            baseline_pvalues: &report.baseline_pvalues,
            superdiag_pvalues: &report.superdiag_pvalues,
            observed: report
                .observed
                .iter()
                .map(|v| (v.family.name(), v.values.as_slice()))
                .collect(),
            dropped_k: &report.dropped_k,
            reject_minp: report.p_minp <= alpha,
            reject_ract: report.p_ract <= alpha,
        }
    }
}

/// Writes to `path`, or stdout for `None` or `-`.
pub fn emit(path: Option<&str>, contents: &str) -> CliResult<()> {
    match path {
        None | Some("-") => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Output {
                    path: "<stdout>".into(),
                    source,
                })
        }
        Some(p) => std::fs::write(p, contents).map_err(|source| CliError::Output { path: p.into(), source }),
    }
}

pub fn to_json(value: &impl Serialize) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv_body(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(header).map_err(internal)?;
    for row in rows {
        w.write_record(&row).map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Long-format grid: one row per (scenario, method, grid value).
pub fn experiment_csv(meta: &Meta, result: &ExperimentResult) -> CliResult<String> {
    let header = ["scenario", "method", result.axis.name(), "rate", "se", "reps", "mean_K"];
    let rows = result.rows.iter().map(|r| {
        vec![
            r.scenario.clone(),
            r.method.to_string(),
            num(r.grid_value),
            num(r.rate),
            num(r.se),
            r.reps.to_string(),
            num(r.mean_k),
        ]
    });
    Ok(meta.csv_header() + &csv_body(&header, rows)?)
}

#[derive(Serialize)]
pub struct ExperimentDoc<'a> {
    pub meta: &'a Meta,
    pub axis: &'static str,
    pub rows: &'a [ract_core::sim::ExperimentRow],
}

pub fn nullshape_csv(meta: &Meta, table: &NullShapeTable) -> CliResult<String> {
    let names: Vec<String> = table.ks.iter().map(|k| format!("T{k}")).collect();
    let mut header: Vec<&str> = vec!["dataset"];
    header.extend(names.iter().map(String::as_str));
    let rows = table.rows.iter().enumerate().map(|(i, r)| {
        let mut row = vec![i.to_string()];
        row.extend(r.iter().copied().map(num));
        row
    });
    let moments = format!(
        "# raw_means={}\n# raw_sds={}\n",
        table.means.iter().copied().map(num).collect::<Vec<_>>().join(";"),
        table.sds.iter().copied().map(num).collect::<Vec<_>>().join(";")
    );
    Ok(meta.csv_header() + &moments + &csv_body(&header, rows)?)
}

pub fn diagnostics_csv(preamble: &str, rows: &[DiagnosticRow]) -> CliResult<String> {
    let header = ["k", "signal", "omega_sq", "snr", "beta", "gamma", "snr_increases"];
    let rows = rows.iter().map(|r| {
        let p = &r.profile;
        let (beta, gamma, inc) = match &r.from_first {
            Some(i) => (num(i.beta), num(i.gamma), i.snr_increases.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        vec![
            p.k.to_string(),
            num(p.kyfan_signal),
            num(p.omega_sq),
            num(p.snr),
            beta,
            gamma,
            inc,
        ]
    });
    Ok(preamble.to_string() + &csv_body(&header, rows)?)
}
