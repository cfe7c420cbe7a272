//! CSV tables and JSON summaries.
//!
//! Every file starts with the same provenance block: config hash, seed,
//! numeric tolerances and PASS thresholds. CSV comment lines begin with `#`.
//! Nothing time- or host-dependent is written, so equal configs give
//! byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::ExperimentKind;
use crate::error::RunError;
use crate::verify::Thresholds;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "NOT-APPLICABLE",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            _ => 1,
        }
    }
}

/// A header row plus string cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal, independent of locale; exponent form for
/// very small or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Vector cell: coordinates joined by `;`.
pub fn vec_cell(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

/// Provenance echoed into every artifact.
#[derive(Clone, Debug)]
pub struct Meta {
    pub kind: ExperimentKind,
    pub config_sha256: String,
    pub seed: u64,
    pub tolerances: Vec<(String, String)>,
    pub thresholds: Thresholds,
    pub notes: Vec<String>,
}

impl Meta {
    fn threshold_pairs(&self) -> Vec<(String, String)> {
        match serde_json::to_value(self.thresholds) {
            Ok(Value::Object(m)) => m.into_iter().map(|(k, v)| (k, v.to_string())).collect(),
            _ => Vec::new(),
        }
    }
}

/// Result of one experiment, ready to be written.
#[derive(Clone, Debug)]
pub struct Report {
    pub verdict: Verdict,
    pub table: Table,
    /// Experiment-specific summary fields.
    pub summary: Map<String, Value>,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
}

pub fn render_csv(meta: &Meta, table: &Table) -> Result<String, RunError> {
    let mut out = String::new();
    let _ = writeln!(out, "# experiment={}", meta.kind);
    let _ = writeln!(out, "# config_sha256={}", meta.config_sha256);
    let _ = writeln!(out, "# seed={}", meta.seed);
    for (k, v) in &meta.tolerances {
        let _ = writeln!(out, "# tolerance.{k}={v}");
    }
    for (k, v) in meta.threshold_pairs() {
        let _ = writeln!(out, "# threshold.{k}={v}");
    }
    for note in &meta.notes {
        let _ = writeln!(out, "# note={note}");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| RunError::config(format!("output::render_csv: {e}"));
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::config(format!("output::render_csv: {e}")))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    Ok(out)
}

pub fn render_summary(meta: &Meta, report: &Report) -> String {
    let tolerances: Map<String, Value> = meta.tolerances.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let value = json!({
        "experiment": meta.kind.name(),
        "config_sha256": meta.config_sha256,
        "seed": meta.seed,
        "tolerances": tolerances,
        "thresholds": meta.thresholds,
        "notes": meta.notes,
        "verdict": report.verdict.as_str(),
        "results": report.summary,
    });
    let mut s = serde_json::to_string_pretty(&value).unwrap_or_default();
    s.push('\n');
    s
}

/// Writes `<kind>.csv` and `<kind>.summary.json` under `dir`.
pub fn write(dir: &Path, meta: &Meta, report: &Report) -> Result<(PathBuf, PathBuf), RunError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| RunError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let csv_path = dir.join(format!("{}.csv", meta.kind));
    let json_path = dir.join(format!("{}.summary.json", meta.kind));
    std::fs::write(&csv_path, render_csv(meta, &report.table)?).map_err(io(&csv_path))?;
    std::fs::write(&json_path, render_summary(meta, report)).map_err(io(&json_path))?;
    Ok((csv_path, json_path))
}
