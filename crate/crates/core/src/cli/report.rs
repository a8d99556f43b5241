//! Structured run reports (JSON) and flat table files (CSV).

use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};

use crate::audit::{AuditVerdict, Table, Witness};
use crate::error::{Error, Result};
use crate::scoring::{ScoreGap, ScoreValue};

/// A number that serialises non-finite values as the strings `inf`, `-inf`, `nan`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Num {
    /// 17 significant digits, enough to round-trip any double.
    pub fn decimal(self) -> String {
        if self.0.is_finite() {
            format!("{:.16e}", self.0)
        } else {
            non_finite(self.0).to_string()
        }
    }
}

fn non_finite(x: f64) -> &'static str {
    if x.is_nan() {
        "nan"
    } else if x > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(non_finite(self.0))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreRecord {
    pub label: String,
    pub value: Num,
    pub stderr: Num,
    pub residual: Num,
    pub method: String,
    pub infinite: bool,
}

impl ScoreRecord {
    pub fn new(label: impl Into<String>, v: &ScoreValue<f64>) -> Self {
        ScoreRecord {
            label: label.into(),
            value: Num(v.value),
            stderr: Num(v.stderr),
            residual: Num(v.residual),
            method: v.method.to_string(),
            infinite: v.infinite,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GapRecord {
    pub label: String,
    pub gap: Num,
    pub stderr: Num,
    pub residual: Num,
    pub lhs: ScoreRecord,
    pub rhs: ScoreRecord,
}

impl GapRecord {
    pub fn new(label: impl Into<String>, g: &ScoreGap<f64>) -> Self {
        GapRecord {
            label: label.into(),
            gap: Num(g.gap),
            stderr: Num(g.stderr),
            residual: Num(g.residual()),
            lhs: ScoreRecord::new("lhs", &g.lhs),
            rhs: ScoreRecord::new("rhs", &g.rhs),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessRecord {
    pub kind: &'static str,
    pub q_hat: String,
    pub q: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<(Num, Num)>,
    pub gap: GapRecord,
}

impl WitnessRecord {
    fn new(w: &Witness<f64>) -> Self {
        WitnessRecord {
            kind: w.kind.as_str(),
            q_hat: w.q_hat.to_string(),
            q: w.q.to_string(),
            reference: w.reference.as_ref().map(|r| r.to_string()),
            lambdas: w.lambdas.map(|(a, b)| (Num(a), Num(b))),
            gap: GapRecord::new("witness", &w.gap),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictRecord {
    pub probe: String,
    pub outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessRecord>,
    pub probes_run: usize,
    pub skipped: usize,
    pub notes: Vec<String>,
    /// Ids of the tables this verdict produced.
    pub tables: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableRecord {
    pub id: String,
    pub method: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Num>>,
}

impl TableRecord {
    pub fn new(id: impl Into<String>, t: &Table<f64>) -> Self {
        TableRecord {
            id: id.into(),
            method: t.method.clone(),
            columns: t.columns.clone(),
            rows: t.rows.iter().map(|r| r.iter().map(|x| Num(*x)).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// One document per run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub timestamp: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub scores: Vec<ScoreRecord>,
    pub gaps: Vec<GapRecord>,
    pub verdicts: Vec<VerdictRecord>,
    pub tables: Vec<TableRecord>,
    pub checks: Vec<CheckRecord>,
}

impl Report {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        let timestamp = time::OffsetDateTime::now_utc()
            .format(&time::format_description::well_known::Rfc3339)
            .unwrap_or_else(|_| "unknown".into());
        Report {
            tool: "scorelab",
            version: env!("CARGO_PKG_VERSION"),
            timestamp,
            command: command.to_string(),
            seed,
            config,
            scores: Vec::new(),
            gaps: Vec::new(),
            verdicts: Vec::new(),
            tables: Vec::new(),
            checks: Vec::new(),
        }
    }

    /// Adds a verdict; its tables get report-unique ids `v<index>-<table id>`.
    pub fn push_verdict(&mut self, v: &AuditVerdict<f64>) {
        let index = self.verdicts.len();
        let mut ids = Vec::new();
        for t in &v.tables {
            let id = format!("v{index}-{}", t.id);
            self.tables.push(TableRecord::new(id.clone(), t));
            ids.push(id);
        }
        self.verdicts.push(VerdictRecord {
            probe: v.probe.clone(),
            outcome: v.outcome.as_str(),
            witness: v.witness.as_ref().map(WitnessRecord::new),
            probes_run: v.probes_run,
            skipped: v.skipped,
            notes: v.notes.clone(),
            tables: ids,
        });
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// Path of the structured report for an output prefix.
pub fn report_path(prefix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}.json"))
}

/// Path of the table file with the given id.
pub fn table_path(prefix: &str, id: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}-{id}.csv"))
}

fn write_table(path: &Path, t: &TableRecord) -> Result<()> {
    let io = |e: csv::Error| Error::arg(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = t.columns.clone();
    header.push("method".into());
    w.write_record(&header).map_err(io)?;
    for row in &t.rows {
        let mut rec: Vec<String> = row.iter().map(|x| x.decimal()).collect();
        rec.push(t.method.clone());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::arg(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Writes one CSV file per table, named `<prefix>-<table id>.csv`, and returns
/// the paths written. An empty report writes nothing.
pub fn render_curves(report: &Report, prefix: &str) -> Result<Vec<PathBuf>> {
    report
        .tables
        .iter()
        .map(|t| {
            let path = table_path(prefix, &t.id);
            write_table(&path, t)?;
            Ok(path)
        })
        .collect()
}
