//! Structured (JSON envelope) and tabular (CSV) result files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::{
    AggregateReport, DecompositionRow, DirectionReport, MatchedProfiles, OutcomeReport, ScanResult,
    SteeringReport, SweepResult,
};
use crate::stats::GroupReport;
use crate::{TOOL_NAME, TOOL_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Structured,
    Tabular,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structured" | "json" => Ok(ReportFormat::Structured),
            "tabular" | "csv" => Ok(ReportFormat::Tabular),
            other => Err(crate::Error::invalid(format!(
                "unknown report format `{other}`"
            ))),
        }
    }
}

/// An interpretation choice whose effective value every output records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub key: String,
    pub value: String,
}

impl Decision {
    pub fn new(key: impl Into<String>, value: impl ToString) -> Self {
        Self {
            key: key.into(),
            value: value.to_string(),
        }
    }
}

/// Provenance attached to every report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReportMeta {
    pub config: serde_json::Value,
    pub decisions: Vec<Decision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<P> {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub config: serde_json::Value,
    pub decisions: Vec<Decision>,
    pub payload: P,
}

/// Plain table: a header and stringified rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Full-precision number; empty cell for `None`.
pub fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub trait Report: Serialize {
    const KIND: &'static str;
    fn table(&self) -> Table;
}

pub fn render_structured<R: Report>(report: &R, meta: &ReportMeta) -> Result<String> {
    let env = Envelope {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        kind: R::KIND.into(),
        config: meta.config.clone(),
        decisions: meta.decisions.clone(),
        payload: report,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

pub fn render_tabular<R: Report>(report: &R, meta: &ReportMeta) -> Result<String> {
    let table = report.table();
    let mut s = String::new();
    writeln!(s, "# tool: {TOOL_NAME} {TOOL_VERSION}").ok();
    writeln!(s, "# kind: {}", R::KIND).ok();
    writeln!(s, "# config: {}", serde_json::to_string(&meta.config)?).ok();
    for d in &meta.decisions {
        writeln!(s, "# decision: {} = {}", d.key, d.value).ok();
    }
    let header: Vec<String> = table.columns.iter().map(|c| escape(c)).collect();
    writeln!(s, "{}", header.join(",")).ok();
    for row in &table.rows {
        let row: Vec<String> = row.iter().map(|c| escape(c)).collect();
        writeln!(s, "{}", row.join(",")).ok();
    }
    Ok(s)
}

pub fn render_report<R: Report>(
    report: &R,
    meta: &ReportMeta,
    format: ReportFormat,
) -> Result<String> {
    match format {
        ReportFormat::Structured => render_structured(report, meta),
        ReportFormat::Tabular => render_tabular(report, meta),
    }
}

pub fn write_report<R: Report>(
    report: &R,
    meta: &ReportMeta,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, render_report(report, meta, format)?)?;
    Ok(())
}

/// Per-arm rows shaped like a steering results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmTable(pub Vec<GroupReport>);

pub const ARM_COLUMNS: [&str; 7] = ["arm", "success_rate", "lo", "hi", "contrast", "lo", "hi"];

fn arm_rows(arms: &[GroupReport]) -> Table {
    let mut t = Table::new(&ARM_COLUMNS);
    for g in arms {
        let c = g.contrast_mean;
        t.push(vec![
            g.arm.clone(),
            num(g.success_rate.point),
            num(g.success_rate.lo),
            num(g.success_rate.hi),
            cell(c.map(|c| c.point)),
            cell(c.map(|c| c.lo)),
            cell(c.map(|c| c.hi)),
        ]);
    }
    t
}

impl Report for ArmTable {
    const KIND: &'static str = "arms";
    fn table(&self) -> Table {
        arm_rows(&self.0)
    }
}

impl Report for SteeringReport {
    const KIND: &'static str = "trajectory_steering";
    fn table(&self) -> Table {
        arm_rows(&self.arms)
    }
}

impl Report for AggregateReport {
    const KIND: &'static str = "aggregate";
    fn table(&self) -> Table {
        arm_rows(&self.arms)
    }
}

impl Report for OutcomeReport {
    const KIND: &'static str = "outcome_association";
    fn table(&self) -> Table {
        let mut t = Table::new(&[
            "control",
            "n_success",
            "n_failure",
            "excluded",
            "success_mean",
            "failure_mean",
            "delta",
            "p_value",
            "sidedness",
            "n_permutations",
            "exhaustive",
        ]);
        for c in &self.controls {
            t.push(vec![
                c.label.clone(),
                c.n_success.to_string(),
                c.n_failure.to_string(),
                c.excluded.to_string(),
                cell(c.success_mean),
                cell(c.failure_mean),
                cell(c.delta),
                cell(c.p_value()),
                c.test
                    .map(|r| r.sidedness.to_string())
                    .unwrap_or_else(|| "inapplicable".into()),
                c.test
                    .map(|r| r.n_permutations.to_string())
                    .unwrap_or_default(),
                c.test.map(|r| r.exhaustive.to_string()).unwrap_or_default(),
            ]);
        }
        t
    }
}

impl Report for MatchedProfiles {
    const KIND: &'static str = "matched_horizon_profile";
    fn table(&self) -> Table {
        let mut t = Table::new(&["t", "success_mean_jerk", "failure_mean_jerk", "boundary"]);
        for i in 0..self.horizon {
            t.push(vec![
                i.to_string(),
                cell(self.success_mean_jerk[i]),
                cell(self.failure_mean_jerk[i]),
                self.boundary[i].to_string(),
            ]);
        }
        t
    }
}

impl Report for ScanResult {
    const KIND: &'static str = "noise_scan";
    fn table(&self) -> Table {
        let mut t = Table::new(&[
            "context_id",
            "sample",
            "btj",
            "contrast",
            "reference_btj",
            "reference_contrast",
        ]);
        for c in &self.contexts {
            for (i, (b, k)) in c.btj.iter().zip(&c.contrast).enumerate() {
                t.push(vec![
                    c.context_id.to_string(),
                    i.to_string(),
                    num(*b),
                    num(*k),
                    cell(c.reference_btj),
                    cell(c.reference_contrast),
                ]);
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecompositionTable(pub Vec<DecompositionRow>);

impl Report for DecompositionTable {
    const KIND: &'static str = "noise_decomposition";
    fn table(&self) -> Table {
        let mut t = Table::new(&[
            "condition",
            "btj_std",
            "contrast_std",
            "n_samples",
            "n_contexts",
        ]);
        for r in &self.0 {
            t.push(vec![
                r.condition.label().into(),
                num(r.btj_std),
                num(r.contrast_std),
                r.n_samples.to_string(),
                r.n_contexts.to_string(),
            ]);
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SweepTable(pub Vec<SweepResult>);

impl Report for SweepTable {
    const KIND: &'static str = "alpha_sweep";
    fn table(&self) -> Table {
        let mut t = Table::new(&["context_id", "alpha", "btj", "contrast"]);
        for s in &self.0 {
            for (i, a) in s.alphas.iter().enumerate() {
                t.push(vec![
                    s.context_id.to_string(),
                    num(*a),
                    cell(s.btj[i]),
                    cell(s.contrast[i]),
                ]);
            }
        }
        t
    }
}

impl Report for DirectionReport {
    const KIND: &'static str = "direction_sweep";
    fn table(&self) -> Table {
        let mut t = Table::new(&[
            "context_id",
            "direction",
            "alpha",
            "btj",
            "contrast",
            "r_btj",
            "r_contrast",
        ]);
        for s in &self.sweeps {
            for (i, a) in s.alphas.iter().enumerate() {
                t.push(vec![
                    s.context_id.to_string(),
                    self.kind.label().into(),
                    num(*a),
                    cell(s.btj[i]),
                    cell(s.contrast[i]),
                    cell(s.r_btj),
                    cell(s.r_contrast),
                ]);
            }
        }
        t
    }
}
