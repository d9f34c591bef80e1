//! Report documents: JSON (lossless), CSV and markdown tables.

use crate::costmodel::REPORT_NOTE;
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, ReportRow};
use crate::topology::{Rule, Shape};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::str::FromStr;

pub const REPORT_FORMAT: &str = "memsnn-report";
pub const REPORT_VERSION: u32 = 1;

pub const CSV_HEADER: &str =
    "scale,shape,rule,accuracy,cycles,state_cells,ops_add,ops_mul,ops_exp,ops_compare,latency_proxy,wall_time_s";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub note: String,
    /// Fully resolved configuration the rows were produced with.
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn new(config: ExperimentConfig, rows: Vec<ReportRow>) -> Self {
        Report {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            note: REPORT_NOTE.into(),
            config,
            rows,
        }
    }

    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(ReportRow::is_ok)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(Error::Report(format!("unknown report format `{s}`"))),
        }
    }
}

pub fn emit_report(report: &Report, format: Format) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::Report("no rows to report".into()));
    }
    Ok(match format {
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(report).map_err(|e| Error::Report(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => csv(&report.rows),
        Format::Markdown => markdown(report),
    })
}

pub fn parse_report(text: &str) -> Result<Report> {
    let r: Report = serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
    if r.format != REPORT_FORMAT || r.version != REPORT_VERSION {
        return Err(Error::Report(format!(
            "unsupported report {} v{}",
            r.format, r.version
        )));
    }
    Ok(r)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let c = r.cost.as_ref();
        let fields = [
            r.scale.to_string(),
            r.shape.to_string(),
            r.rule.to_string(),
            opt(r.accuracy),
            opt(r.cycles),
            opt(c.map(|c| c.state_cells)),
            opt(c.map(|c| c.ops.add)),
            opt(c.map(|c| c.ops.mul)),
            opt(c.map(|c| c.ops.exp_eval)),
            opt(c.map(|c| c.ops.compare)),
            opt(c.map(|c| c.latency_proxy)),
            opt(r.wall_time_s),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn rule_label(rule: Rule) -> &'static str {
    match rule {
        Rule::Stdp => "STDP",
        Rule::Nonstdp => "non-STDP",
    }
}

/// One table per shape: a column per scale, a metric block per quantity
/// with one line per rule.
fn markdown(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "> {}\n", report.note);
    for shape in [Shape::Feedforward, Shape::Crossbar] {
        let rows: Vec<&ReportRow> = report.rows.iter().filter(|r| r.shape == shape).collect();
        if rows.is_empty() {
            continue;
        }
        let mut scales = Vec::new();
        let mut rules = Vec::new();
        for r in &rows {
            if !scales.contains(&r.scale) {
                scales.push(r.scale);
            }
            if !rules.contains(&r.rule) {
                rules.push(r.rule);
            }
        }
        let _ = writeln!(out, "### {shape}\n");
        let header: Vec<String> = scales.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "| Metric | Rule | {} |", header.join(" | "));
        let _ = writeln!(out, "|---|---|{}", "---|".repeat(scales.len()));
        type Cell = fn(&ReportRow) -> String;
        let metrics: [(&str, Cell); 5] = [
            ("Accuracy", |r| {
                r.accuracy
                    .map(|a| format!("{:.2}%", 100.0 * a))
                    .unwrap_or_else(|| "-".into())
            }),
            ("Training cycles", |r| {
                r.cycles.map_or("-".into(), |c| c.to_string())
            }),
            ("State cells", |r| {
                r.cost
                    .as_ref()
                    .map_or("-".into(), |c| c.state_cells.to_string())
            }),
            ("Ops per window", |r| {
                r.cost
                    .as_ref()
                    .map_or("-".into(), |c| c.ops.total().to_string())
            }),
            ("Latency proxy", |r| {
                r.cost
                    .as_ref()
                    .map_or("-".into(), |c| c.latency_proxy.to_string())
            }),
        ];
        for (name, cell) in metrics {
            for (n, &rule) in rules.iter().enumerate() {
                let cells: Vec<String> = scales
                    .iter()
                    .map(|&s| {
                        rows.iter().find(|r| r.scale == s && r.rule == rule).map_or(
                            "-".into(),
                            |r| if r.is_ok() { cell(r) } else { "error".into() },
                        )
                    })
                    .collect();
                let label = if n == 0 { name } else { "" };
                let _ = writeln!(
                    out,
                    "| {label} | {} | {} |",
                    rule_label(rule),
                    cells.join(" | ")
                );
            }
        }
        out.push('\n');
    }
    out
}
