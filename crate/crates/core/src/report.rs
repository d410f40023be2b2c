//! Serialized results: report CSVs, reconstruction traces and run manifests.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::{ReportRow, Trace};

pub const REPORT_HEADER: &str = "signal,design,rule,rsnr,n,runs,mean_rmse,sd_rmse";
pub const TRACE_HEADER: &str = "x,truth,estimate";

/// Summary columns of a report line.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub signal: String,
    pub design: String,
    pub rule: String,
    pub rsnr: f64,
    pub n: usize,
    pub runs: usize,
    pub mean_rmse: f64,
    pub sd_rmse: f64,
}

impl From<&ReportRow> for ReportLine {
    fn from(r: &ReportRow) -> Self {
        ReportLine {
            signal: r.signal.clone(),
            design: r.design.clone(),
            rule: r.rule.clone(),
            rsnr: r.rsnr,
            n: r.n,
            runs: r.runs,
            mean_rmse: r.mean_rmse,
            sd_rmse: r.sd_rmse,
        }
    }
}

fn line_order(a: &ReportLine, b: &ReportLine) -> Ordering {
    a.signal
        .cmp(&b.signal)
        .then_with(|| a.design.cmp(&b.design))
        .then_with(|| a.rule.cmp(&b.rule))
        .then_with(|| a.rsnr.total_cmp(&b.rsnr))
        .then_with(|| a.n.cmp(&b.n))
        .then_with(|| a.runs.cmp(&b.runs))
}

/// Report CSV text, rows sorted by (signal, design, rule, rsnr).
pub fn format_csv(rows: &[ReportLine]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::param("table", "nothing to report"));
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by(line_order);
    let mut s = String::new();
    let _ = writeln!(s, "{REPORT_HEADER}");
    for r in &sorted {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.6},{:.6}",
            r.signal, r.design, r.rule, r.rsnr, r.n, r.runs, r.mean_rmse, r.sd_rmse
        );
    }
    Ok(s)
}

pub fn emit_csv<W: Write>(rows: &[ReportRow], mut out: W) -> Result<()> {
    let lines: Vec<ReportLine> = rows.iter().map(ReportLine::from).collect();
    out.write_all(format_csv(&lines)?.as_bytes())
        .map_err(|e| Error::io("<report>", e))
}

/// Parses report CSV text back into lines.
pub fn parse_csv(text: &str) -> Result<Vec<ReportLine>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(REPORT_HEADER) {
        return Err(Error::param("report", format!("missing header `{REPORT_HEADER}`")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::param("report", format!("line {}: malformed row `{line}`", i + 2));
        if f.len() != 8 {
            return Err(bad());
        }
        out.push(ReportLine {
            signal: f[0].into(),
            design: f[1].into(),
            rule: f[2].into(),
            rsnr: f[3].parse().map_err(|_| bad())?,
            n: f[4].parse().map_err(|_| bad())?,
            runs: f[5].parse().map_err(|_| bad())?,
            mean_rmse: f[6].parse().map_err(|_| bad())?,
            sd_rmse: f[7].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Pivot with one line per (signal, design) and one column per (rsnr, rule).
pub fn format_table(rows: &[ReportLine]) -> String {
    let mut columns: Vec<(f64, String)> = Vec::new();
    let mut cells: BTreeMap<(String, String), BTreeMap<usize, f64>> = BTreeMap::new();
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.rsnr.total_cmp(&b.rsnr).then_with(|| a.rule.cmp(&b.rule)));
    for r in &sorted {
        let col = match columns
            .iter()
            .position(|(s, rule)| *s == r.rsnr && *rule == r.rule)
        {
            Some(c) => c,
            None => {
                columns.push((r.rsnr, r.rule.clone()));
                columns.len() - 1
            }
        };
        cells
            .entry((r.signal.clone(), r.design.clone()))
            .or_default()
            .insert(col, r.mean_rmse);
    }
    let mut s = String::new();
    let _ = write!(s, "{:<10} {:<8}", "signal", "design");
    for (rsnr, rule) in &columns {
        let _ = write!(s, " {:>10}", format!("{rule}@{rsnr}"));
    }
    s.push('\n');
    for ((signal, design), row) in &cells {
        let _ = write!(s, "{signal:<10} {design:<8}");
        for c in 0..columns.len() {
            match row.get(&c) {
                Some(v) => {
                    let _ = write!(s, " {v:>10.4}");
                }
                None => {
                    let _ = write!(s, " {:>10}", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

/// Three-column trace CSV.
pub fn format_trace(trace: &Trace) -> String {
    let mut s = String::with_capacity(40 * trace.x.len());
    let _ = writeln!(s, "{TRACE_HEADER}");
    for ((x, t), e) in trace.x.iter().zip(&trace.truth).zip(&trace.estimate) {
        let _ = writeln!(s, "{x:.9},{t:.9},{e:.9}");
    }
    s
}

pub fn emit_trace<W: Write>(trace: &Trace, mut out: W) -> Result<()> {
    out.write_all(format_trace(trace).as_bytes())
        .map_err(|e| Error::io("<trace>", e))
}

/// What produced a set of output files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub config_path: String,
    pub config_text: String,
    pub output_dir: String,
    pub overrides: Vec<(String, String)>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = {}", self.tool_version);
        let _ = writeln!(s, "config = {}", self.config_path);
        let _ = writeln!(s, "config_sha256 = {}", hex::encode(Sha256::digest(&self.config_text)));
        let _ = writeln!(s, "output = {}", self.output_dir);
        for (k, v) in &self.overrides {
            let _ = writeln!(s, "override.{k} = {v}");
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`RunManifest::render`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))[..16].to_string()
    }
}
