//! CSV emission and parsing.

use std::fs;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::experiment::{ExperimentResult, ResultRow};
use crate::format::g17;

pub const CSV_HEADER: &str = "estimator,function,k,matvec_units,mean_rel_err,p05,p95,bias,mse,truth,wall_ms";
pub const ESTIMATES_HEADER: &str = "estimator,function,k,matvec_units,mean_estimate,p05,p95,wall_ms";

/// One line of the error CSV; also what the SVG renderer consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub estimator: String,
    pub function: String,
    pub k: usize,
    pub matvec_units: usize,
    pub mean_rel_err: f64,
    pub p05: f64,
    pub p95: f64,
    pub bias: f64,
    pub mse: f64,
    pub truth: f64,
    pub wall_ms: f64,
}

impl CsvRow {
    /// `None` for rows without ground truth.
    pub fn from_result(r: &ResultRow) -> Option<Self> {
        let s = r.summary?;
        Some(Self {
            estimator: r.estimator.to_string(),
            function: r.function.clone(),
            k: r.k,
            matvec_units: r.matvec_units,
            mean_rel_err: s.mean_rel_err,
            p05: s.p05,
            p95: s.p95,
            bias: s.bias,
            mse: s.mse,
            truth: r.truth?,
            wall_ms: r.wall_ms,
        })
    }
}

pub fn rows(result: &ExperimentResult) -> Vec<CsvRow> {
    result.rows.iter().filter_map(CsvRow::from_result).collect()
}

pub fn csv_string(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let nums = [r.mean_rel_err, r.p05, r.p95, r.bias, r.mse, r.truth, r.wall_ms].map(g17);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            quote(&r.estimator),
            quote(&r.function),
            r.k,
            r.matvec_units,
            nums.join(",")
        ));
    }
    out
}

/// Estimate-only CSV: the estimate distribution without error columns.
pub fn estimates_string(result: &ExperimentResult) -> String {
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for r in &result.rows {
        let nums = [r.mean_estimate, r.estimate_p05, r.estimate_p95, r.wall_ms].map(g17);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            quote(&r.estimator.to_string()),
            quote(&r.function),
            r.k,
            r.matvec_units,
            nums.join(",")
        ));
    }
    out
}

pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    write(path, &csv_string(&rows(result)))
}

pub fn emit_estimates(result: &ExperimentResult, path: &Path) -> Result<()> {
    write(path, &estimates_string(result))
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Function names such as `ratio:zeta=1` never need quoting, but a custom
/// name might contain a comma.
fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

pub fn parse_csv(text: &str) -> std::result::Result<Vec<CsvRow>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(format!("expected header '{CSV_HEADER}'")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f = split_line(line);
        if f.len() != 11 {
            return Err(format!("line {}: expected 11 fields, found {}", i + 1, f.len()));
        }
        let int = |j: usize| f[j].parse::<usize>().map_err(|_| format!("line {}: bad integer '{}'", i + 1, f[j]));
        let num = |j: usize| f[j].parse::<f64>().map_err(|_| format!("line {}: bad number '{}'", i + 1, f[j]));
        out.push(CsvRow {
            estimator: f[0].clone(),
            function: f[1].clone(),
            k: int(2)?,
            matvec_units: int(3)?,
            mean_rel_err: num(4)?,
            p05: num(5)?,
            p95: num(6)?,
            bias: num(7)?,
            mse: num(8)?,
            truth: num(9)?,
            wall_ms: num(10)?,
        });
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_csv(&text).map_err(|m| {
        HarnessError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, m))
    })
}
