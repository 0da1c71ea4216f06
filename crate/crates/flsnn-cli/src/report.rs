//! `report`: bandwidth-for-accuracy table across run directories.
//!
//! For each accuracy threshold, the cumulative bandwidth fraction at the
//! first round that reaches it; a `-` marks thresholds the run never
//! reached. A final row gives the highest accuracy over all rounds.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use flsnn_core::error::{Error, Result};
use flsnn_core::fl::RoundMetrics;

use crate::run::RunManifest;

pub const THRESHOLDS: [f64; 6] = [0.25, 0.40, 0.50, 0.60, 0.70, 0.75];
pub const ABSENT: &str = "-";

/// Minimal per-round view parsed back from `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub round: usize,
    pub test_acc: f64,
    pub cum_frac_incl: f64,
    pub cum_frac_excl: f64,
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))?;
    if header != RoundMetrics::CSV_HEADER {
        return Err(Error::Format(format!("{}: unexpected header {header:?}", path.display())));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Format(format!(
                "{}: row {} has {} fields, want 10",
                path.display(),
                i + 2,
                fields.len()
            )));
        }
        let num = |j: usize| -> Result<f64> {
            fields[j].parse().map_err(|_| {
                Error::Format(format!("{}: row {}: bad number {:?}", path.display(), i + 2, fields[j]))
            })
        };
        rows.push(MetricsRow {
            round: num(0)? as usize,
            test_acc: num(4)?,
            cum_frac_incl: num(7)?,
            cum_frac_excl: num(8)?,
        });
    }
    Ok(rows)
}

/// Fraction at the first round whose accuracy reaches `threshold`.
pub fn fraction_at_threshold(rows: &[MetricsRow], threshold: f64) -> Option<f64> {
    rows.iter().find(|r| r.test_acc >= threshold).map(|r| r.cum_frac_excl)
}

pub fn highest_accuracy(rows: &[MetricsRow]) -> f64 {
    rows.iter().map(|r| r.test_acc).fold(0.0, f64::max)
}

/// One column of the report table.
#[derive(Debug, Clone)]
pub struct ReportColumn {
    pub label: String,
    pub at_threshold: Vec<Option<f64>>,
    pub highest_acc: f64,
}

pub fn build_report(run_dirs: &[PathBuf]) -> Result<Vec<ReportColumn>> {
    let mut cols = Vec::with_capacity(run_dirs.len());
    for dir in run_dirs {
        let rows = read_metrics_csv(&dir.join("metrics.csv"))?;
        if rows.is_empty() {
            return Err(Error::Format(format!("{}: metrics.csv has no rows", dir.display())));
        }
        let label = RunManifest::load(dir)
            .map(|m| m.label)
            .unwrap_or_else(|_| dir.file_name().unwrap_or_default().to_string_lossy().into_owned());
        cols.push(ReportColumn {
            label,
            at_threshold: THRESHOLDS.iter().map(|&t| fraction_at_threshold(&rows, t)).collect(),
            highest_acc: highest_accuracy(&rows),
        });
    }
    Ok(cols)
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(f) => format!("{f:.6}"),
        None => ABSENT.to_string(),
    }
}

pub fn render_text(cols: &[ReportColumn]) -> String {
    let mut out = String::new();
    let width = cols.iter().map(|c| c.label.len()).chain([12]).max().unwrap();
    out.push_str(&format!("{:<14}", "accuracy"));
    for c in cols {
        out.push_str(&format!(" {:>width$}", c.label));
    }
    out.push('\n');
    for (i, t) in THRESHOLDS.iter().enumerate() {
        out.push_str(&format!("{:<14}", format!("{:.0}%", t * 100.0)));
        for c in cols {
            out.push_str(&format!(" {:>width$}", cell(c.at_threshold[i])));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<14}", "highest"));
    for c in cols {
        out.push_str(&format!(" {:>width$}", format!("{:.4}", c.highest_acc)));
    }
    out.push('\n');
    out
}

pub fn render_csv(cols: &[ReportColumn]) -> String {
    let mut out = String::from("accuracy");
    for c in cols {
        out.push(',');
        out.push_str(&c.label);
    }
    out.push('\n');
    for (i, t) in THRESHOLDS.iter().enumerate() {
        out.push_str(&format!("{}", t));
        for c in cols {
            out.push(',');
            out.push_str(&cell(c.at_threshold[i]));
        }
        out.push('\n');
    }
    out.push_str("highest");
    for c in cols {
        out.push_str(&format!(",{}", c.highest_acc));
    }
    out.push('\n');
    out
}

/// `flsnn report`: print the table and write `report.csv` into `out`
/// (default: alongside the first run directory).
pub fn cmd_report(run_dirs: &[PathBuf], out: Option<&Path>) -> Result<PathBuf> {
    if run_dirs.is_empty() {
        return Err(Error::input("report needs at least one run directory".to_string()));
    }
    let cols = build_report(run_dirs)?;
    print!("{}", render_text(&cols));
    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run_dirs[0].parent().unwrap_or(Path::new(".")).to_path_buf());
    fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("report.csv");
    let mut f = fs::File::create(&path)?;
    f.write_all(render_csv(&cols).as_bytes())?;
    Ok(path)
}
