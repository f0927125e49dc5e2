//! Table, CSV and JSON emission.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use countergm::inference::DiagnosticsReport;
use countergm::FitResult;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Table,
}

/// Wald α = 0.05 marker.
pub fn stars(fit: &FitResult, k: usize) -> &'static str {
    if fit.significant(k) {
        "*"
    } else {
        ""
    }
}

pub fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Left-aligned first column, right-aligned others.
pub fn table_string(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let width: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain([header[c].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |r: &[String]| {
        let mut s = String::new();
        for (c, cell) in r.iter().enumerate() {
            let pad = width[c] - cell.chars().count();
            if c == 0 {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

pub fn json_string(value: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn fit_rows(fit: &FitResult) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["term", "estimate", "std_error", "mc_std_error", "z", "significant"]
        .map(String::from)
        .to_vec();
    let rows = (0..fit.labels.len())
        .map(|k| {
            vec![
                fit.labels[k].clone(),
                format!("{:.4}", fit.theta_hat[k]),
                format!("{:.4}", fit.std_errors[k]),
                format!("{:.4}", fit.mc_std_errors[k]),
                format!("{:.3}", fit.z(k)),
                stars(fit, k).to_string(),
            ]
        })
        .collect();
    (header, rows)
}

pub fn diagnostics_rows(d: &DiagnosticsReport) -> (Vec<String>, Vec<Vec<String>>) {
    let header = [
        "statistic", "observed", "mean", "sd", "min", "q05", "median", "q95", "max", "lag1_acf", "ess",
        "z", "bimodal",
    ]
    .map(String::from)
    .to_vec();
    let rows = d
        .stats
        .iter()
        .map(|s| {
            vec![
                s.label.clone(),
                format!("{:.4}", s.observed),
                format!("{:.4}", s.mean),
                format!("{:.4}", s.sd),
                format!("{:.4}", s.min),
                format!("{:.4}", s.quantiles[0]),
                format!("{:.4}", s.quantiles[1]),
                format!("{:.4}", s.quantiles[2]),
                format!("{:.4}", s.max),
                format!("{:.3}", s.lag1_autocorrelation),
                format!("{:.1}", s.ess),
                format!("{:.3}", s.z),
                s.bimodal.to_string(),
            ]
        })
        .collect();
    (header, rows)
}
