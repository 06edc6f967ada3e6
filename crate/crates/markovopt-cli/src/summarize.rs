//! Seed aggregation: groups run rows by (experiment, method, step,
//! metric_name) and emits the mean with a 95% confidence half-width
//! `1.96 * std / sqrt(k)` (sample standard deviation, `n - 1` denominator;
//! zero for single-seed groups).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::runner::{read_rows, CsvRow};
use crate::Result;

pub const SUMMARY_HEADER: &str = "experiment,method,x,metric_name,mean,ci95_half";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: String,
    /// Cumulative-sample mark or swept parameter value, as written by the
    /// runner.
    pub x: String,
    pub metric_name: String,
    pub mean: f64,
    pub ci95_half: f64,
}

#[derive(Debug, Default)]
pub struct SummarizeReport {
    pub input_rows: usize,
    pub groups: usize,
    pub warnings: Vec<String>,
}

pub fn summarize_rows(rows: &[CsvRow]) -> (Vec<SummaryRow>, SummarizeReport) {
    let mut groups: BTreeMap<(String, String, String, String), Vec<f64>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((
                row.experiment.clone(),
                row.method.clone(),
                row.step.clone(),
                row.metric_name.clone(),
            ))
            .or_default()
            .push(row.metric_value);
    }
    let mut report = SummarizeReport {
        input_rows: rows.len(),
        groups: groups.len(),
        warnings: Vec::new(),
    };
    let mut out: Vec<SummaryRow> = Vec::with_capacity(groups.len());
    for ((experiment, method, x, metric_name), values) in groups {
        let k = values.len();
        let mean = values.iter().sum::<f64>() / k as f64;
        let ci95_half = if k > 1 {
            let var =
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k as f64 - 1.0);
            1.96 * var.sqrt() / (k as f64).sqrt()
        } else {
            report.warnings.push(format!(
                "group ({experiment}, {method}, {x}, {metric_name}) has a single value; \
                 confidence half-width set to 0"
            ));
            0.0
        };
        out.push(SummaryRow {
            experiment,
            method,
            x,
            metric_name,
            mean,
            ci95_half,
        });
    }
    // BTreeMap ordered the x column lexicographically; reorder numerically
    // so sample marks line up (`2000` before `10000`).
    out.sort_by(|a, b| {
        (&a.experiment, &a.method)
            .cmp(&(&b.experiment, &b.method))
            .then_with(|| match (a.x.parse::<f64>(), b.x.parse::<f64>()) {
                (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
                _ => a.x.cmp(&b.x),
            })
            .then_with(|| a.metric_name.cmp(&b.metric_name))
    });
    (out, report)
}

/// Summarizes a run CSV into a summary CSV.
pub fn summarize_file(input: &Path, output: &Path) -> Result<SummarizeReport> {
    let rows = read_rows(input)?;
    let (summary, report) = summarize_rows(&rows);
    let tmp = output.with_extension("csv.tmp");
    let write = || -> Result<()> {
        let file = fs::File::create(&tmp)?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{SUMMARY_HEADER}")?;
        for row in &summary {
            writeln!(
                out,
                "{},{},{},{},{:.16e},{:.16e}",
                row.experiment, row.method, row.x, row.metric_name, row.mean, row.ci95_half
            )?;
        }
        out.flush()?;
        Ok(())
    };
    if let Err(e) = write() {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, output)?;
    for warning in &report.warnings {
        log::warn!("{warning}");
    }
    Ok(report)
}
