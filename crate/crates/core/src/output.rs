//! Table and heatmap writers.
//!
//! Numbers are written with six significant digits so repeated runs produce
//! byte-identical files.

use std::io::Write;

use serde::Serialize;

use crate::experiments::{CalibrationReport, HeatmapCell};
use crate::metrics::MetricsRow;

pub const SIGNIFICANT_DIGITS: usize = 6;

/// Formats `x` with six significant digits in plain decimal notation.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded = round_sig(x);
    let exponent = rounded.abs().log10().floor() as i32;
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exponent).max(0) as usize;
    let s = format!("{rounded:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".into()
    } else {
        s
    }
}

/// `x` rounded to six significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    s.parse().expect("scientific notation parses")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

/// A metrics row labelled with the experiment that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TableRow {
    pub experiment: String,
    #[serde(flatten)]
    pub row: MetricsRow,
}

impl TableRow {
    pub fn new(experiment: impl Into<String>, row: MetricsRow) -> Self {
        TableRow {
            experiment: experiment.into(),
            row,
        }
    }

    fn rounded(&self) -> Self {
        let r = &self.row;
        TableRow {
            experiment: self.experiment.clone(),
            row: MetricsRow {
                speaker: r.speaker.clone(),
                p_truthful: round_sig(r.p_truthful),
                pi_optimal: round_sig(r.pi_optimal),
                r_local: r.r_local.map(round_sig),
                r_generalization: r.r_generalization.map(round_sig),
            },
        }
    }
}

pub fn write_table_csv<W: Write>(out: W, rows: &[TableRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["experiment", "speaker", "p_truthful", "pi_optimal", "r_local", "r_generalization"])?;
    for t in rows {
        w.write_record([
            t.experiment.clone(),
            t.row.speaker.clone(),
            format_sig(t.row.p_truthful),
            format_sig(t.row.pi_optimal),
            opt(t.row.r_local),
            opt(t.row.r_generalization),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_json<W: Write>(mut out: W, rows: &[TableRow]) -> std::io::Result<()> {
    let rounded: Vec<TableRow> = rows.iter().map(TableRow::rounded).collect();
    serde_json::to_writer_pretty(&mut out, &rounded)?;
    writeln!(out)
}

pub fn write_heatmap_csv<W: Write>(out: W, cells: &[HeatmapCell]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["speaker", "feature", "value", "probability", "is_true"])?;
    for c in cells {
        w.write_record([
            c.speaker.clone(),
            c.feature.clone(),
            format_sig(c.value),
            format_sig(c.probability),
            c.is_true.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_heatmap_json<W: Write>(mut out: W, cells: &[HeatmapCell]) -> std::io::Result<()> {
    let rounded: Vec<HeatmapCell> = cells
        .iter()
        .map(|c| HeatmapCell {
            value: round_sig(c.value),
            probability: round_sig(c.probability),
            ..c.clone()
        })
        .collect();
    serde_json::to_writer_pretty(&mut out, &rounded)?;
    writeln!(out)
}

/// One line per matching candidate, closest first.
pub fn write_calibration_csv<W: Write>(out: W, report: &CalibrationReport, feature_names: &[&str]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["rank".into()];
    header.extend(feature_names.iter().map(|n| n.to_string()));
    header.extend(["value_set", "max_deviation", "held_out_context", "held_out_deviation"].map(String::from));
    w.write_record(&header)?;
    for (i, c) in report.matches.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(c.weights.iter().map(|x| format_sig(*x)));
        rec.push(c.value_set.iter().map(|x| format_sig(*x)).collect::<Vec<_>>().join(" "));
        rec.push(format_sig(c.max_deviation));
        rec.push(c.held_out_context.clone().unwrap_or_default());
        rec.push(opt(c.held_out_deviation));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_calibration_json<W: Write>(mut out: W, report: &CalibrationReport) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)
}

/// Fixed-width table for terminals.
pub fn render_table(rows: &[TableRow]) -> String {
    let cell = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    let mut s = format!(
        "{:<14} {:<10} {:>10} {:>10} {:>10} {:>10}\n",
        "experiment", "speaker", "P(true)", "pi(a*)", "R(A)", "R(all)"
    );
    for t in rows {
        s.push_str(&format!(
            "{:<14} {:<10} {:>10} {:>10} {:>10} {:>10}\n",
            t.experiment,
            t.row.speaker,
            cell(Some(t.row.p_truthful)),
            cell(Some(t.row.pi_optimal)),
            cell(t.row.r_local),
            cell(t.row.r_generalization),
        ));
    }
    s
}
