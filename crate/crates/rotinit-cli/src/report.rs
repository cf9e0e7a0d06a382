//! Report emission: deterministic records + summaries, timing sidecar.
//!
//! `records.csv` and `summary.json` are byte-reproducible for a fixed seed;
//! wall-clock numbers live in `timing.csv` only.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::json;

use crate::sweep::{Classification, OutcomeRecord, SweepResult};
use rotinit::stats::{iqr, median};

pub const REPORT_SCHEMA_VERSION: u64 = 1;

/// Stable cell key: window size, deformation, mode.
fn cell_key(r: &OutcomeRecord) -> (usize, String, &'static str) {
    // Deformation formatted through Display keeps the key readable and
    // deterministic.
    (r.window_size, format!("{}", r.deformation_deg), r.mode)
}

pub fn records_csv(result: &SweepResult) -> String {
    let mut out = format!(
        "# schema_version = {REPORT_SCHEMA_VERSION}\n# segment,window_size,deformation_deg,mode,repetition,success,converged,pass_rate,bias_error_pct,bias_error_absolute,extrinsic_error_deg,pairwise_error_deg,classification\n"
    );
    for r in &result.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.segment,
            r.window_size,
            r.deformation_deg,
            r.mode,
            r.repetition,
            r.success as u8,
            r.converged as u8,
            r.pass_rate,
            r.bias_error_pct,
            r.bias_error_absolute as u8,
            r.extrinsic_error_deg,
            r.pairwise_error_deg,
            r.classification().as_str(),
        ));
    }
    out
}

pub fn timing_csv(result: &SweepResult) -> String {
    let mut out = format!(
        "# schema_version = {REPORT_SCHEMA_VERSION}\n# wall-clock stage times (ms); non-deterministic by nature\n# window_size,deformation_deg,mode,cells,assembly_ms,solve_ms,reintegration_ms,weighting_ms,lm_ms\n"
    );
    let mut cells: BTreeMap<(usize, String, &'static str), Vec<&OutcomeRecord>> = BTreeMap::new();
    for r in &result.records {
        cells.entry(cell_key(r)).or_default().push(r);
    }
    for ((ws, deform, mode), rs) in cells {
        let n = rs.len() as f64;
        let mean = |f: fn(&OutcomeRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
        out.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
            ws,
            deform,
            mode,
            rs.len(),
            mean(|r| r.assembly_ms),
            mean(|r| r.solve_ms),
            mean(|r| r.reintegration_ms),
            mean(|r| r.weighting_ms),
            mean(|r| r.lm_ms),
        ));
    }
    out
}

/// Per-cell aggregates mirroring the robustness-table layout: median/IQR of
/// each error plus good / detected-bad / non-detected-bad percentages.
pub fn summary_json(result: &SweepResult) -> serde_json::Value {
    let mut cells: BTreeMap<(usize, String, &'static str), Vec<&OutcomeRecord>> = BTreeMap::new();
    for r in &result.records {
        cells.entry(cell_key(r)).or_default().push(r);
    }
    let mut cell_values = Vec::new();
    for ((ws, deform, mode), rs) in cells {
        let bias: Vec<f64> = rs.iter().map(|r| r.bias_error_pct).collect();
        let ext: Vec<f64> = rs.iter().map(|r| r.extrinsic_error_deg).collect();
        let pairwise: Vec<f64> = rs.iter().map(|r| r.pairwise_error_deg).collect();
        let n = rs.len() as f64;
        let share = |class: Classification| {
            100.0 * rs.iter().filter(|r| r.classification() == class).count() as f64 / n
        };
        cell_values.push(json!({
            "window_size": ws,
            "deformation_deg": deform.parse::<f64>().unwrap_or(f64::NAN),
            "mode": mode,
            "cells": rs.len(),
            "bias_error_pct": {"median": median(&bias), "iqr": iqr(&bias)},
            "extrinsic_error_deg": {"median": median(&ext), "iqr": iqr(&ext)},
            "pairwise_error_deg": {"median": median(&pairwise), "iqr": iqr(&pairwise)},
            "good_pct": share(Classification::Good),
            "detected_bad_pct": share(Classification::DetectedBad),
            "non_detected_bad_pct": share(Classification::NonDetectedBad),
        }));
    }
    json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "segments_used": result.used_segments.len(),
        "segments_filtered": result.filtered_segments,
        "min_excitation_deg": result.min_excitation_deg,
        "records": result.records.len(),
        "cells": cell_values,
    })
}

pub fn write_reports(result: &SweepResult, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("records.csv"), records_csv(result))?;
    std::fs::write(dir.join("timing.csv"), timing_csv(result))?;
    let summary = summary_json(result);
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

/// Re-aggregates an existing records.csv (the `report` subcommand).
pub fn parse_records_csv(text: &str) -> Result<SweepResult, String> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 13 {
            return Err(format!(
                "line {}: expected 13 columns, got {}",
                idx + 1,
                cols.len()
            ));
        }
        let parse_f = |i: usize| -> Result<f64, String> {
            cols[i]
                .parse()
                .map_err(|_| format!("line {}: bad float '{}'", idx + 1, cols[i]))
        };
        let parse_u = |i: usize| -> Result<usize, String> {
            cols[i]
                .parse()
                .map_err(|_| format!("line {}: bad integer '{}'", idx + 1, cols[i]))
        };
        let mode = match cols[3] {
            "none" => "none",
            "lambda" => "lambda",
            "fp" => "fp",
            "combined" => "combined",
            other => return Err(format!("line {}: unknown mode '{other}'", idx + 1)),
        };
        records.push(OutcomeRecord {
            segment: parse_u(0)?,
            window_size: parse_u(1)?,
            deformation_deg: parse_f(2)?,
            mode,
            repetition: parse_u(4)?,
            success: cols[5] == "1",
            converged: cols[6] == "1",
            pass_rate: parse_f(7)?,
            bias_error_pct: parse_f(8)?,
            bias_error_absolute: cols[9] == "1",
            extrinsic_error_deg: parse_f(10)?,
            pairwise_error_deg: parse_f(11)?,
            assembly_ms: 0.0,
            solve_ms: 0.0,
            reintegration_ms: 0.0,
            weighting_ms: 0.0,
            lm_ms: 0.0,
        });
    }
    Ok(SweepResult {
        records,
        used_segments: Vec::new(),
        filtered_segments: 0,
        min_excitation_deg: f64::NAN,
    })
}
