//! CSV tables: run records, per-frame records, scene quality triples, and
//! scripted clearance predictions.
//!
//! Each format has a fixed header, checked verbatim; data errors report the
//! 1-based line number of the offending row. Parsers take strings, `load_*`
//! variants read files, and the `*_to_csv` writers round-trip with their
//! parsers.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::diagnostics::{FrameRecord, RunRecord};
use crate::error::{Error, Result};
use crate::gating::SceneQuality;
use crate::proxy::ScriptedTable;

pub const RUN_RECORDS_HEADER: [&str; 5] = ["method", "N", "scene_id", "metric", "coverage_fraction"];
pub const FRAME_RECORDS_HEADER: [&str; 5] = ["method", "N", "scene_id", "novelty", "metric"];
pub const QUALITY_HEADER: [&str; 4] = ["scene_id", "psnr", "ssim", "lpips"];
pub const SCRIPTED_HEADER: [&str; 3] = ["episode", "step", "predicted_clearance"];

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(context: &str, rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(context, 1, e.to_string()))?;
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(Error::parse(
            context,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

/// Parses rows of one CSV format, attaching the source line to every error.
fn parse_rows<T, R>(
    context: &str,
    text: &str,
    expected_header: &[&str],
    mut convert: impl FnMut(T, usize) -> Result<R>,
) -> Result<Vec<R>>
where
    T: for<'de> Deserialize<'de>,
{
    let mut rdr = reader(text);
    check_header(context, &mut rdr, expected_header)?;
    let headers = rdr.headers().unwrap().clone();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(context, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: T = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(context, line, e.to_string()))?;
        out.push(convert(row, line)?);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct RunRow {
    method: String,
    #[serde(rename = "N")]
    n: usize,
    scene_id: String,
    metric: f64,
    coverage_fraction: f64,
}

/// Parses `method,N,scene_id,metric,coverage_fraction` rows.
pub fn parse_run_records(text: &str) -> Result<Vec<RunRecord>> {
    parse_rows("run records csv", text, &RUN_RECORDS_HEADER, |row: RunRow, line| {
        let record = RunRecord {
            method: row.method,
            budget: row.n,
            scene_id: row.scene_id,
            metric_value: row.metric,
            coverage_fraction: row.coverage_fraction,
            novelty_values: None,
        };
        record
            .validate()
            .map_err(|e| Error::parse("run records csv", line, e.to_string()))?;
        Ok(record)
    })
}

pub fn load_run_records(path: &Path) -> Result<Vec<RunRecord>> {
    parse_run_records(&std::fs::read_to_string(path)?)
}

/// Emits run records in the header order `parse_run_records` accepts.
pub fn run_records_to_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RUN_RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.method.as_str(),
            &r.budget.to_string(),
            r.scene_id.as_str(),
            &r.metric_value.to_string(),
            &r.coverage_fraction.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("csv is utf-8"))
}

#[derive(Deserialize)]
struct FrameRow {
    method: String,
    #[serde(rename = "N")]
    n: usize,
    scene_id: String,
    novelty: f64,
    metric: f64,
}

/// Parses `method,N,scene_id,novelty,metric` rows (per-frame data).
pub fn parse_frame_records(text: &str) -> Result<Vec<FrameRecord>> {
    parse_rows("frame records csv", text, &FRAME_RECORDS_HEADER, |row: FrameRow, line| {
        if !row.novelty.is_finite() || !row.metric.is_finite() {
            return Err(Error::parse(
                "frame records csv",
                line,
                "novelty and metric must be finite",
            ));
        }
        Ok(FrameRecord {
            method: row.method,
            budget: row.n,
            scene_id: row.scene_id,
            novelty: row.novelty,
            metric_value: row.metric,
        })
    })
}

pub fn load_frame_records(path: &Path) -> Result<Vec<FrameRecord>> {
    parse_frame_records(&std::fs::read_to_string(path)?)
}

/// Emits frame records in the header order `parse_frame_records` accepts.
pub fn frame_records_to_csv(records: &[FrameRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FRAME_RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.method.as_str(),
            &r.budget.to_string(),
            r.scene_id.as_str(),
            &r.novelty.to_string(),
            &r.metric_value.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("csv is utf-8"))
}

#[derive(Deserialize)]
struct QualityRow {
    scene_id: String,
    psnr: f64,
    ssim: f64,
    lpips: f64,
}

/// Parses `scene_id,psnr,ssim,lpips` rows of teacher quality triples.
pub fn parse_quality(text: &str) -> Result<Vec<SceneQuality>> {
    parse_rows("quality csv", text, &QUALITY_HEADER, |row: QualityRow, line| {
        if ![row.psnr, row.ssim, row.lpips].iter().all(|v| v.is_finite()) {
            return Err(Error::parse("quality csv", line, "quality values must be finite"));
        }
        Ok(SceneQuality {
            scene_id: row.scene_id,
            psnr_db: row.psnr,
            ssim: row.ssim,
            lpips: row.lpips,
        })
    })
}

pub fn load_quality(path: &Path) -> Result<Vec<SceneQuality>> {
    parse_quality(&std::fs::read_to_string(path)?)
}

#[derive(Deserialize)]
struct ScriptedRow {
    episode: u64,
    step: u64,
    predicted_clearance: f64,
}

/// Parses `episode,step,predicted_clearance` rows into a scripted table.
/// Duplicate (episode, step) keys are ambiguous and rejected.
pub fn parse_scripted(text: &str) -> Result<ScriptedTable> {
    let rows = parse_rows("scripted csv", text, &SCRIPTED_HEADER, |row: ScriptedRow, line| {
        if row.predicted_clearance.is_nan() {
            return Err(Error::parse("scripted csv", line, "prediction must not be NaN"));
        }
        Ok((row, line))
    })?;
    let mut seen: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for (row, line) in &rows {
        if let Some(first) = seen.insert((row.episode, row.step), *line) {
            return Err(Error::parse(
                "scripted csv",
                *line,
                format!(
                    "duplicate entry for episode {} step {} (first at line {first})",
                    row.episode, row.step
                ),
            ));
        }
    }
    Ok(ScriptedTable::from_entries(
        rows.into_iter()
            .map(|(r, _)| (r.episode, r.step, r.predicted_clearance)),
    ))
}

pub fn load_scripted(path: &Path) -> Result<ScriptedTable> {
    parse_scripted(&std::fs::read_to_string(path)?)
}
