//! Runs the fact tests on real price data supplied as OHLCV CSV files.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::facts::{run_facts, six_fact_score, FactOutcome, FactParams, FACTS};
use super::series::{ReturnSeries, Sampling};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
struct OhlcvRow {
    timestamp: String,
    #[allow(dead_code)]
    open: f64,
    #[allow(dead_code)]
    high: f64,
    #[allow(dead_code)]
    low: f64,
    close: f64,
    volume: f64,
}

/// Seconds since the Unix epoch. Accepts epoch seconds or ISO-8601.
pub fn parse_timestamp(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        if v.is_finite() {
            return Ok(v);
        }
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.timestamp() as f64 + t.timestamp_subsec_micros() as f64 * 1e-6);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            let t = t.and_utc();
            return Ok(t.timestamp() as f64 + t.timestamp_subsec_micros() as f64 * 1e-6);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp() as f64);
    }
    Err(Error::InvalidInput(format!("unrecognised timestamp `{s}`")))
}

/// Close-to-close log returns, ordered by timestamp, with the volume of
/// the bar that ends each return.
pub fn read_ohlcv(path: &Path) -> Result<ReturnSeries> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    for h in ["timestamp", "open", "high", "low", "close", "volume"] {
        if !headers.iter().any(|x| x.trim() == h) {
            return Err(Error::InvalidInput(format!("{}: missing column `{h}`", path.display())));
        }
    }
    let mut rows = Vec::new();
    for row in reader.deserialize::<OhlcvRow>() {
        let row = row?;
        rows.push((parse_timestamp(&row.timestamp)?, row.close, row.volume));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let times: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let closes: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let volumes: Vec<f64> = rows.iter().map(|r| r.2).collect();
    ReturnSeries::from_prices(&times, &closes, Some(&volumes), Sampling::Close)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub file: PathBuf,
    pub returns: usize,
    /// Set when the file itself could not be used; every fact then fails.
    pub error: Option<String>,
    pub outcomes: Vec<FactOutcome>,
}

impl CalibrationRow {
    pub fn score(&self) -> u32 {
        six_fact_score(&self.outcomes)
    }
}

pub fn calibrate_file(path: &Path, params: &FactParams) -> CalibrationRow {
    match read_ohlcv(path) {
        Ok(s) => CalibrationRow { file: path.to_path_buf(), returns: s.len(), error: None, outcomes: run_facts(&FACTS, &s.returns, s.volumes.as_deref(), params) },
        Err(e) => {
            let msg = e.to_string();
            let outcomes = FACTS.iter().map(|&fact| FactOutcome { fact, result: Err(msg.clone()) }).collect();
            CalibrationRow { file: path.to_path_buf(), returns: 0, error: Some(msg), outcomes }
        }
    }
}

pub fn calibrate(paths: &[PathBuf], params: &FactParams) -> Vec<CalibrationRow> {
    paths.iter().map(|p| calibrate_file(p, params)).collect()
}

/// One row per file: pass flags per fact, the six-fact score, and a final
/// row with per-fact pass rates.
pub fn write_pass_table<W: Write>(rows: &[CalibrationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["file".to_string(), "returns".to_string()];
    header.extend(FACTS.iter().map(|f| format!("fact{f}")));
    header.push("score".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.file.display().to_string(), r.returns.to_string()];
        rec.extend(r.outcomes.iter().map(|o| u8::from(o.passed()).to_string()));
        rec.push(r.score().to_string());
        w.write_record(&rec)?;
    }
    if !rows.is_empty() {
        let mut rec = vec!["pass_rate".to_string(), String::new()];
        for (i, _) in FACTS.iter().enumerate() {
            let passed = rows.iter().filter(|r| r.outcomes[i].passed()).count();
            rec.push(format!("{:.3}", passed as f64 / rows.len() as f64));
        }
        let mean_score = rows.iter().map(|r| r.score() as f64).sum::<f64>() / rows.len() as f64;
        rec.push(format!("{mean_score:.3}"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
