//! Intraday activity shape: is trading heavier near the open and close?

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::stats::mean;
use crate::calendar::TradingCalendar;
use crate::error::{Error, Result};
use crate::types::{SimTime, MICROS_PER_SECOND};

pub const BIN_US: u64 = 10 * MICROS_PER_SECOND;
pub const EDGE_US: u64 = 300 * MICROS_PER_SECOND;
pub const MIN_EVENTS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmileResult {
    pub pass: bool,
    pub events: usize,
    /// Mann-Whitney U of edge bins against the rest.
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
    pub edge_mean: f64,
    pub middle_mean: f64,
}

/// Bins the day's events into 10 s buckets and tests, one-sided, whether
/// the buckets in the first and last five minutes hold more events than
/// the rest of the session.
pub fn activity_smile_test(times: &[SimTime], calendar: &TradingCalendar, day: u64, alpha: f64) -> Result<SmileResult> {
    let open = calendar.session_open(day).as_micros();
    let close = calendar.session_close(day).as_micros();
    let nbins = ((close - open) / BIN_US) as usize;
    let edge_bins = (EDGE_US / BIN_US) as usize;
    if nbins <= 2 * edge_bins {
        return Err(Error::InvalidInput("session too short for the activity test".into()));
    }
    let mut counts = vec![0.0; nbins];
    let mut events = 0;
    for t in times {
        let t = t.as_micros();
        if t >= open && t < open + nbins as u64 * BIN_US {
            counts[((t - open) / BIN_US) as usize] += 1.0;
            events += 1;
        }
    }
    if events < MIN_EVENTS {
        return Err(Error::InsufficientData(format!("{events} events in the session")));
    }
    let is_edge = |i: usize| i < edge_bins || i >= nbins - edge_bins;
    let edge: Vec<f64> = (0..nbins).filter(|&i| is_edge(i)).map(|i| counts[i]).collect();
    let middle: Vec<f64> = (0..nbins).filter(|&i| !is_edge(i)).map(|i| counts[i]).collect();
    let (u, z, p) = mann_whitney_greater(&edge, &middle);
    Ok(SmileResult { pass: p < alpha, events, u, z, p_value: p, edge_mean: mean(&edge), middle_mean: mean(&middle) })
}

/// One-sided Mann-Whitney test that `x` tends to exceed `y`, using the
/// tie-corrected normal approximation. Returns `(u, z, p)`.
pub fn mann_whitney_greater(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let mut all: Vec<(f64, bool)> = x.iter().map(|v| (*v, true)).chain(y.iter().map(|v| (*v, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = all.len();
    let mut rank_sum_x = 0.0;
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        let t = (j - i) as f64;
        ties += t * t * t - t;
        rank_sum_x += avg * all[i..j].iter().filter(|a| a.1).count() as f64;
        i = j;
    }
    let u = rank_sum_x - n1 * (n1 + 1.0) / 2.0;
    let nn = n as f64;
    let var = n1 * n2 / 12.0 * ((nn + 1.0) - ties / (nn * (nn - 1.0)));
    if var <= 0.0 {
        return (u, 0.0, 1.0);
    }
    let z = (u - n1 * n2 / 2.0) / var.sqrt();
    let p = 1.0 - Normal::standard().cdf(z);
    (u, z, p)
}
