//! Return series and how they are sampled from simulator output.

use serde::{Deserialize, Serialize};

use crate::calendar::TradingCalendar;
use crate::error::{Error, Result};
use crate::message::Body;
use crate::observer::FeedRecord;
use crate::types::{SimTime, SymbolId, MICROS_PER_SECOND};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Sampling {
    /// Last trade price at the end of each fixed interval.
    LastTrade { interval_us: u64 },
    /// Consecutive closes of an OHLCV file.
    Close,
}

/// Log returns of a price series. `times[i]` is the end of return `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub times: Vec<f64>,
    pub returns: Vec<f64>,
    /// Volume traded over each return interval, when known.
    pub volumes: Option<Vec<f64>>,
    pub sampling: Sampling,
}

impl ReturnSeries {
    /// Builds returns from prices observed at `times`. `volumes` is aligned
    /// with prices; the first entry is dropped.
    pub fn from_prices(times: &[f64], prices: &[f64], volumes: Option<&[f64]>, sampling: Sampling) -> Result<Self> {
        if times.len() != prices.len() || volumes.is_some_and(|v| v.len() != prices.len()) {
            return Err(Error::InvalidInput("price, time and volume lengths differ".into()));
        }
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidInput(format!("price {p} is not positive")));
        }
        let returns: Vec<f64> = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        let s = ReturnSeries {
            times: times[1..].to_vec(),
            returns,
            volumes: volumes.map(|v| v[1..].to_vec()),
            sampling,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.returns.len() < 2 {
            return Err(Error::InsufficientData(format!("{} returns", self.returns.len())));
        }
        if self.returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInput("non-finite return".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

/// Samples the consolidated trade feed of one symbol at a fixed interval
/// during each trading session. Each day starts at its first trade; returns
/// never span the overnight gap.
pub fn sample_last_trade(records: &[FeedRecord], symbol: SymbolId, calendar: &TradingCalendar, interval_us: u64) -> Result<ReturnSeries> {
    if interval_us == 0 {
        return Err(Error::InvalidInput("sampling interval must be positive".into()));
    }
    let mut trades: Vec<(SimTime, f64, f64)> = records
        .iter()
        .filter(|r| r.symbol == symbol)
        .filter_map(|r| match &r.body {
            Body::Trade(t) => Some((r.observer_time, t.price.as_dollars(), t.shares as f64)),
            _ => None,
        })
        .collect();
    trades.sort_by_key(|t| t.0);

    let mut out = ReturnSeries { times: Vec::new(), returns: Vec::new(), volumes: Some(Vec::new()), sampling: Sampling::LastTrade { interval_us } };
    let vols = out.volumes.as_mut().expect("set above");
    let mut i = 0;
    while i < trades.len() {
        let day = trades[i].0.day();
        let open = calendar.session_open(day).as_micros();
        let close = calendar.session_close(day).as_micros();
        let mut last: Option<f64> = None;
        let mut t = open + interval_us;
        while t <= close {
            let mut volume = 0.0;
            let mut price = last;
            while i < trades.len() && trades[i].0.day() == day && trades[i].0.as_micros() <= t {
                volume += trades[i].2;
                price = Some(trades[i].1);
                i += 1;
            }
            if let (Some(prev), Some(p)) = (last, price) {
                out.times.push(t as f64 / MICROS_PER_SECOND as f64);
                out.returns.push((p / prev).ln());
                vols.push(volume);
            }
            last = price;
            t += interval_us;
        }
        // Trades after the close are not sampled.
        while i < trades.len() && trades[i].0.day() == day {
            i += 1;
        }
    }
    out.validate()?;
    Ok(out)
}

/// One-second sampling, used for simulator output.
pub const DEFAULT_INTERVAL_US: u64 = MICROS_PER_SECOND;
