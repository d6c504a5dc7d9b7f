//! Disagreements between the SIP's NBBO and the best prices seen directly
//! on the exchange feeds, both measured at the observer.

use serde::{Deserialize, Serialize};

use super::stats::{mean, median};
use crate::calendar::TradingCalendar;
use crate::error::{Error, Result};
use crate::message::Body;
use crate::observer::{FeedRecord, OBSERVER_ROUND_LOT};
use crate::quotes::BestQuoteBook;
use crate::types::{Price, Side, SimTime, SymbolId};

/// Best bid and offer as of `time`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BboPoint {
    pub time: SimTime,
    pub bid: Option<Price>,
    pub offer: Option<Price>,
}

impl BboPoint {
    fn side(&self, side: Side) -> Option<Price> {
        match side {
            Side::Bid => self.bid,
            Side::Offer => self.offer,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DislocationSegment {
    pub symbol: SymbolId,
    pub side: Side,
    pub start: SimTime,
    pub end: SimTime,
    pub duration_us: u64,
    /// Largest absolute price difference during the segment.
    pub magnitude: Price,
}

fn check_sorted(points: &[BboPoint], end: SimTime, what: &str) -> Result<()> {
    if points.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(Error::InvalidInput(format!("{what} stream is not sorted by time")));
    }
    if points.last().is_some_and(|p| p.time > end) {
        return Err(Error::InvalidInput(format!("{what} stream extends past the end time")));
    }
    Ok(())
}

/// A side is dislocated while both prices exist and differ. Segments still
/// open at `end` are closed there.
pub fn detect_dislocations(symbol: SymbolId, nbbo: &[BboPoint], direct: &[BboPoint], end: SimTime) -> Result<Vec<DislocationSegment>> {
    check_sorted(nbbo, end, "nbbo")?;
    check_sorted(direct, end, "direct")?;
    let mut out = Vec::new();
    for side in [Side::Bid, Side::Offer] {
        let (mut i, mut j) = (0, 0);
        let (mut a, mut b): (Option<Price>, Option<Price>) = (None, None);
        let mut open: Option<(SimTime, i64)> = None;
        while i < nbbo.len() || j < direct.len() {
            let t = match (nbbo.get(i), direct.get(j)) {
                (Some(x), Some(y)) => x.time.min(y.time),
                (Some(x), None) => x.time,
                (None, Some(y)) => y.time,
                (None, None) => unreachable!(),
            };
            while i < nbbo.len() && nbbo[i].time == t {
                a = nbbo[i].side(side);
                i += 1;
            }
            while j < direct.len() && direct[j].time == t {
                b = direct[j].side(side);
                j += 1;
            }
            let diff = match (a, b) {
                (Some(x), Some(y)) if x != y => Some((x - y).subticks().abs()),
                _ => None,
            };
            match (diff, open.as_mut()) {
                (Some(d), Some((_, mag))) => *mag = (*mag).max(d),
                (Some(d), None) => open = Some((t, d)),
                (None, Some(&mut (start, mag))) => {
                    out.push(segment(symbol, side, start, t, mag));
                    open = None;
                }
                (None, None) => {}
            }
        }
        if let Some((start, mag)) = open {
            if end > start {
                out.push(segment(symbol, side, start, end, mag));
            }
        }
    }
    Ok(out)
}

fn segment(symbol: SymbolId, side: Side, start: SimTime, end: SimTime, mag: i64) -> DislocationSegment {
    DislocationSegment { symbol, side, start, end, duration_us: end.saturating_since(start), magnitude: Price::from_subticks(mag) }
}

/// Rebuilds the round-lot direct best quote and the NBBO for every symbol
/// from observer records and detects dislocations within each session.
pub fn feed_dislocations(records: &[FeedRecord], symbols: usize, calendar: &TradingCalendar) -> Result<Vec<DislocationSegment>> {
    let mut relevant: Vec<&FeedRecord> = records.iter().filter(|r| matches!(r.body, Body::Quote(_) | Body::Nbbo(_))).collect();
    relevant.sort_by_key(|r| r.observer_time);
    let mut out = Vec::new();
    let mut k = 0;
    while k < relevant.len() {
        let day = relevant[k].observer_time.day();
        let end = relevant[k..].iter().position(|r| r.observer_time.day() != day).map_or(relevant.len(), |n| k + n);
        let day_records = &relevant[k..end];
        k = end;
        if !calendar.is_trading_day(day) {
            continue;
        }
        let open = calendar.session_open(day);
        let close = calendar.session_close(day);
        let mut book = BestQuoteBook::new(symbols, OBSERVER_ROUND_LOT);
        let mut nbbo = vec![Vec::new(); symbols];
        let mut direct = vec![Vec::new(); symbols];
        for r in day_records {
            let t = r.observer_time;
            if t < open || t >= close || r.symbol.index() >= symbols {
                continue;
            }
            let s = r.symbol.index();
            match &r.body {
                Body::Quote(q) => {
                    book.update(r.symbol, r.source, *q);
                    let best = book.best(r.symbol).quote;
                    direct[s].push(BboPoint { time: t, bid: best.bid_price, offer: best.offer_price });
                }
                Body::Nbbo(n) => nbbo[s].push(BboPoint { time: t, bid: n.quote.bid_price, offer: n.quote.offer_price }),
                _ => {}
            }
        }
        for s in 0..symbols {
            out.extend(detect_dislocations(SymbolId(s as u16), &nbbo[s], &direct[s], close)?);
        }
    }
    out.sort_by_key(|d| (d.start, d.symbol, d.side == Side::Offer));
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DislocationSummary {
    pub count: usize,
    pub days: usize,
    pub per_day: f64,
    pub mean_duration_us: f64,
    pub median_duration_us: f64,
    /// Dollars.
    pub mean_magnitude: f64,
    pub median_magnitude: f64,
    pub max_magnitude: f64,
}

pub fn summarize(segments: &[DislocationSegment], days: usize) -> DislocationSummary {
    if segments.is_empty() {
        return DislocationSummary { days, ..Default::default() };
    }
    let durations: Vec<f64> = segments.iter().map(|s| s.duration_us as f64).collect();
    let mags: Vec<f64> = segments.iter().map(|s| s.magnitude.as_dollars()).collect();
    DislocationSummary {
        count: segments.len(),
        days,
        per_day: segments.len() as f64 / days.max(1) as f64,
        mean_duration_us: mean(&durations),
        median_duration_us: median(&durations),
        mean_magnitude: mean(&mags),
        median_magnitude: median(&mags),
        max_magnitude: mags.iter().copied().fold(0.0, f64::max),
    }
}
