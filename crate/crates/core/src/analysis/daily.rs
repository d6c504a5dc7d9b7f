//! Per-day trading activity counts.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::dislocations::DislocationSegment;
use crate::calendar::TradingCalendar;
use crate::message::Body;
use crate::observer::FeedRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyStats {
    pub day: u64,
    pub date: NaiveDate,
    pub trades: u64,
    pub mean_shares_per_trade: f64,
    pub quotes: u64,
    pub nbbo: u64,
    pub dislocations: u64,
}

/// Counts feed messages by the day the observer received them. `days`
/// lists the days to report, so days without traffic show up as zeros.
pub fn daily_stats(records: &[FeedRecord], dislocations: &[DislocationSegment], calendar: &TradingCalendar, days: &[u64]) -> Vec<DailyStats> {
    days.iter()
        .map(|&day| {
            let mut s = DailyStats { day, date: calendar.date_of(day), trades: 0, mean_shares_per_trade: 0.0, quotes: 0, nbbo: 0, dislocations: 0 };
            let mut shares = 0u64;
            for r in records.iter().filter(|r| r.observer_time.day() == day) {
                match &r.body {
                    Body::Trade(t) => {
                        s.trades += 1;
                        shares += t.shares as u64;
                    }
                    Body::Quote(_) => s.quotes += 1,
                    Body::Nbbo(_) => s.nbbo += 1,
                    _ => {}
                }
            }
            if s.trades > 0 {
                s.mean_shares_per_trade = shares as f64 / s.trades as f64;
            }
            s.dislocations = dislocations.iter().filter(|d| d.start.day() == day).count() as u64;
            s
        })
        .collect()
}

/// The first `n` trading days of the calendar.
pub fn trading_days(calendar: &TradingCalendar, n: u32) -> Vec<u64> {
    (1..=n).map(|i| calendar.nth_trading_day(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{QuoteMsg, TradeMsg};
    use crate::types::{AgentId, Price, Side, SimTime, SymbolId, MICROS_PER_DAY};

    fn rec(day: u64, body: Body) -> FeedRecord {
        let t = SimTime::from_micros(day * MICROS_PER_DAY + 40_000_000_000);
        FeedRecord { observer_time: t, send_time: t, source: AgentId(0), symbol: SymbolId(0), body }
    }

    fn trade(shares: u32) -> Body {
        Body::Trade(TradeMsg { sequence_number: 0, price: Price::from_cents(100), shares, triggering_side: Side::Bid, iso: false })
    }

    #[test]
    fn counts_and_means() {
        let cal = TradingCalendar::new(NaiveDate::from_ymd_opt(2021, 4, 5).unwrap());
        let records = vec![rec(0, trade(100)), rec(0, trade(200)), rec(0, trade(300)), rec(0, Body::Quote(QuoteMsg::default()))];
        let days = trading_days(&cal, 2);
        assert_eq!(days, vec![0, 1]);
        let s = daily_stats(&records, &[], &cal, &days);
        assert_eq!(s[0].trades, 3);
        assert_eq!(s[0].mean_shares_per_trade, 200.0);
        assert_eq!(s[0].quotes, 1);
        assert_eq!((s[1].trades, s[1].quotes, s[1].nbbo, s[1].mean_shares_per_trade), (0, 0, 0, 0.0));
    }
}
