//! Trading sessions: 09:30 to 16:00 on weekdays, minus configured holidays.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{SimTime, MICROS_PER_DAY, MICROS_PER_HOUR, MICROS_PER_MINUTE};

pub const DEFAULT_OPEN_MICROS: u64 = 9 * MICROS_PER_HOUR + 30 * MICROS_PER_MINUTE;
pub const DEFAULT_CLOSE_MICROS: u64 = 16 * MICROS_PER_HOUR;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Close,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradingCalendar {
    /// Calendar date of simulation day 0.
    pub epoch: NaiveDate,
    #[serde(default = "default_open")]
    pub open_micros: u64,
    #[serde(default = "default_close")]
    pub close_micros: u64,
    #[serde(default)]
    pub holidays: Vec<NaiveDate>,
}

fn default_open() -> u64 {
    DEFAULT_OPEN_MICROS
}

fn default_close() -> u64 {
    DEFAULT_CLOSE_MICROS
}

impl TradingCalendar {
    pub fn new(epoch: NaiveDate) -> Self {
        TradingCalendar { epoch, open_micros: DEFAULT_OPEN_MICROS, close_micros: DEFAULT_CLOSE_MICROS, holidays: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.open_micros >= self.close_micros || self.close_micros > MICROS_PER_DAY {
            return Err(Error::config("session open must precede close within one day"));
        }
        Ok(())
    }

    pub fn date_of(&self, day: u64) -> NaiveDate {
        self.epoch.checked_add_days(Days::new(day)).expect("date in range")
    }

    pub fn is_trading_day(&self, day: u64) -> bool {
        let date = self.date_of(day);
        !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) && !self.holidays.contains(&date)
    }

    pub fn session_open(&self, day: u64) -> SimTime {
        SimTime::from_micros(day * MICROS_PER_DAY + self.open_micros)
    }

    pub fn session_close(&self, day: u64) -> SimTime {
        SimTime::from_micros(day * MICROS_PER_DAY + self.close_micros)
    }

    /// Open boundary inclusive, close exclusive.
    pub fn is_trading_time(&self, t: SimTime) -> bool {
        let tod = t.time_of_day();
        self.is_trading_day(t.day()) && tod >= self.open_micros && tod < self.close_micros
    }

    fn next_trading_day(&self, from_day: u64) -> u64 {
        let mut day = from_day;
        // Bounded: any 7 consecutive days contain a weekday unless every one is a holiday.
        while !self.is_trading_day(day) {
            day += 1;
        }
        day
    }

    /// Earliest session open at or after `t`.
    pub fn next_open(&self, t: SimTime) -> SimTime {
        let mut day = self.next_trading_day(t.day());
        if self.session_open(day) < t {
            day = self.next_trading_day(day + 1);
        }
        self.session_open(day)
    }

    /// First open or close strictly after `t`.
    pub fn next_boundary(&self, t: SimTime) -> (SimTime, Boundary) {
        let mut day = self.next_trading_day(t.day());
        loop {
            if self.session_open(day) > t {
                return (self.session_open(day), Boundary::Open);
            }
            if self.session_close(day) > t {
                return (self.session_close(day), Boundary::Close);
            }
            day = self.next_trading_day(day + 1);
        }
    }

    /// Day index of the `n`-th trading day (1-based) counted from day 0.
    pub fn nth_trading_day(&self, n: u32) -> u64 {
        assert!(n >= 1);
        let mut day = self.next_trading_day(0);
        for _ in 1..n {
            day = self.next_trading_day(day + 1);
        }
        day
    }

    /// Whether `t` lies in the final 25 minutes of its session.
    pub fn in_closing_window(&self, t: SimTime) -> bool {
        t.time_of_day() >= self.close_micros.saturating_sub(25 * MICROS_PER_MINUTE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::MICROS_PER_SECOND;

    // 2021-04-05 is a Monday.
    fn cal() -> TradingCalendar {
        TradingCalendar::new(NaiveDate::from_ymd_opt(2021, 4, 5).unwrap())
    }

    fn at(day: u64, h: u64, m: u64) -> SimTime {
        SimTime::from_micros(day * MICROS_PER_DAY + h * MICROS_PER_HOUR + m * MICROS_PER_MINUTE)
    }

    #[test]
    fn session_membership() {
        let c = cal();
        assert!(c.is_trading_time(at(2, 9, 30)));
        assert!(!c.is_trading_time(at(2, 16, 0)));
        assert!(c.is_trading_time(SimTime::from_micros(at(2, 16, 0).as_micros() - 1)));
        assert!(!c.is_trading_time(at(5, 12, 0)));
        assert!(!c.is_trading_time(at(2, 9, 29)));
    }

    #[test]
    fn next_open_examples() {
        let c = cal();
        assert_eq!(c.next_open(at(4, 17, 0)), at(7, 9, 30));
        assert_eq!(c.next_open(at(2, 9, 0)), at(2, 9, 30));
        assert_eq!(c.next_open(at(2, 10, 0)), at(3, 9, 30));
        assert_eq!(c.next_open(at(2, 9, 30)), at(2, 9, 30));
    }

    #[test]
    fn holidays_are_skipped() {
        let mut c = cal();
        c.holidays.push(NaiveDate::from_ymd_opt(2021, 4, 6).unwrap());
        assert!(!c.is_trading_day(1));
        assert_eq!(c.next_open(at(0, 17, 0)), at(2, 9, 30));
        assert_eq!(c.nth_trading_day(2), 2);
    }

    #[test]
    fn boundaries_alternate() {
        let c = cal();
        let (t, b) = c.next_boundary(SimTime::ZERO);
        assert_eq!((t, b), (at(0, 9, 30), Boundary::Open));
        let (t, b) = c.next_boundary(t);
        assert_eq!((t, b), (at(0, 16, 0), Boundary::Close));
        let (t, _) = c.next_boundary(at(4, 16, 0));
        assert_eq!(t, at(7, 9, 30));
        assert_eq!(c.session_close(0).saturating_since(c.session_open(0)), 23_400 * MICROS_PER_SECOND);
    }

    #[test]
    fn closing_window() {
        let c = cal();
        assert!(!c.in_closing_window(at(0, 15, 34)));
        assert!(c.in_closing_window(at(0, 15, 35)));
    }
}
