//! Value types shared by every part of the simulator: time, money, identifiers.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MICROS_PER_SECOND: u64 = 1_000_000;
pub const MICROS_PER_MINUTE: u64 = 60 * MICROS_PER_SECOND;
pub const MICROS_PER_HOUR: u64 = 60 * MICROS_PER_MINUTE;
pub const MICROS_PER_DAY: u64 = 24 * MICROS_PER_HOUR;

/// Microseconds since the simulation epoch (midnight of the configured start date).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(micros: u64) -> Self {
        SimTime(micros)
    }

    pub const fn from_secs(secs: u64) -> Self {
        SimTime(secs * MICROS_PER_SECOND)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SECOND as f64
    }

    /// Day index relative to the epoch.
    pub const fn day(self) -> u64 {
        self.0 / MICROS_PER_DAY
    }

    /// Microseconds elapsed since midnight of the current day.
    pub const fn time_of_day(self) -> u64 {
        self.0 % MICROS_PER_DAY
    }

    pub const fn start_of_day(self) -> SimTime {
        SimTime(self.0 - self.0 % MICROS_PER_DAY)
    }

    pub fn saturating_since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }

    pub fn plus_micros(self, micros: u64) -> SimTime {
        SimTime(self.0.saturating_add(micros))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tod = self.time_of_day();
        write!(
            f,
            "d{}+{:02}:{:02}:{:02}.{:06}",
            self.day(),
            tod / MICROS_PER_HOUR,
            tod / MICROS_PER_MINUTE % 60,
            tod / MICROS_PER_SECOND % 60,
            tod % MICROS_PER_SECOND
        )
    }
}

/// Money in integer units of $0.0001 ("subticks").
///
/// Quotes live on the $0.01 grid (100 subticks), trades on the $0.001 grid
/// (10 subticks) and fees may use any subtick.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Price(i64);

impl Price {
    pub const ZERO: Price = Price(0);
    /// Subticks per dollar; recorded in run summaries as `price_scale`.
    pub const SCALE: i64 = 10_000;
    /// Quote tick, $0.01.
    pub const QUOTE_TICK: i64 = 100;
    /// Trade tick, $0.001.
    pub const TRADE_TICK: i64 = 10;

    pub const fn from_subticks(subticks: i64) -> Self {
        Price(subticks)
    }

    pub const fn from_cents(cents: i64) -> Self {
        Price(cents * Self::QUOTE_TICK)
    }

    pub const fn from_dollars(dollars: i64) -> Self {
        Price(dollars * Self::SCALE)
    }

    /// Nearest $0.01 to a floating-point dollar amount. Only used where a
    /// strategy's continuous belief becomes an order price.
    pub fn from_dollars_nearest_cent(dollars: f64) -> Self {
        Price((dollars * 100.0).round() as i64 * Self::QUOTE_TICK)
    }

    pub const fn subticks(self) -> i64 {
        self.0
    }

    pub fn as_dollars(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }

    pub const fn is_quote_aligned(self) -> bool {
        self.0 % Self::QUOTE_TICK == 0
    }

    pub const fn is_trade_aligned(self) -> bool {
        self.0 % Self::TRADE_TICK == 0
    }

    /// Rounds to the nearest multiple of `tick` subticks, halves away from zero.
    pub fn round_to(self, tick: i64) -> Price {
        Price(round_div(self.0 as i128, tick as i128) as i64 * tick)
    }

    /// Largest multiple of $0.01 that is `<= self`.
    pub fn floor_cent(self) -> Price {
        Price(self.0.div_euclid(Self::QUOTE_TICK) * Self::QUOTE_TICK)
    }

    /// Smallest multiple of $0.01 that is `>= self`.
    pub fn ceil_cent(self) -> Price {
        Price(-(-self.0).div_euclid(Self::QUOTE_TICK) * Self::QUOTE_TICK)
    }

    /// Cash value of `shares` at this price.
    pub fn notional(self, shares: u64) -> i64 {
        self.0 * shares as i64
    }
}

/// Integer division rounding halves away from zero.
pub(crate) fn round_div(numer: i128, denom: i128) -> i128 {
    debug_assert!(denom > 0);
    if numer >= 0 {
        (numer + denom / 2) / denom
    } else {
        -((-numer + denom / 2) / denom)
    }
}

impl Add for Price {
    type Output = Price;
    fn add(self, rhs: Price) -> Price {
        Price(self.0 + rhs.0)
    }
}

impl Sub for Price {
    type Output = Price;
    fn sub(self, rhs: Price) -> Price {
        Price(self.0 - rhs.0)
    }
}

impl Neg for Price {
    type Output = Price;
    fn neg(self) -> Price {
        Price(-self.0)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}${}.{:04}", abs / Self::SCALE as u64, abs % Self::SCALE as u64)
    }
}

/// Midpoint of a bid and an offer. Crossed inputs are allowed.
pub fn midpoint(bid: Option<Price>, offer: Option<Price>) -> Result<Price> {
    match (bid, offer) {
        (Some(b), Some(o)) => {
            let sum = b.0 + o.0;
            // Exact whenever both sides sit on the quote grid.
            Ok(Price(sum.div_euclid(2)))
        }
        _ => Err(Error::UndefinedMidpoint),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Bid,
    Offer,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Offer,
            Side::Offer => Side::Bid,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderType {
    Limit,
    Market,
    Midpoint,
}

/// How long an order may rest before the exchange cancels it.
///
/// `DAY` is the default: valid for the current session only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeInForce(u64);

impl TimeInForce {
    pub const DAY: TimeInForce = TimeInForce(u64::MAX);
    pub const IMMEDIATE: TimeInForce = TimeInForce(0);
    /// Gap between one close and the next open; shorter lifetimes never survive a close.
    pub const OVERNIGHT_MICROS: u64 = 17 * MICROS_PER_HOUR + 30 * MICROS_PER_MINUTE;

    pub const fn from_micros(micros: u64) -> Self {
        TimeInForce(micros)
    }

    pub const fn is_day(self) -> bool {
        self.0 == u64::MAX
    }

    pub const fn is_immediate(self) -> bool {
        self.0 == 0
    }

    pub const fn micros(self) -> u64 {
        self.0
    }

    /// Whether an order with this lifetime is cancelled at the session close.
    pub fn expires_at_close(self) -> bool {
        self.is_day() || self.0 < Self::OVERNIGHT_MICROS
    }
}

impl Default for TimeInForce {
    fn default() -> Self {
        TimeInForce::DAY
    }
}

/// Dense index of an agent within one simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense index of a trading symbol within one simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolId(pub u16);

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}
