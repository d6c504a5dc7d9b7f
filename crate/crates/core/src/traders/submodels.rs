//! Random draws shared by the trader strategies.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::calendar::TradingCalendar;
use crate::types::{SimTime, MICROS_PER_SECOND};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaitParams {
    pub min_us: u64,
    pub max_us: u64,
}

impl Default for WaitParams {
    fn default() -> Self {
        WaitParams { min_us: MICROS_PER_SECOND / 2, max_us: 3 * MICROS_PER_SECOND / 2 }
    }
}

/// A uniform wait in whole microseconds, bounds inclusive.
pub fn next_wait<R: Rng + ?Sized>(rng: &mut R, params: WaitParams) -> u64 {
    rng.random_range(params.min_us..=params.max_us)
}

/// Time of the next trading action after `now`. An action that would land
/// outside a session moves to the next open plus a fresh wait.
pub fn next_action_time<R: Rng + ?Sized>(rng: &mut R, params: WaitParams, calendar: &TradingCalendar, now: SimTime) -> SimTime {
    let t = now.plus_micros(next_wait(rng, params));
    if calendar.is_trading_time(t) {
        t
    } else {
        calendar.next_open(t).plus_micros(next_wait(rng, params))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeParams {
    pub mu: f64,
    pub sigma: f64,
}

impl Default for VolumeParams {
    fn default() -> Self {
        VolumeParams { mu: 2.6051702, sigma: 1.40943376 }
    }
}

/// Order size: a rounded log-normal draw, at least one share.
#[derive(Clone, Copy, Debug)]
pub struct VolumeDist(LogNormal<f64>);

impl VolumeDist {
    pub fn new(params: VolumeParams) -> Self {
        VolumeDist(LogNormal::new(params.mu, params.sigma).expect("sigma validated non-negative"))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let v = self.0.sample(rng).round();
        v.clamp(1.0, u32::MAX as f64) as u32
    }
}

/// Normal draw rejected until it falls in `[lo, hi]`.
///
/// The bands used here sit six standard deviations from the mean, so
/// rejection almost never repeats.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if sd <= 0.0 || lo >= hi {
        return mean.clamp(lo, hi);
    }
    let n = Normal::new(mean, sd).expect("positive sd");
    loop {
        let x = n.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
}
