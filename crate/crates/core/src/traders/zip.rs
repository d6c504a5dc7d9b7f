//! Zero-intelligence-plus (ZIP) traders.
//!
//! Each symbol has an internal limit price, redrawn from a truncated normal
//! inside the LULD bands whenever new bands arrive. Shouts are the limit
//! times one plus a per-side margin; margins adapt to the tape with the
//! Widrow-Hoff rule and momentum.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::submodels::truncated_normal;
use super::{TraderCore, VolumeDist};
use crate::agent::Ctx;
use crate::message::{AddOrder, Body, LuldBandMsg, Message};
use crate::types::{Price, Side, SymbolId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZipParams {
    pub beta: (f64, f64),
    pub gamma: (f64, f64),
    pub margin: (f64, f64),
    /// Largest absolute target perturbation, in dollars.
    pub abs_shift: f64,
    /// Largest relative target perturbation.
    pub rel_shift: f64,
    /// Band range divided by this gives the limit-price standard deviation.
    pub limit_sd_divisor: f64,
}

impl Default for ZipParams {
    fn default() -> Self {
        ZipParams { beta: (0.1, 0.5), gamma: (0.0, 0.1), margin: (0.05, 0.35), abs_shift: 0.05, rel_shift: 0.05, limit_sd_divisor: 12.0 }
    }
}

/// Margin and momentum for one side of one symbol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Learner {
    pub margin: f64,
    pub momentum: f64,
}

impl Learner {
    /// One delta-rule step toward `target`. Returns the new unclipped shout.
    pub fn update(&mut self, side: Side, limit: f64, beta: f64, gamma: f64, target: f64) -> f64 {
        let shout = limit * (1.0 + self.margin);
        let delta = beta * (target - shout);
        self.momentum = gamma * self.momentum + (1.0 - gamma) * delta;
        let next = shout + self.momentum;
        let m = next / limit - 1.0;
        self.margin = match side {
            Side::Offer => m.max(0.0),
            Side::Bid => m.min(0.0),
        };
        next
    }
}

#[derive(Clone, Debug)]
struct SymbolState {
    limit: Option<f64>,
    bid: Learner,
    offer: Learner,
}

pub struct ZipTrader {
    params: ZipParams,
    beta: f64,
    gamma: f64,
    symbols: Vec<SymbolState>,
    volume: VolumeDist,
}

/// Nearest cent to `dollars`, clipped into the bands.
pub fn clip_shout(dollars: f64, bands: LuldBandMsg) -> Price {
    Price::from_dollars_nearest_cent(dollars).clamp(bands.lower_band, bands.upper_band)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl ZipTrader {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, params: ZipParams, symbols: usize, volume: VolumeDist) -> Self {
        let beta = uniform(rng, params.beta);
        let gamma = uniform(rng, params.gamma);
        let symbols = (0..symbols)
            .map(|_| SymbolState {
                limit: None,
                bid: Learner { margin: -uniform(rng, params.margin), momentum: 0.0 },
                offer: Learner { margin: uniform(rng, params.margin), momentum: 0.0 },
            })
            .collect();
        ZipTrader { params, beta, gamma, symbols, volume }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn limit(&self, symbol: SymbolId) -> Option<f64> {
        self.symbols[symbol.index()].limit
    }

    pub fn learner(&self, symbol: SymbolId, side: Side) -> Learner {
        let s = &self.symbols[symbol.index()];
        match side {
            Side::Bid => s.bid,
            Side::Offer => s.offer,
        }
    }

    /// Unclipped shout in dollars.
    pub fn raw_shout(&self, symbol: SymbolId, side: Side) -> Option<f64> {
        let limit = self.limit(symbol)?;
        Some(limit * (1.0 + self.learner(symbol, side).margin))
    }

    /// Redraws the limit price inside new bands.
    pub fn resample_limit<R: Rng + ?Sized>(&mut self, rng: &mut R, symbol: SymbolId, bands: LuldBandMsg) {
        let lo = bands.lower_band.as_dollars();
        let hi = bands.upper_band.as_dollars();
        let mid = (lo + hi) / 2.0;
        let sd = (hi - lo) / self.params.limit_sd_divisor;
        self.symbols[symbol.index()].limit = Some(truncated_normal(rng, mid, sd, lo, hi));
    }

    fn target_up<R: Rng + ?Sized>(&self, rng: &mut R, q: f64) -> f64 {
        let r = 1.0 + uniform(rng, (0.0, self.params.rel_shift));
        let a = uniform(rng, (0.0, self.params.abs_shift));
        r * q + a
    }

    fn target_down<R: Rng + ?Sized>(&self, rng: &mut R, q: f64) -> f64 {
        let r = 1.0 - uniform(rng, (0.0, self.params.rel_shift));
        let a = uniform(rng, (0.0, self.params.abs_shift));
        r * q - a
    }

    fn adjust(&mut self, symbol: SymbolId, side: Side, target: f64) {
        let (beta, gamma) = (self.beta, self.gamma);
        let s = &mut self.symbols[symbol.index()];
        let Some(limit) = s.limit else { return };
        let learner = match side {
            Side::Bid => &mut s.bid,
            Side::Offer => &mut s.offer,
        };
        learner.update(side, limit, beta, gamma, target);
    }

    /// Reacts to a trade printed at `q`.
    pub fn on_trade<R: Rng + ?Sized>(&mut self, rng: &mut R, core: &TraderCore, symbol: SymbolId, q: f64) {
        let (Some(sell), Some(buy)) = (self.raw_shout(symbol, Side::Offer), self.raw_shout(symbol, Side::Bid)) else { return };
        if sell <= q {
            let t = self.target_up(rng, q);
            self.adjust(symbol, Side::Offer, t);
        } else if core.is_active(symbol, Side::Offer) {
            let t = self.target_down(rng, q);
            self.adjust(symbol, Side::Offer, t);
        }
        if buy >= q {
            let t = self.target_down(rng, q);
            self.adjust(symbol, Side::Bid, t);
        } else if core.is_active(symbol, Side::Bid) {
            let t = self.target_up(rng, q);
            self.adjust(symbol, Side::Bid, t);
        }
    }

    /// Reacts to a quoted bid or offer at `q` that was not a trade.
    pub fn on_shout<R: Rng + ?Sized>(&mut self, rng: &mut R, core: &TraderCore, symbol: SymbolId, side: Side, q: f64) {
        let Some(own) = self.raw_shout(symbol, side) else { return };
        if !core.is_active(symbol, side) {
            return;
        }
        match side {
            Side::Offer if q < own => {
                let t = self.target_down(rng, q);
                self.adjust(symbol, side, t);
            }
            Side::Bid if q > own => {
                let t = self.target_up(rng, q);
                self.adjust(symbol, side, t);
            }
            _ => {}
        }
    }

    pub fn on_message(&mut self, core: &TraderCore, msg: &Message, ctx: &mut Ctx) {
        let symbol = msg.header.trading_symbol;
        if symbol.index() >= self.symbols.len() {
            return;
        }
        match &msg.body {
            Body::Luld(bands) => self.resample_limit(ctx.rng, symbol, *bands),
            Body::SipTrade(t) => self.on_trade(ctx.rng, core, symbol, t.payload.price.as_dollars()),
            Body::SipQuote(q) => {
                if let Some(p) = q.payload.offer_price {
                    self.on_shout(ctx.rng, core, symbol, Side::Offer, p.as_dollars());
                }
                if let Some(p) = q.payload.bid_price {
                    self.on_shout(ctx.rng, core, symbol, Side::Bid, p.as_dollars());
                }
            }
            _ => {}
        }
    }

    /// Current order price for a side: the shout snapped to a cent and clipped to the bands.
    pub fn shout(&self, core: &TraderCore, symbol: SymbolId, side: Side) -> Option<Price> {
        let bands = core.luld[symbol.index()]?;
        Some(clip_shout(self.raw_shout(symbol, side)?, bands))
    }

    pub fn act(&mut self, core: &mut TraderCore, ctx: &mut Ctx) {
        let symbol = SymbolId(ctx.rng.random_range(0..core.symbols()) as u16);
        let side = if ctx.rng.random::<bool>() { Side::Bid } else { Side::Offer };
        let Some(price) = self.shout(core, symbol, side) else { return };
        let shares = self.volume.sample(ctx.rng);
        if let Some(venue) = core.random_venue(ctx.rng, symbol) {
            core.submit(ctx, venue, symbol, AddOrder::limit(side, shares, price));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bands(lo: i64, hi: i64) -> LuldBandMsg {
        LuldBandMsg { lower_band: Price::from_dollars(lo), upper_band: Price::from_dollars(hi) }
    }

    #[test]
    fn delta_rule_step() {
        let mut l = Learner { margin: 0.0, momentum: 0.0 };
        let next = l.update(Side::Offer, 100.0, 0.3, 0.0, 101.0);
        assert!((next - 100.30).abs() < 1e-9);
        assert!((l.margin - 0.003).abs() < 1e-12);
    }

    #[test]
    fn momentum_blend() {
        let mut l = Learner { margin: 0.0, momentum: 0.10 };
        // Delta is 0.3 * (101 - 100) = 0.30.
        l.update(Side::Offer, 100.0, 0.3, 0.1, 101.0);
        assert!((l.momentum - 0.28).abs() < 1e-12);
    }

    #[test]
    fn margins_keep_sign() {
        let mut sell = Learner { margin: 0.01, momentum: 0.0 };
        sell.update(Side::Offer, 100.0, 0.5, 0.0, 50.0);
        assert_eq!(sell.margin, 0.0);
        let mut buy = Learner { margin: -0.01, momentum: 0.0 };
        buy.update(Side::Bid, 100.0, 0.5, 0.0, 150.0);
        assert_eq!(buy.margin, 0.0);
    }

    #[test]
    fn shout_clipping() {
        assert_eq!(clip_shout(110.0, bands(95, 105)), Price::from_dollars(105));
        assert_eq!(clip_shout(90.0, bands(95, 105)), Price::from_dollars(95));
        assert_eq!(clip_shout(100.0, bands(95, 105)), Price::from_dollars(100));
        assert_eq!(clip_shout(100.004, bands(95, 105)), Price::from_dollars(100));
    }

    #[test]
    fn limit_within_bands() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut z = ZipTrader::new(&mut rng, ZipParams::default(), 1, VolumeDist::new(Default::default()));
        let mut sum = 0.0;
        for _ in 0..20_000 {
            z.resample_limit(&mut rng, SymbolId(0), bands(95, 105));
            let l = z.limit(SymbolId(0)).unwrap();
            assert!((95.0..=105.0).contains(&l));
            sum += l;
        }
        assert!((sum / 20_000.0 - 100.0).abs() < 0.03);
        assert!((0.1..0.5).contains(&z.beta()) && (0.0..0.1).contains(&z.gamma()));
        let o = z.learner(SymbolId(0), Side::Offer).margin;
        let b = z.learner(SymbolId(0), Side::Bid).margin;
        assert!((0.05..0.35).contains(&o) && (-0.35..=-0.05).contains(&b));
    }
}
