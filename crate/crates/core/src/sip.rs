//! Securities information processors: NBBO, LULD bands and the TAQ feed.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Ctx;
use crate::calendar::TradingCalendar;
use crate::message::{Body, LuldBandMsg, Message, SipWrapped};
use crate::quotes::BestQuoteBook;
use crate::types::{round_div, AgentId, Price, SimTime, SymbolId, MICROS_PER_MINUTE};

pub const DEFAULT_WINDOW_US: u64 = 5 * MICROS_PER_MINUTE;
pub const DEFAULT_ROUND_LOT: u64 = 100;

/// Band half-width in basis points for a reference price.
///
/// $0.75 and $3.00 belong to the middle tier. Widths double in the closing window.
pub fn band_width_bp(reference: Price, closing: bool) -> i64 {
    let base = if reference > Price::from_cents(300) {
        500
    } else if reference >= Price::from_cents(75) {
        2000
    } else {
        7500
    };
    if closing {
        base * 2
    } else {
        base
    }
}

/// Bands around `reference`, each rounded to the nearest cent. The lower band never drops below $0.01.
pub fn luld_bands(reference: Price, width_bp: i64) -> LuldBandMsg {
    let r = reference.subticks() as i128;
    let cent = Price::QUOTE_TICK as i128;
    let upper = round_div(r * (10_000 + width_bp as i128), 10_000 * cent) * cent;
    let lower = round_div(r * (10_000 - width_bp as i128), 10_000 * cent) * cent;
    LuldBandMsg {
        upper_band: Price::from_subticks(upper as i64),
        lower_band: Price::from_subticks((lower as i64).max(Price::QUOTE_TICK)),
    }
}

/// Rolling window of trade prints for one symbol.
#[derive(Clone, Debug)]
pub struct LuldQueue {
    window_us: u64,
    trades: VecDeque<(SimTime, Price)>,
    sum: i128,
    reference: Option<Price>,
    bands: Option<LuldBandMsg>,
}

impl LuldQueue {
    pub fn new(window_us: u64) -> Self {
        LuldQueue { window_us, trades: VecDeque::new(), sum: 0, reference: None, bands: None }
    }

    pub fn reference(&self) -> Option<Price> {
        self.reference
    }

    pub fn bands(&self) -> Option<LuldBandMsg> {
        self.bands
    }

    pub fn len(&self) -> usize {
        self.trades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }

    fn evict(&mut self, now: SimTime) {
        let cutoff = now.as_micros().saturating_sub(self.window_us);
        while let Some(&(t, p)) = self.trades.front() {
            if t.as_micros() >= cutoff {
                break;
            }
            self.sum -= p.subticks() as i128;
            self.trades.pop_front();
        }
    }

    /// Adds a print and recomputes the reference as the window mean.
    pub fn push(&mut self, now: SimTime, price: Price) {
        self.trades.push_back((now, price));
        self.sum += price.subticks() as i128;
        self.evict(now);
        self.reference = Some(Price::from_subticks(round_div(self.sum, self.trades.len() as i128) as i64));
    }

    pub fn set_reference(&mut self, reference: Price) {
        self.reference = Some(reference);
    }

    /// Recomputes bands; returns them only if they changed.
    pub fn refresh(&mut self, closing: bool) -> Option<LuldBandMsg> {
        let reference = self.reference?;
        let bands = luld_bands(reference, band_width_bp(reference, closing));
        if self.bands == Some(bands) {
            return None;
        }
        self.bands = Some(bands);
        Some(bands)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SipParams {
    #[serde(default = "default_window")]
    pub window_us: u64,
    #[serde(default = "default_round_lot")]
    pub round_lot: u64,
}

fn default_window() -> u64 {
    DEFAULT_WINDOW_US
}

fn default_round_lot() -> u64 {
    DEFAULT_ROUND_LOT
}

impl Default for SipParams {
    fn default() -> Self {
        SipParams { window_us: DEFAULT_WINDOW_US, round_lot: DEFAULT_ROUND_LOT }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SipStats {
    pub nbbo: u64,
    pub luld: u64,
    pub taq: u64,
}

pub struct Sip {
    id: AgentId,
    managed: Vec<bool>,
    nbbo: BestQuoteBook,
    luld: Vec<LuldQueue>,
    opened: bool,
    stats: SipStats,
}

impl Sip {
    pub fn new(id: AgentId, params: &SipParams, managed: Vec<bool>) -> Self {
        let n = managed.len();
        Sip {
            id,
            nbbo: BestQuoteBook::new(n, params.round_lot),
            luld: vec![LuldQueue::new(params.window_us); n],
            managed,
            opened: false,
            stats: SipStats::default(),
        }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn manages(&self, symbol: SymbolId) -> bool {
        self.managed.get(symbol.index()).copied().unwrap_or(false)
    }

    pub fn quotes(&self) -> &BestQuoteBook {
        &self.nbbo
    }

    pub fn luld(&self, symbol: SymbolId) -> &LuldQueue {
        &self.luld[symbol.index()]
    }

    pub fn stats(&self) -> &SipStats {
        &self.stats
    }

    fn closing(calendar: &TradingCalendar, now: SimTime) -> bool {
        calendar.in_closing_window(now)
    }

    /// Issues opening bands. The first open draws a reference uniformly
    /// from whole cents in [$90, $110]; later opens reuse the last reference.
    pub fn open_day(&mut self, ctx: &mut Ctx) {
        let first = !self.opened;
        self.opened = true;
        for s in 0..self.managed.len() {
            if !self.managed[s] {
                continue;
            }
            let q = &mut self.luld[s];
            if first {
                q.set_reference(Price::from_cents(ctx.rng.random_range(9_000..=11_000)));
            }
            if let Some(bands) = q.refresh(Self::closing(ctx.calendar, ctx.now)) {
                self.stats.luld += 1;
                ctx.publish(SymbolId(s as u16), Body::Luld(bands));
            }
        }
    }

    pub fn on_message(&mut self, msg: &Message, ctx: &mut Ctx) {
        let symbol = msg.header.trading_symbol;
        if !self.manages(symbol) {
            return;
        }
        let exchange = msg.header.sender_id;
        match &msg.body {
            Body::Quote(q) => {
                self.stats.taq += 1;
                ctx.publish(
                    symbol,
                    Body::SipQuote(SipWrapped { sip_time: ctx.now, exchange, exchange_send_time: msg.header.send_time, payload: *q }),
                );
                if self.nbbo.update(symbol, exchange, *q) {
                    self.stats.nbbo += 1;
                    ctx.publish(symbol, Body::Nbbo(*self.nbbo.best(symbol)));
                }
            }
            Body::Trade(t) => {
                self.stats.taq += 1;
                ctx.publish(
                    symbol,
                    Body::SipTrade(SipWrapped { sip_time: ctx.now, exchange, exchange_send_time: msg.header.send_time, payload: t.clone() }),
                );
                let q = &mut self.luld[symbol.index()];
                q.push(ctx.now, t.price);
                if let Some(bands) = q.refresh(Self::closing(ctx.calendar, ctx.now)) {
                    self.stats.luld += 1;
                    ctx.publish(symbol, Body::Luld(bands));
                }
            }
            _ => {}
        }
    }
}
