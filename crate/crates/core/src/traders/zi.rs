//! Zero-intelligence (ZI) and minimal-intelligence (MI) traders.

use rand::Rng;

use super::{TraderCore, VolumeDist};
use crate::agent::Ctx;
use crate::message::{AddOrder, Body, Message, NbboMsg};
use crate::types::{AgentId, Price, Side, SymbolId};

/// Half-width of the ZI price band.
pub const BAND_HALF_WIDTH: Price = Price::from_cents(25);
/// Band centre before any NBBO has been seen.
pub const INITIAL_CENTER: Price = Price::from_dollars(100);

/// Price band for one side: centred on the NBBO midpoint, bids shifted down
/// and offers up by a quarter of the spread.
pub fn zi_band(center: Price, spread: Price, side: Side) -> (Price, Price) {
    let shift = Price::from_subticks(spread.subticks() / 4);
    let c = match side {
        Side::Bid => center - shift,
        Side::Offer => center + shift,
    };
    (c - BAND_HALF_WIDTH, c + BAND_HALF_WIDTH)
}

/// Uniform whole-cent price inside `[lo, hi]`.
pub fn uniform_cent<R: Rng + ?Sized>(rng: &mut R, lo: Price, hi: Price) -> Price {
    let lo = lo.ceil_cent().subticks() / Price::QUOTE_TICK;
    let hi = hi.floor_cent().subticks() / Price::QUOTE_TICK;
    Price::from_cents(rng.random_range(lo.max(1)..=hi.max(lo.max(1))))
}

/// Band state per symbol.
#[derive(Clone, Debug)]
pub struct ZeroIntelligence {
    center: Vec<Price>,
    spread: Vec<Price>,
    volume: VolumeDist,
}

impl ZeroIntelligence {
    pub fn new(symbols: usize, volume: VolumeDist) -> Self {
        ZeroIntelligence { center: vec![INITIAL_CENTER; symbols], spread: vec![Price::ZERO; symbols], volume }
    }

    pub fn band(&self, symbol: SymbolId, side: Side) -> (Price, Price) {
        zi_band(self.center[symbol.index()], self.spread[symbol.index()], side)
    }

    /// Recentres on a two-sided NBBO; one-sided updates keep the last band.
    pub fn on_nbbo(&mut self, symbol: SymbolId, nbbo: &NbboMsg) {
        if let (Some(b), Some(o)) = (nbbo.quote.bid_price, nbbo.quote.offer_price) {
            let s = symbol.index();
            self.center[s] = Price::from_subticks((b.subticks() + o.subticks()).div_euclid(2));
            self.spread[s] = o - b;
        }
    }

    pub fn on_market(&mut self, _core: &TraderCore, msg: &Message) {
        if let Body::Nbbo(n) = &msg.body {
            self.on_nbbo(msg.header.trading_symbol, n);
        }
    }

    /// Draws symbol, side, price and size for one order.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, symbols: usize) -> (SymbolId, AddOrder) {
        let symbol = SymbolId(rng.random_range(0..symbols) as u16);
        let side = if rng.random::<bool>() { Side::Bid } else { Side::Offer };
        let (lo, hi) = self.band(symbol, side);
        let price = uniform_cent(rng, lo, hi);
        let shares = self.volume.sample(rng);
        (symbol, AddOrder::limit(side, shares, price))
    }

    pub fn act(&mut self, core: &mut TraderCore, ctx: &mut Ctx) {
        let (symbol, order) = self.draw(ctx.rng, core.symbols());
        if let Some(venue) = core.random_venue(ctx.rng, symbol) {
            core.submit(ctx, venue, symbol, order);
        }
    }
}

/// Contra-side NBBO holder for an order on `side`, if that side is defined.
pub fn mi_route(nbbo: &NbboMsg, side: Side) -> Option<AgentId> {
    nbbo.holder(side.opposite())
}

/// ZI pricing with orders sent to the exchange holding the contra side of the NBBO.
#[derive(Clone, Debug)]
pub struct MinimalIntelligence(pub ZeroIntelligence);

impl MinimalIntelligence {
    pub fn new(symbols: usize, volume: VolumeDist) -> Self {
        MinimalIntelligence(ZeroIntelligence::new(symbols, volume))
    }

    pub fn on_market(&mut self, core: &TraderCore, msg: &Message) {
        self.0.on_market(core, msg);
    }

    pub fn act(&mut self, core: &mut TraderCore, ctx: &mut Ctx) {
        let (symbol, order) = self.0.draw(ctx.rng, core.symbols());
        let venue = mi_route(&core.nbbo[symbol.index()], order.side).or_else(|| core.random_venue(ctx.rng, symbol));
        if let Some(venue) = venue {
            core.submit(ctx, venue, symbol, order);
        }
    }
}
