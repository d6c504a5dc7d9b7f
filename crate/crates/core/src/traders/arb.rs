//! Arbitrage trader: watches direct exchange quotes and sweeps crosses.

use super::TraderCore;
use crate::agent::Ctx;
use crate::message::{AddOrder, Body, Message, NbboMsg};
use crate::quotes::BestQuoteBook;
use crate::types::{AgentId, Price, Side, SymbolId, TimeInForce};

/// A crossed DBBO the trader has already sent orders against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Cross {
    bid: Price,
    bid_holder: AgentId,
    offer: Price,
    offer_holder: AgentId,
}

/// The two legs that uncross a DBBO: `(venue, order)` for the offer sent to
/// the bid holder and the bid sent to the offer holder.
pub fn uncross_orders(dbbo: &NbboMsg) -> Option<[(AgentId, AddOrder); 2]> {
    let bid = dbbo.quote.side(Side::Bid)?;
    let offer = dbbo.quote.side(Side::Offer)?;
    let (bh, oh) = (dbbo.bid_exchange?, dbbo.offer_exchange?);
    if bid.price <= offer.price || bh == oh {
        return None;
    }
    let shares = bid.shares.min(offer.shares).min(u32::MAX as u64) as u32;
    let leg = |side, price| AddOrder { iso: true, time_in_force: TimeInForce::IMMEDIATE, ..AddOrder::limit(side, shares, price) };
    Some([(bh, leg(Side::Offer, bid.price)), (oh, leg(Side::Bid, offer.price))])
}

pub struct Arbitrageur {
    dbbo: BestQuoteBook,
    last: Vec<Option<Cross>>,
    sweeps: u64,
}

impl Arbitrageur {
    pub fn new(symbols: usize) -> Self {
        Arbitrageur { dbbo: BestQuoteBook::new(symbols, 0), last: vec![None; symbols], sweeps: 0 }
    }

    pub fn dbbo(&self) -> &BestQuoteBook {
        &self.dbbo
    }

    /// Number of crosses acted on.
    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn on_message(&mut self, core: &mut TraderCore, msg: &Message, ctx: &mut Ctx) {
        let symbol = msg.header.trading_symbol;
        let Body::Quote(q) = &msg.body else { return };
        if symbol.index() >= self.last.len() {
            return;
        }
        self.dbbo.update(symbol, msg.header.sender_id, *q);
        if ctx.calendar.is_trading_time(ctx.now) {
            self.check(core, symbol, ctx);
        }
    }

    fn check(&mut self, core: &mut TraderCore, symbol: SymbolId, ctx: &mut Ctx) {
        let best = *self.dbbo.best(symbol);
        let Some(legs) = uncross_orders(&best) else { return };
        let cross = Cross {
            bid: legs[0].1.limit_price,
            bid_holder: legs[0].0,
            offer: legs[1].1.limit_price,
            offer_holder: legs[1].0,
        };
        let s = symbol.index();
        if self.last[s] == Some(cross) {
            return;
        }
        self.last[s] = Some(cross);
        let [(to_bid_holder, offer_leg), (to_offer_holder, bid_leg)] = legs;
        if !core.budget_allows(Side::Bid, bid_leg.limit_price, bid_leg.shares) || !core.budget_allows(Side::Offer, offer_leg.limit_price, offer_leg.shares) {
            core.stats.blocked_by_budget += 1;
            return;
        }
        self.sweeps += 1;
        core.submit(ctx, to_bid_holder, symbol, offer_leg);
        core.submit(ctx, to_offer_holder, symbol, bid_leg);
    }
}
