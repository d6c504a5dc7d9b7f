//! Consolidation of per-exchange quotes into a best bid and offer.
//!
//! The SIP uses this with round-lot filtering to build the NBBO; traders,
//! exchanges and the observer use it to build direct (DBBO) views.

use crate::message::{Level, NbboMsg, QuoteMsg};
use crate::types::{AgentId, Side, SymbolId};

/// Latest quote per (symbol, exchange) plus an incrementally maintained best.
///
/// Among equal prices the exchange with the lowest id holds the side.
#[derive(Clone, Debug)]
pub struct BestQuoteBook {
    round_lot: u64,
    quotes: Vec<Vec<Option<QuoteMsg>>>,
    best: Vec<NbboMsg>,
}

fn better(side: Side, a: Level, b: Level) -> bool {
    match side {
        Side::Bid => a.price > b.price,
        Side::Offer => a.price < b.price,
    }
}

impl BestQuoteBook {
    /// `round_lot` of 0 or 1 disables size filtering.
    pub fn new(symbols: usize, round_lot: u64) -> Self {
        BestQuoteBook { round_lot, quotes: vec![Vec::new(); symbols], best: vec![NbboMsg::default(); symbols] }
    }

    pub fn round_lot(&self) -> u64 {
        self.round_lot
    }

    pub fn symbols(&self) -> usize {
        self.best.len()
    }

    fn eligible(&self, level: Option<Level>) -> Option<Level> {
        level.filter(|l| l.shares >= self.round_lot.max(1))
    }

    pub fn best(&self, symbol: SymbolId) -> &NbboMsg {
        &self.best[symbol.index()]
    }

    /// Cached quotes for a symbol, indexed by exchange id.
    pub fn quotes(&self, symbol: SymbolId) -> impl Iterator<Item = (AgentId, &QuoteMsg)> {
        self.quotes[symbol.index()]
            .iter()
            .enumerate()
            .filter_map(|(i, q)| q.as_ref().map(|q| (AgentId(i as u32), q)))
    }

    /// Stores `quote` as the latest from `exchange`. Returns whether the best changed.
    pub fn update(&mut self, symbol: SymbolId, exchange: AgentId, quote: QuoteMsg) -> bool {
        let s = symbol.index();
        let slots = &mut self.quotes[s];
        if slots.len() <= exchange.index() {
            slots.resize(exchange.index() + 1, None);
        }
        slots[exchange.index()] = Some(quote);
        let before = self.best[s];
        for side in [Side::Bid, Side::Offer] {
            self.update_side(s, side, exchange, quote.side(side));
        }
        self.best[s] != before
    }

    fn update_side(&mut self, s: usize, side: Side, exchange: AgentId, level: Option<Level>) {
        let level = self.eligible(level);
        let cur = self.best[s].quote.side(side).zip(self.best[s].holder(side));
        let take = match (level, cur) {
            (Some(_), None) => true,
            (Some(l), Some((b, holder))) => better(side, l, b) || (l.price == b.price && exchange <= holder),
            (None, _) => false,
        };
        if take {
            self.set_side(s, side, level.map(|l| (l, exchange)));
        } else if cur.is_some_and(|(_, holder)| holder == exchange) {
            let rescanned = self.scan_side(s, side);
            self.set_side(s, side, rescanned);
        }
    }

    fn scan_side(&self, s: usize, side: Side) -> Option<(Level, AgentId)> {
        let mut best: Option<(Level, AgentId)> = None;
        for (i, q) in self.quotes[s].iter().enumerate() {
            let Some(level) = q.and_then(|q| self.eligible(q.side(side))) else { continue };
            if best.map_or(true, |(b, _)| better(side, level, b)) {
                best = Some((level, AgentId(i as u32)));
            }
        }
        best
    }

    fn set_side(&mut self, s: usize, side: Side, v: Option<(Level, AgentId)>) {
        let nbbo = &mut self.best[s];
        match side {
            Side::Bid => {
                nbbo.quote.bid_price = v.map(|(l, _)| l.price);
                nbbo.quote.bid_shares = v.map_or(0, |(l, _)| l.shares);
                nbbo.bid_exchange = v.map(|(_, x)| x);
            }
            Side::Offer => {
                nbbo.quote.offer_price = v.map(|(l, _)| l.price);
                nbbo.quote.offer_shares = v.map_or(0, |(l, _)| l.shares);
                nbbo.offer_exchange = v.map(|(_, x)| x);
            }
        }
    }
}
