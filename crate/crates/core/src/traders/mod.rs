//! Trader agents: holdings, order tracking and the budget rule shared by
//! every strategy, plus the strategies themselves.

pub mod arb;
pub mod submodels;
pub mod zi;
pub mod zip;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::agent::Ctx;
use crate::message::{AddOrder, Body, LuldBandMsg, Message, NbboMsg, ReceiptKind, TriggerEvent, TriggerMsg};
use crate::types::{AgentId, Price, Side, SimTime, SymbolId, TimeInForce};

pub use arb::Arbitrageur;
pub use submodels::{VolumeDist, VolumeParams, WaitParams};
pub use zi::{MinimalIntelligence, ZeroIntelligence};
pub use zip::{ZipParams, ZipTrader};

/// Means of the exponential distributions that seed a trader's holdings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldingsInit {
    /// Mean cash in dollars.
    pub cash_mean: f64,
    /// Mean shares per symbol; zero gives no position.
    pub shares_mean: f64,
}

impl HoldingsInit {
    /// Cash and per-symbol shares, both rounded to whole units.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, symbols: usize) -> (i64, Vec<i64>) {
        let draw = |rng: &mut R, mean: f64| -> f64 {
            if mean > 0.0 {
                Exp::new(1.0 / mean).expect("positive rate").sample(rng).round()
            } else {
                0.0
            }
        };
        let cash = draw(rng, self.cash_mean) as i64 * Price::SCALE;
        let shares = (0..symbols).map(|_| draw(rng, self.shares_mean) as i64).collect();
        (cash, shares)
    }
}

/// An outstanding Add request as the trader understands it.
#[derive(Clone, Debug, PartialEq)]
pub struct Tracked {
    pub symbol: SymbolId,
    pub side: Side,
    pub price: Price,
    pub remaining: u32,
    pub time_in_force: TimeInForce,
    pub sent_at: SimTime,
    pub sequence_number: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraderStats {
    pub orders_sent: u64,
    pub blocked_by_budget: u64,
    pub fills: u64,
    pub rejections: u64,
}

/// State every trader keeps regardless of strategy.
#[derive(Clone, Debug)]
pub struct TraderCore {
    pub id: AgentId,
    pub cash: i64,
    pub shares: Vec<i64>,
    pub orders: BTreeMap<u64, Tracked>,
    /// Cash committed to tracked bids.
    pub bid_notional: i64,
    /// Tracked orders per symbol and side.
    pub open_count: Vec<[u32; 2]>,
    pub nbbo: Vec<NbboMsg>,
    pub luld: Vec<Option<LuldBandMsg>>,
    /// Exchanges trading each symbol.
    pub venues: Vec<Vec<AgentId>>,
    pub stats: TraderStats,
}

fn side_ix(side: Side) -> usize {
    match side {
        Side::Bid => 0,
        Side::Offer => 1,
    }
}

impl TraderCore {
    pub fn new(id: AgentId, cash: i64, shares: Vec<i64>, venues: Vec<Vec<AgentId>>) -> Self {
        let n = shares.len();
        TraderCore {
            id,
            cash,
            shares,
            orders: BTreeMap::new(),
            bid_notional: 0,
            open_count: vec![[0; 2]; n],
            nbbo: vec![NbboMsg::default(); n],
            luld: vec![None; n],
            venues,
            stats: TraderStats::default(),
        }
    }

    pub fn symbols(&self) -> usize {
        self.shares.len()
    }

    /// Whether an order is tracked on this side of `symbol`.
    pub fn is_active(&self, symbol: SymbolId, side: Side) -> bool {
        self.open_count[symbol.index()][side_ix(side)] > 0
    }

    /// Price used to mark a position: the side it would close against,
    /// falling back to the other NBBO side and then the LULD midpoint.
    fn mark(&self, symbol: usize, long: bool) -> Option<Price> {
        let q = &self.nbbo[symbol].quote;
        let (first, second) = if long { (q.bid_price, q.offer_price) } else { (q.offer_price, q.bid_price) };
        first.or(second).or(self.luld[symbol].map(|b| b.midpoint()))
    }

    /// Cash plus marked positions, in subticks.
    pub fn portfolio_value(&self) -> i128 {
        let mut v = self.cash as i128;
        for (s, &n) in self.shares.iter().enumerate() {
            if n != 0 {
                if let Some(p) = self.mark(s, n > 0) {
                    v += p.subticks() as i128 * n as i128;
                }
            }
        }
        v
    }

    /// The budget rule: value must be positive, and bids must be covered
    /// by cash net of other outstanding bids.
    pub fn budget_allows(&self, side: Side, price: Price, shares: u32) -> bool {
        if self.portfolio_value() <= 0 {
            return false;
        }
        match side {
            Side::Offer => true,
            Side::Bid => self.cash as i128 >= price.notional(shares as u64) as i128 + self.bid_notional as i128,
        }
    }

    /// Budget-checks and sends a limit order, tracking it on success.
    pub fn submit(&mut self, ctx: &mut Ctx, venue: AgentId, symbol: SymbolId, order: AddOrder) -> Option<u64> {
        if !self.budget_allows(order.side, order.limit_price, order.shares) {
            self.stats.blocked_by_budget += 1;
            return None;
        }
        let tracked = Tracked {
            symbol,
            side: order.side,
            price: order.limit_price,
            remaining: order.shares,
            time_in_force: if order.all_or_nothing { TimeInForce::IMMEDIATE } else { order.time_in_force },
            sent_at: ctx.now,
            sequence_number: None,
        };
        let id = ctx.send(venue, symbol, Body::Add(order));
        self.track(id, tracked);
        self.stats.orders_sent += 1;
        Some(id)
    }

    fn track(&mut self, id: u64, t: Tracked) {
        if t.side == Side::Bid {
            self.bid_notional += t.price.notional(t.remaining as u64);
        }
        self.open_count[t.symbol.index()][side_ix(t.side)] += 1;
        self.orders.insert(id, t);
    }

    /// Removes shares from a tracked order; drops it once exhausted.
    fn reduce(&mut self, id: u64, shares: u32) {
        let Some(t) = self.orders.get_mut(&id) else { return };
        let shares = shares.min(t.remaining);
        t.remaining -= shares;
        if t.side == Side::Bid {
            self.bid_notional -= t.price.notional(shares as u64);
        }
        if t.remaining == 0 {
            self.untrack(id);
        }
    }

    fn untrack(&mut self, id: u64) {
        if let Some(t) = self.orders.remove(&id) {
            if t.side == Side::Bid {
                self.bid_notional -= t.price.notional(t.remaining as u64);
            }
            self.open_count[t.symbol.index()][side_ix(t.side)] -= 1;
        }
    }

    /// Applies a receipt to holdings and tracking.
    pub fn on_receipt(&mut self, order_id: u64, kind: &ReceiptKind, symbol: SymbolId) {
        match kind {
            ReceiptKind::AddAccepted { sequence_number } => {
                if let Some(t) = self.orders.get_mut(&order_id) {
                    t.sequence_number = Some(*sequence_number);
                }
            }
            ReceiptKind::Traded { price, shares, side, fee, .. } => {
                let notional = price.notional(*shares as u64);
                match side {
                    Side::Bid => {
                        self.cash -= notional;
                        self.shares[symbol.index()] += *shares as i64;
                    }
                    Side::Offer => {
                        self.cash += notional;
                        self.shares[symbol.index()] -= *shares as i64;
                    }
                }
                self.cash -= fee;
                self.stats.fills += 1;
                self.reduce(order_id, *shares);
            }
            ReceiptKind::Modified { shares_removed, remaining, .. } => {
                self.reduce(order_id, *shares_removed);
                if *remaining == 0 {
                    self.untrack(order_id);
                }
            }
            ReceiptKind::Routed { .. } => {}
            ReceiptKind::Rejected => {
                self.stats.rejections += 1;
                self.untrack(order_id);
            }
        }
    }

    /// Drops tracked orders the exchanges cancel at the close.
    pub fn clear_stale(&mut self, now: SimTime) {
        let stale: Vec<u64> = self
            .orders
            .iter()
            .filter(|(_, t)| t.time_in_force.expires_at_close() || t.sent_at.plus_micros(t.time_in_force.micros()) <= now)
            .map(|(&id, _)| id)
            .collect();
        for id in stale {
            self.untrack(id);
        }
    }

    /// Keeps NBBO and LULD views current. Returns true if the message was one of those.
    pub fn observe(&mut self, msg: &Message) -> bool {
        let s = msg.header.trading_symbol.index();
        if s >= self.nbbo.len() {
            return false;
        }
        match &msg.body {
            Body::Nbbo(n) => self.nbbo[s] = *n,
            Body::Luld(l) => self.luld[s] = Some(*l),
            _ => return false,
        }
        true
    }

    pub fn random_venue<R: Rng + ?Sized>(&self, rng: &mut R, symbol: SymbolId) -> Option<AgentId> {
        let v = &self.venues[symbol.index()];
        (!v.is_empty()).then(|| v[rng.random_range(0..v.len())])
    }
}

pub enum Strategy {
    Zi(ZeroIntelligence),
    Mi(MinimalIntelligence),
    Zip(ZipTrader),
    Arb(Arbitrageur),
}

impl Strategy {
    pub fn kind(&self) -> &'static str {
        match self {
            Strategy::Zi(_) => "zi",
            Strategy::Mi(_) => "mi",
            Strategy::Zip(_) => "zip",
            Strategy::Arb(_) => "arb",
        }
    }
}

pub struct Trader {
    pub core: TraderCore,
    pub strategy: Strategy,
    wait: WaitParams,
}

impl Trader {
    pub fn new(core: TraderCore, strategy: Strategy, wait: WaitParams) -> Self {
        Trader { core, strategy, wait }
    }

    fn acts_on_timer(&self) -> bool {
        !matches!(self.strategy, Strategy::Arb(_))
    }

    fn schedule_next(&mut self, ctx: &mut Ctx) {
        let at = submodels::next_action_time(ctx.rng, self.wait, ctx.calendar, ctx.now);
        ctx.schedule(at.saturating_since(ctx.now), SymbolId(0), Body::Trigger(TriggerMsg { trigger_event: TriggerEvent::Trade }));
    }

    /// First action: a wait after the first open at or after now.
    pub fn start(&mut self, ctx: &mut Ctx) {
        if self.acts_on_timer() {
            let open = ctx.calendar.next_open(ctx.now);
            let at = open.plus_micros(submodels::next_wait(ctx.rng, self.wait));
            ctx.schedule(at.saturating_since(ctx.now), SymbolId(0), Body::Trigger(TriggerMsg { trigger_event: TriggerEvent::Trade }));
        }
    }

    pub fn on_message(&mut self, msg: &Message, ctx: &mut Ctx) {
        match &msg.body {
            Body::Receipt(r) => {
                let id = msg.header.related_id.unwrap_or(msg.header.message_id);
                self.core.on_receipt(id, &r.kind, msg.header.trading_symbol);
            }
            Body::Trigger(_) if msg.header.sender_id == self.core.id => {
                if ctx.calendar.is_trading_time(ctx.now) {
                    self.act(ctx);
                }
                self.schedule_next(ctx);
            }
            _ => {
                let market = self.core.observe(msg);
                match &mut self.strategy {
                    Strategy::Zi(s) if market => s.on_market(&self.core, msg),
                    Strategy::Mi(s) if market => s.on_market(&self.core, msg),
                    Strategy::Zip(s) => s.on_message(&self.core, msg, ctx),
                    Strategy::Arb(s) => s.on_message(&mut self.core, msg, ctx),
                    _ => {}
                }
            }
        }
    }

    fn act(&mut self, ctx: &mut Ctx) {
        match &mut self.strategy {
            Strategy::Zi(s) => s.act(&mut self.core, ctx),
            Strategy::Mi(s) => s.act(&mut self.core, ctx),
            Strategy::Zip(s) => s.act(&mut self.core, ctx),
            Strategy::Arb(_) => {}
        }
    }

    pub fn clear_stale(&mut self, now: SimTime) {
        self.core.clear_stale(now);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::QuoteMsg;

    fn core(cash_dollars: i64, shares: i64) -> TraderCore {
        TraderCore::new(AgentId(5), cash_dollars * Price::SCALE, vec![shares], vec![vec![AgentId(0)]])
    }

    fn with_nbbo(mut c: TraderCore, bid: i64, offer: i64) -> TraderCore {
        c.nbbo[0] = NbboMsg {
            quote: QuoteMsg {
                bid_price: Some(Price::from_dollars(bid)),
                bid_shares: 100,
                offer_price: Some(Price::from_dollars(offer)),
                offer_shares: 100,
            },
            bid_exchange: Some(AgentId(0)),
            offer_exchange: Some(AgentId(0)),
        };
        c
    }

    #[test]
    fn budget_boundary_is_inclusive() {
        let c = core(10_000, 0);
        assert!(c.budget_allows(Side::Bid, Price::from_dollars(100), 100));
        assert!(!c.budget_allows(Side::Bid, Price::from_dollars(100), 101));
    }

    #[test]
    fn budget_blocks_uncovered_bid() {
        let c = core(5_000, 0);
        assert!(!c.budget_allows(Side::Bid, Price::from_dollars(100), 100));
        assert!(c.budget_allows(Side::Offer, Price::from_dollars(100), 100));
    }

    #[test]
    fn short_position_valued_at_offer() {
        let c = with_nbbo(core(5_000, -100), 99, 100);
        assert_eq!(c.portfolio_value(), -5_000 * Price::SCALE as i128);
        assert!(!c.budget_allows(Side::Offer, Price::from_dollars(100), 1));
        assert!(!c.budget_allows(Side::Bid, Price::from_dollars(1), 1));
    }

    #[test]
    fn receipts_update_holdings_and_tracking() {
        let mut c = core(10_000, 0);
        c.track(
            7,
            Tracked {
                symbol: SymbolId(0),
                side: Side::Bid,
                price: Price::from_dollars(10),
                remaining: 100,
                time_in_force: TimeInForce::DAY,
                sent_at: SimTime::ZERO,
                sequence_number: None,
            },
        );
        assert_eq!(c.bid_notional, 1_000 * Price::SCALE);
        assert!(c.is_active(SymbolId(0), Side::Bid));
        let kind = ReceiptKind::Traded {
            price: Price::from_dollars(10),
            shares: 40,
            side: Side::Bid,
            fee: 3,
            liquidity: crate::message::Liquidity::Taker,
        };
        c.on_receipt(7, &kind, SymbolId(0));
        assert_eq!(c.cash, 10_000 * Price::SCALE - 400 * Price::SCALE - 3);
        assert_eq!(c.shares[0], 40);
        assert_eq!(c.orders[&7].remaining, 60);
        c.on_receipt(7, &ReceiptKind::Modified { sequence_number: None, shares_removed: 60, remaining: 0 }, SymbolId(0));
        assert!(c.orders.is_empty());
        assert_eq!(c.bid_notional, 0);
        assert!(!c.is_active(SymbolId(0), Side::Bid));
    }

    #[test]
    fn stale_orders_cleared_at_close() {
        let mut c = core(10_000, 0);
        for (id, tif) in [(1, TimeInForce::DAY), (2, TimeInForce::from_micros(48 * 3_600_000_000))] {
            c.track(
                id,
                Tracked {
                    symbol: SymbolId(0),
                    side: Side::Offer,
                    price: Price::from_dollars(10),
                    remaining: 1,
                    time_in_force: tif,
                    sent_at: SimTime::ZERO,
                    sequence_number: None,
                },
            );
        }
        c.clear_stale(SimTime::from_secs(60));
        assert_eq!(c.orders.keys().copied().collect::<Vec<_>>(), vec![2]);
    }
}
