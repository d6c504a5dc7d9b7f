//! Per-symbol limit order book and the matching rules that act on it.
//!
//! The book works on already-validated orders with a resolved effective
//! limit price. Every mutation returns the resulting [`BookEvent`]s in the
//! order they happened so the owning exchange can turn them into feed
//! messages and receipts.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::message::{Level, NbboMsg, QuoteMsg};
use crate::types::{AgentId, Price, Side, SimTime, TimeInForce};

/// An order handed to the matching engine.
#[derive(Clone, Debug, PartialEq)]
pub struct NewOrder {
    pub owner: AgentId,
    /// Id the owner uses to track the order (its original Add message id).
    pub order_id: u64,
    pub side: Side,
    /// Effective limit: the stated limit, the LULD band or the NBBO midpoint.
    pub price: Price,
    pub shares: u32,
    pub hidden: bool,
    pub all_or_nothing: bool,
    pub iso: bool,
    pub midpoint: bool,
    pub time_in_force: TimeInForce,
    pub accept_time: SimTime,
    pub tie_break: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestingOrder {
    pub seq: u64,
    pub owner: AgentId,
    pub order_id: u64,
    pub side: Side,
    pub price: Price,
    pub original_shares: u32,
    pub remaining: u32,
    pub hidden: bool,
    pub midpoint: bool,
    pub time_in_force: TimeInForce,
    pub accept_time: SimTime,
    pub tie_break: f64,
}

/// One side of an execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Party {
    /// `None` for an incoming order that never rested.
    pub seq: Option<u64>,
    pub owner: AgentId,
    pub order_id: u64,
    /// Shares left on this order after the fill.
    pub remaining: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fill {
    pub price: Price,
    pub shares: u32,
    /// Side of the aggressing order.
    pub taker_side: Side,
    pub maker: Party,
    pub taker: Party,
    pub iso: bool,
    /// Whether the resting order was hidden (its mods stay off the feed).
    pub maker_hidden: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BookEvent {
    Fill(Fill),
    Rested { seq: u64, owner: AgentId, order_id: u64, side: Side, price: Price, shares: u32, hidden: bool },
    /// Shares removed without execution: an immediate-or-cancel remainder,
    /// a failed all-or-nothing order, or an expiry at the close.
    Cancelled { seq: Option<u64>, owner: AgentId, order_id: u64, side: Side, shares: u32, hidden: bool },
    /// The remainder would have traded through a better price elsewhere.
    Routed { to: AgentId, owner: AgentId, order_id: u64, shares: u32 },
}

/// Outcome of a cancel request against a resting order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModOutcome {
    pub seq: u64,
    pub owner: AgentId,
    pub order_id: u64,
    pub side: Side,
    pub removed: u32,
    pub remaining: u32,
    pub hidden: bool,
}

/// Sort key: higher priority sorts first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Key {
    /// Negated price for bids so that better prices sort first on both sides.
    price: i64,
    hidden: bool,
    accept_time: SimTime,
    /// Bit pattern of a non-negative float, which orders like the float.
    tie: u64,
    seq: u64,
}

fn price_key(side: Side, price: Price) -> i64 {
    match side {
        Side::Bid => -price.subticks(),
        Side::Offer => price.subticks(),
    }
}

/// Whether a bid at `bid` can trade with an offer at `offer`.
fn crosses(bid: Price, offer: Price) -> bool {
    bid >= offer
}

/// Whether `a` is a strictly worse execution price than `b` for an order on `side`.
fn worse_for(side: Side, a: Price, b: Price) -> bool {
    match side {
        Side::Bid => a > b,
        Side::Offer => a < b,
    }
}

#[derive(Clone, Debug, Default)]
struct BookSide {
    orders: BTreeMap<Key, RestingOrder>,
    /// Visible shares per price key.
    visible: BTreeMap<i64, u64>,
}

impl BookSide {
    fn insert(&mut self, key: Key, order: RestingOrder) {
        if !order.hidden {
            *self.visible.entry(key.price).or_default() += order.remaining as u64;
        }
        self.orders.insert(key, order);
    }

    fn remove_visible(&mut self, price: i64, shares: u32) {
        let e = self.visible.get_mut(&price).expect("visible level present");
        *e -= shares as u64;
        if *e == 0 {
            self.visible.remove(&price);
        }
    }

    fn best_level(&self, side: Side) -> Option<Level> {
        self.visible.iter().next().map(|(&k, &shares)| Level {
            price: Price::from_subticks(if side == Side::Bid { -k } else { k }),
            shares,
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct OrderBook {
    bids: BookSide,
    offers: BookSide,
    index: HashMap<u64, (Side, Key)>,
    midpoints: BTreeSet<u64>,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    fn side(&self, side: Side) -> &BookSide {
        match side {
            Side::Bid => &self.bids,
            Side::Offer => &self.offers,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut BookSide {
        match side {
            Side::Bid => &mut self.bids,
            Side::Offer => &mut self.offers,
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, seq: u64) -> Option<&RestingOrder> {
        let (side, key) = self.index.get(&seq)?;
        self.side(*side).orders.get(key)
    }

    /// Resting orders of one side in priority order.
    pub fn orders(&self, side: Side) -> impl Iterator<Item = &RestingOrder> {
        self.side(side).orders.values()
    }

    /// Best visible price level per side, shares aggregated over the level.
    pub fn quote(&self) -> QuoteMsg {
        QuoteMsg::new(self.bids.best_level(Side::Bid), self.offers.best_level(Side::Offer))
    }

    fn top(&self, side: Side) -> Option<(Key, &RestingOrder)> {
        self.side(side).orders.iter().next().map(|(k, o)| (*k, o))
    }

    fn key_of(order: &RestingOrder) -> Key {
        Key {
            price: price_key(order.side, order.price),
            hidden: order.hidden,
            accept_time: order.accept_time,
            tie: order.tie_break.to_bits(),
            seq: order.seq,
        }
    }

    fn insert(&mut self, order: RestingOrder) {
        let key = Self::key_of(&order);
        self.index.insert(order.seq, (order.side, key));
        if order.midpoint {
            self.midpoints.insert(order.seq);
        }
        self.side_mut(order.side).insert(key, order);
    }

    fn remove(&mut self, seq: u64) -> Option<RestingOrder> {
        let (side, key) = self.index.remove(&seq)?;
        self.midpoints.remove(&seq);
        let book = self.side_mut(side);
        let order = book.orders.remove(&key)?;
        if !order.hidden && order.remaining > 0 {
            book.remove_visible(key.price, order.remaining);
        }
        Some(order)
    }

    /// Takes `shares` from a resting order, deleting it when exhausted.
    fn reduce(&mut self, side: Side, key: Key, shares: u32) -> u32 {
        let book = self.side_mut(side);
        let order = book.orders.get_mut(&key).expect("resting order present");
        order.remaining -= shares;
        let remaining = order.remaining;
        let hidden = order.hidden;
        let seq = order.seq;
        if !hidden {
            book.remove_visible(key.price, shares);
        }
        if remaining == 0 {
            book.orders.remove(&key);
            self.index.remove(&seq);
            self.midpoints.remove(&seq);
        }
        remaining
    }

    /// Shares the incoming order could execute locally without trading through `nbbo_limit`.
    fn executable_shares(&self, side: Side, price: Price, nbbo_limit: Option<Price>) -> u64 {
        let mut total = 0u64;
        for o in self.side(side.opposite()).orders.values() {
            let (bid, offer) = match side {
                Side::Bid => (price, o.price),
                Side::Offer => (o.price, price),
            };
            if !crosses(bid, offer) || nbbo_limit.is_some_and(|p| worse_for(side, o.price, p)) {
                break;
            }
            total += o.remaining as u64;
        }
        total
    }

    /// Matches an incoming order, then rests, cancels or routes its remainder.
    ///
    /// `me` and `nbbo` drive trade-through protection: a non-ISO order whose
    /// next fill would be worse than a contra NBBO price held by another
    /// exchange is routed there instead. A resting remainder takes its
    /// sequence number from `next_seq`.
    pub fn submit(&mut self, order: NewOrder, me: AgentId, nbbo: &NbboMsg, next_seq: &mut u64) -> Vec<BookEvent> {
        let mut events = Vec::new();
        let side = order.side;
        let contra = side.opposite();
        let route = if order.iso {
            None
        } else {
            nbbo.price(contra).zip(nbbo.holder(contra)).filter(|(_, holder)| *holder != me)
        };
        let immediate = order.all_or_nothing || order.time_in_force.is_immediate();

        if order.all_or_nothing {
            let top_blocked = self
                .top(contra)
                .is_some_and(|(_, o)| route.is_some_and(|(p, _)| worse_for(side, o.price, p)) && self.compatible(side, order.price, o.price));
            if let (true, Some((_, to))) = (top_blocked, route) {
                events.push(BookEvent::Routed { to, owner: order.owner, order_id: order.order_id, shares: order.shares });
                return events;
            }
            if self.executable_shares(side, order.price, route.map(|r| r.0)) < order.shares as u64 {
                events.push(BookEvent::Cancelled {
                    seq: None,
                    owner: order.owner,
                    order_id: order.order_id,
                    side,
                    shares: order.shares,
                    hidden: order.hidden,
                });
                return events;
            }
        }

        let mut remaining = order.shares;
        while remaining > 0 {
            let Some((key, top)) = self.top(contra) else { break };
            if !self.compatible(side, order.price, top.price) {
                break;
            }
            if let Some((p, to)) = route {
                if worse_for(side, top.price, p) {
                    events.push(BookEvent::Routed { to, owner: order.owner, order_id: order.order_id, shares: remaining });
                    return events;
                }
            }
            let shares = remaining.min(top.remaining);
            let (price, maker_seq, maker_owner, maker_order_id, maker_hidden) =
                (top.price, top.seq, top.owner, top.order_id, top.hidden);
            remaining -= shares;
            let maker_remaining = self.reduce(contra, key, shares);
            events.push(BookEvent::Fill(Fill {
                price,
                shares,
                taker_side: side,
                maker: Party { seq: Some(maker_seq), owner: maker_owner, order_id: maker_order_id, remaining: maker_remaining },
                taker: Party { seq: None, owner: order.owner, order_id: order.order_id, remaining },
                iso: order.iso,
                maker_hidden,
            }));
        }

        if remaining == 0 {
            return events;
        }
        if immediate {
            events.push(BookEvent::Cancelled {
                seq: None,
                owner: order.owner,
                order_id: order.order_id,
                side,
                shares: remaining,
                hidden: order.hidden,
            });
            return events;
        }
        *next_seq += 1;
        let seq = *next_seq;
        events.push(BookEvent::Rested {
            seq,
            owner: order.owner,
            order_id: order.order_id,
            side,
            price: order.price,
            shares: remaining,
            hidden: order.hidden,
        });
        self.insert(RestingOrder {
            seq,
            owner: order.owner,
            order_id: order.order_id,
            side,
            price: order.price,
            original_shares: order.shares,
            remaining,
            hidden: order.hidden,
            midpoint: order.midpoint,
            time_in_force: order.time_in_force,
            accept_time: order.accept_time,
            tie_break: order.tie_break,
        });
        events
    }

    fn compatible(&self, side: Side, incoming: Price, resting: Price) -> bool {
        match side {
            Side::Bid => crosses(incoming, resting),
            Side::Offer => crosses(resting, incoming),
        }
    }

    /// Removes up to `shares` from a resting order. Removing everything deletes it.
    pub fn modify(&mut self, seq: u64, shares: u32) -> Option<ModOutcome> {
        let (side, key) = *self.index.get(&seq)?;
        let order = self.side(side).orders.get(&key)?;
        let removed = shares.min(order.remaining);
        let (owner, order_id, hidden) = (order.owner, order.order_id, order.hidden);
        let remaining = self.reduce(side, key, removed);
        Some(ModOutcome { seq, owner, order_id, side, removed, remaining, hidden })
    }

    /// Moves every resting midpoint order to `mid` and executes any crosses
    /// that result. The repriced order aggresses and trades at the contra
    /// order's price.
    pub fn reprice_midpoints(&mut self, mid: Price) -> Vec<BookEvent> {
        let stale: Vec<u64> = self.midpoints.iter().copied().filter(|s| self.get(*s).is_some_and(|o| o.price != mid)).collect();
        if stale.is_empty() {
            return Vec::new();
        }
        for seq in stale {
            let mut order = self.remove(seq).expect("indexed");
            order.price = mid;
            self.insert(order);
        }
        self.uncross()
    }

    fn uncross(&mut self) -> Vec<BookEvent> {
        let mut events = Vec::new();
        loop {
            let (Some((bk, bid)), Some((ok, offer))) = (self.top(Side::Bid), self.top(Side::Offer)) else { break };
            if !crosses(bid.price, offer.price) {
                break;
            }
            // A cross can only come from a repriced midpoint order.
            let bid_aggresses = match (bid.midpoint, offer.midpoint) {
                (true, false) => true,
                (false, true) => false,
                _ => bid.seq > offer.seq,
            };
            let (taker_side, tk, mk) = if bid_aggresses { (Side::Bid, bk, ok) } else { (Side::Offer, ok, bk) };
            let (taker, maker) = if bid_aggresses { (bid, offer) } else { (offer, bid) };
            let shares = taker.remaining.min(maker.remaining);
            let price = maker.price;
            let (t_seq, t_owner, t_id) = (taker.seq, taker.owner, taker.order_id);
            let (m_seq, m_owner, m_id, m_hidden) = (maker.seq, maker.owner, maker.order_id, maker.hidden);
            let t_rem = self.reduce(taker_side, tk, shares);
            let m_rem = self.reduce(taker_side.opposite(), mk, shares);
            events.push(BookEvent::Fill(Fill {
                price,
                shares,
                taker_side,
                maker: Party { seq: Some(m_seq), owner: m_owner, order_id: m_id, remaining: m_rem },
                taker: Party { seq: Some(t_seq), owner: t_owner, order_id: t_id, remaining: t_rem },
                iso: false,
                maker_hidden: m_hidden,
            }));
        }
        events
    }

    /// Cancels orders that do not survive the close at `now`.
    pub fn close_day(&mut self, now: SimTime) -> Vec<BookEvent> {
        let mut expired: Vec<&RestingOrder> = self
            .bids
            .orders
            .values()
            .chain(self.offers.orders.values())
            .filter(|o| o.time_in_force.expires_at_close() || o.accept_time.plus_micros(o.time_in_force.micros()) <= now)
            .collect();
        expired.sort_by_key(|o| o.seq);
        let seqs: Vec<u64> = expired.iter().map(|o| o.seq).collect();
        seqs.into_iter()
            .map(|seq| {
                let o = self.remove(seq).expect("indexed");
                BookEvent::Cancelled {
                    seq: Some(o.seq),
                    owner: o.owner,
                    order_id: o.order_id,
                    side: o.side,
                    shares: o.remaining,
                    hidden: o.hidden,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(side: Side, cents: i64, shares: u32, t: u64) -> NewOrder {
        NewOrder {
            owner: AgentId(10),
            order_id: t,
            side,
            price: Price::from_cents(cents),
            shares,
            hidden: false,
            all_or_nothing: false,
            iso: false,
            midpoint: false,
            time_in_force: TimeInForce::DAY,
            accept_time: SimTime::from_micros(t),
            tie_break: 0.5,
        }
    }

    fn fills(events: &[BookEvent]) -> Vec<(i64, u32)> {
        events
            .iter()
            .filter_map(|e| match e {
                BookEvent::Fill(f) => Some((f.price.subticks() / 100, f.shares)),
                _ => None,
            })
            .collect()
    }

    const ME: AgentId = AgentId(1);

    fn submit(b: &mut OrderBook, o: NewOrder, me: AgentId, nbbo: &NbboMsg) -> Vec<BookEvent> {
        let mut seq = b.orders(Side::Bid).chain(b.orders(Side::Offer)).map(|o| o.seq).max().unwrap_or(0);
        b.submit(o, me, nbbo, &mut seq)
    }

    #[test]
    fn walks_the_book_at_resting_prices() {
        let mut b = OrderBook::new();
        let none = NbboMsg::default();
        submit(&mut b, order(Side::Offer, 10003, 50, 1), ME, &none);
        submit(&mut b, order(Side::Offer, 10004, 100, 2), ME, &none);
        let ev = submit(&mut b, order(Side::Bid, 10005, 100, 3), ME, &none);
        assert_eq!(fills(&ev), vec![(10003, 50), (10004, 50)]);
        assert_eq!(ev.len(), 2);
        assert_eq!(b.quote().offer_shares, 50);
    }

    #[test]
    fn aon_without_enough_liquidity_is_cancelled() {
        let mut b = OrderBook::new();
        let none = NbboMsg::default();
        submit(&mut b, order(Side::Offer, 10000, 150, 1), ME, &none);
        let mut o = order(Side::Bid, 10000, 200, 2);
        o.all_or_nothing = true;
        let ev = submit(&mut b, o, ME, &none);
        assert!(matches!(ev.as_slice(), [BookEvent::Cancelled { shares: 200, .. }]));
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn trade_through_routes_to_nbbo_holder() {
        let mut b = OrderBook::new();
        submit(&mut b, order(Side::Offer, 10010, 100, 1), ME, &NbboMsg::default());
        let mut nbbo = NbboMsg::default();
        nbbo.quote.offer_price = Some(Price::from_cents(10005));
        nbbo.quote.offer_shares = 100;
        nbbo.offer_exchange = Some(AgentId(2));
        let ev = submit(&mut b, order(Side::Bid, 10010, 100, 2), ME, &nbbo);
        assert_eq!(ev, vec![BookEvent::Routed { to: AgentId(2), owner: AgentId(10), order_id: 2, shares: 100 }]);
        let mut iso = order(Side::Bid, 10010, 100, 3);
        iso.iso = true;
        assert_eq!(fills(&submit(&mut b, iso, ME, &nbbo)), vec![(10010, 100)]);
    }

    #[test]
    fn priority_price_visibility_time() {
        let mut b = OrderBook::new();
        let none = NbboMsg::default();
        let mut hidden = order(Side::Bid, 10001, 10, 1);
        hidden.hidden = true;
        submit(&mut b, hidden, ME, &none);
        submit(&mut b, order(Side::Bid, 10001, 10, 2), ME, &none);
        submit(&mut b, order(Side::Bid, 10001, 10, 3), ME, &none);
        submit(&mut b, order(Side::Bid, 10002, 10, 4), ME, &none);
        let ids: Vec<u64> = b.orders(Side::Bid).map(|o| o.order_id).collect();
        assert_eq!(ids, vec![4, 2, 3, 1]);
        assert_eq!(b.quote().bid_price, Some(Price::from_cents(10002)));
    }

    #[test]
    fn quote_aggregates_visible_level() {
        let mut b = OrderBook::new();
        let none = NbboMsg::default();
        submit(&mut b, order(Side::Bid, 10001, 100, 1), ME, &none);
        submit(&mut b, order(Side::Bid, 10001, 50, 2), ME, &none);
        let mut h = order(Side::Offer, 10005, 50, 3);
        h.hidden = true;
        submit(&mut b, h, ME, &none);
        let q = b.quote();
        assert_eq!((q.bid_price, q.bid_shares), (Some(Price::from_cents(10001)), 150));
        assert_eq!(q.offer_price, None);
        assert!(OrderBook::new().quote().is_empty());
    }

    #[test]
    fn modify_partial_and_full() {
        let mut b = OrderBook::new();
        submit(&mut b, order(Side::Bid, 10000, 100, 1), ME, &NbboMsg::default());
        assert_eq!(b.modify(1, 40).unwrap().remaining, 60);
        assert_eq!(b.quote().bid_shares, 60);
        assert_eq!(b.modify(1, 100).unwrap().remaining, 0);
        assert!(b.is_empty());
        assert!(b.modify(999, 1).is_none());
    }

    #[test]
    fn midpoint_reprice_rematches() {
        let mut b = OrderBook::new();
        let none = NbboMsg::default();
        let mut m = order(Side::Bid, 10000, 100, 1);
        m.midpoint = true;
        m.hidden = true;
        submit(&mut b, m, ME, &none);
        submit(&mut b, order(Side::Offer, 10002, 60, 2), ME, &none);
        assert!(b.reprice_midpoints(Price::from_subticks(1_000_100)).is_empty());
        assert_eq!(b.get(1).unwrap().price, Price::from_cents(10001));
        let ev = b.reprice_midpoints(Price::from_cents(10002));
        assert_eq!(fills(&ev), vec![(10002, 60)]);
        match &ev[0] {
            BookEvent::Fill(f) => assert_eq!((f.taker_side, f.taker.remaining), (Side::Bid, 40)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn close_cancels_short_lived_orders() {
        let mut b = OrderBook::new();
        let none = NbboMsg::default();
        submit(&mut b, order(Side::Bid, 10000, 100, 1), ME, &none);
        let mut long = order(Side::Bid, 9999, 100, 2);
        long.time_in_force = TimeInForce::from_micros(48 * 3_600_000_000);
        submit(&mut b, long, ME, &none);
        let ev = b.close_day(SimTime::from_micros(1_000));
        assert_eq!(ev.len(), 1);
        assert_eq!(b.len(), 1);
        assert!(OrderBook::new().close_day(SimTime::ZERO).is_empty());
    }

    #[test]
    fn immediate_remainder_cancelled() {
        let mut b = OrderBook::new();
        let none = NbboMsg::default();
        submit(&mut b, order(Side::Offer, 10000, 30, 1), ME, &none);
        let mut ioc = order(Side::Bid, 10000, 100, 2);
        ioc.time_in_force = TimeInForce::IMMEDIATE;
        let ev = submit(&mut b, ioc, ME, &none);
        assert_eq!(fills(&ev), vec![(10000, 30)]);
        assert!(matches!(ev[1], BookEvent::Cancelled { shares: 70, seq: None, .. }));
        assert!(b.is_empty());
    }
}
