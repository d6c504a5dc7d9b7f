//! Exchange agents: request validation, matching, feeds and receipts.

pub mod book;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Ctx;
use crate::message::{
    AddOrder, Body, Liquidity, LuldBandMsg, Message, ModOrder, NbboMsg, QuoteMsg, ReceiptKind, ReceiptMsg, TradeMsg,
};
use crate::quotes::BestQuoteBook;
use crate::types::{midpoint, AgentId, OrderType, Side, SymbolId, TimeInForce};

pub use book::{BookEvent, Fill, ModOutcome, NewOrder, OrderBook, Party, RestingOrder};

/// Per-share access fees in subticks. Negative values are rebates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeSchedule {
    #[serde(default)]
    pub maker_fee: i64,
    #[serde(default)]
    pub taker_fee: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeStats {
    pub adds: u64,
    pub mods: u64,
    pub trades: u64,
    pub quotes: u64,
    pub routed: u64,
    pub rejected: u64,
}

pub struct Exchange {
    id: AgentId,
    fees: FeeSchedule,
    listed: Vec<bool>,
    books: Vec<OrderBook>,
    nbbo: Vec<NbboMsg>,
    luld: Vec<Option<LuldBandMsg>>,
    dbbo: BestQuoteBook,
    last_quote: Vec<QuoteMsg>,
    next_seq: u64,
    fee_income: i64,
    stats: ExchangeStats,
}

impl Exchange {
    pub fn new(id: AgentId, fees: FeeSchedule, listed: Vec<bool>) -> Self {
        let n = listed.len();
        Exchange {
            id,
            fees,
            listed,
            books: vec![OrderBook::new(); n],
            nbbo: vec![NbboMsg::default(); n],
            luld: vec![None; n],
            dbbo: BestQuoteBook::new(n, 0),
            last_quote: vec![QuoteMsg::default(); n],
            next_seq: 0,
            fee_income: 0,
            stats: ExchangeStats::default(),
        }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn fees(&self) -> FeeSchedule {
        self.fees
    }

    pub fn lists(&self, symbol: SymbolId) -> bool {
        self.listed.get(symbol.index()).copied().unwrap_or(false)
    }

    pub fn book(&self, symbol: SymbolId) -> &OrderBook {
        &self.books[symbol.index()]
    }

    pub fn nbbo(&self, symbol: SymbolId) -> &NbboMsg {
        &self.nbbo[symbol.index()]
    }

    /// Direct best bid and offer from quotes received from every exchange, this one included.
    pub fn dbbo(&self) -> &BestQuoteBook {
        &self.dbbo
    }

    /// Net fees collected, in subticks.
    pub fn fee_income(&self) -> i64 {
        self.fee_income
    }

    pub fn stats(&self) -> &ExchangeStats {
        &self.stats
    }

    pub fn on_message(&mut self, msg: &Message, ctx: &mut Ctx) {
        let symbol = msg.header.trading_symbol;
        match &msg.body {
            Body::Add(add) => self.on_add(msg, add, ctx),
            Body::Mod(m) => self.on_mod(msg, m, ctx),
            Body::Nbbo(n) if self.lists(symbol) => {
                self.nbbo[symbol.index()] = *n;
                if let Ok(mid) = midpoint(n.quote.bid_price, n.quote.offer_price) {
                    let events = self.books[symbol.index()].reprice_midpoints(mid);
                    self.apply(symbol, events, None, ctx);
                }
            }
            Body::Luld(l) if self.lists(symbol) => self.luld[symbol.index()] = Some(*l),
            Body::Quote(q) if symbol.index() < self.listed.len() => {
                self.dbbo.update(symbol, msg.header.sender_id, *q);
            }
            _ => {}
        }
    }

    fn reject(&mut self, msg: &Message, reason: &str, ctx: &mut Ctx) {
        self.stats.rejected += 1;
        let related = msg.header.related_id.unwrap_or(msg.header.message_id);
        ctx.send_related(msg.header.sender_id, msg.header.trading_symbol, Some(related), Body::Receipt(ReceiptMsg::rejected(reason)));
    }

    fn validate_common(&self, msg: &Message, ctx: &Ctx) -> Result<(), &'static str> {
        if !ctx.calendar.is_trading_time(ctx.now) {
            return Err("market closed");
        }
        if !self.lists(msg.header.trading_symbol) {
            return Err("unknown symbol");
        }
        Ok(())
    }

    fn on_add(&mut self, msg: &Message, add: &AddOrder, ctx: &mut Ctx) {
        let symbol = msg.header.trading_symbol;
        if let Err(reason) = self.validate_common(msg, ctx) {
            return self.reject(msg, reason, ctx);
        }
        if add.shares == 0 {
            return self.reject(msg, "shares must be positive", ctx);
        }
        let s = symbol.index();
        let price = match add.order_type {
            OrderType::Limit if !add.limit_price.is_quote_aligned() => {
                return self.reject(msg, "limit price not on the $0.01 grid", ctx);
            }
            OrderType::Limit => add.limit_price,
            OrderType::Market => match (self.luld[s], add.side) {
                (Some(b), Side::Bid) => b.upper_band,
                (Some(b), Side::Offer) => b.lower_band,
                (None, _) => return self.reject(msg, "no LULD bands for market order", ctx),
            },
            OrderType::Midpoint => match midpoint(self.nbbo[s].quote.bid_price, self.nbbo[s].quote.offer_price) {
                Ok(mid) => mid,
                Err(_) => return self.reject(msg, "midpoint undefined", ctx),
            },
        };
        self.stats.adds += 1;
        let order = NewOrder {
            owner: msg.header.sender_id,
            order_id: msg.header.related_id.unwrap_or(msg.header.message_id),
            side: add.side,
            price,
            shares: add.shares,
            hidden: add.hidden || add.order_type == OrderType::Midpoint,
            all_or_nothing: add.all_or_nothing,
            iso: add.iso,
            midpoint: add.order_type == OrderType::Midpoint,
            time_in_force: if add.all_or_nothing { TimeInForce::IMMEDIATE } else { add.time_in_force },
            accept_time: ctx.now,
            tie_break: ctx.rng.random::<f64>(),
        };
        let events = self.books[s].submit(order, self.id, &self.nbbo[s], &mut self.next_seq);
        self.apply(symbol, events, Some(add), ctx);
    }

    fn on_mod(&mut self, msg: &Message, m: &ModOrder, ctx: &mut Ctx) {
        let symbol = msg.header.trading_symbol;
        if let Err(reason) = self.validate_common(msg, ctx) {
            return self.reject(msg, reason, ctx);
        }
        if m.shares_to_remove == 0 {
            return self.reject(msg, "shares_to_remove must be positive", ctx);
        }
        let book = &mut self.books[symbol.index()];
        let owned = book.get(m.sequence_number).is_some_and(|o| o.owner == msg.header.sender_id && o.side == m.side);
        let Some(out) = owned.then(|| book.modify(m.sequence_number, m.shares_to_remove)).flatten() else {
            return self.reject(msg, "unknown order", ctx);
        };
        self.stats.mods += 1;
        ctx.send_related(
            out.owner,
            symbol,
            Some(out.order_id),
            Body::Receipt(ReceiptMsg::ok(ReceiptKind::Modified {
                sequence_number: Some(out.seq),
                shares_removed: out.removed,
                remaining: out.remaining,
            })),
        );
        if !out.hidden {
            ctx.publish(symbol, Body::Mod(ModOrder { sequence_number: out.seq, side: out.side, shares_to_remove: out.removed }));
        }
        self.requote(symbol, ctx);
    }

    /// Cancels orders that expire at the session close.
    pub fn close_day(&mut self, ctx: &mut Ctx) {
        for s in 0..self.books.len() {
            let events = self.books[s].close_day(ctx.now);
            if !events.is_empty() {
                self.apply(SymbolId(s as u16), events, None, ctx);
            }
        }
    }

    fn traded_receipt(&mut self, to: Party, fill: &Fill, side: Side, liquidity: Liquidity, symbol: SymbolId, ctx: &mut Ctx) {
        let per_share = match liquidity {
            Liquidity::Maker => self.fees.maker_fee,
            Liquidity::Taker => self.fees.taker_fee,
        };
        let fee = per_share * fill.shares as i64;
        self.fee_income += fee;
        ctx.send_related(
            to.owner,
            symbol,
            Some(to.order_id),
            Body::Receipt(ReceiptMsg::ok(ReceiptKind::Traded { price: fill.price, shares: fill.shares, side, fee, liquidity })),
        );
    }

    /// Turns book events into feed messages and receipts. `add` is the
    /// request that produced them, needed to forward a routed remainder.
    fn apply(&mut self, symbol: SymbolId, events: Vec<BookEvent>, add: Option<&AddOrder>, ctx: &mut Ctx) {
        for ev in events {
            match ev {
                BookEvent::Fill(f) => {
                    self.stats.trades += 1;
                    ctx.publish(
                        symbol,
                        Body::Trade(TradeMsg {
                            sequence_number: f.maker.seq.expect("makers rest"),
                            price: f.price,
                            shares: f.shares,
                            triggering_side: f.taker_side,
                            iso: f.iso,
                        }),
                    );
                    self.traded_receipt(f.maker, &f, f.taker_side.opposite(), Liquidity::Maker, symbol, ctx);
                    self.traded_receipt(f.taker, &f, f.taker_side, Liquidity::Taker, symbol, ctx);
                }
                BookEvent::Rested { seq, owner, order_id, side, price, shares, hidden } => {
                    ctx.send_related(
                        owner,
                        symbol,
                        Some(order_id),
                        Body::Receipt(ReceiptMsg::ok(ReceiptKind::AddAccepted { sequence_number: seq })),
                    );
                    if !hidden {
                        let original = add.expect("only submissions rest");
                        ctx.publish(
                            symbol,
                            Body::Add(AddOrder {
                                sequence_number: Some(seq),
                                order_type: original.order_type,
                                side,
                                shares,
                                limit_price: price,
                                all_or_nothing: original.all_or_nothing,
                                hidden: false,
                                iso: original.iso,
                                time_in_force: original.time_in_force,
                            }),
                        );
                    }
                }
                BookEvent::Cancelled { seq, owner, order_id, side, shares, hidden } => {
                    ctx.send_related(
                        owner,
                        symbol,
                        Some(order_id),
                        Body::Receipt(ReceiptMsg::ok(ReceiptKind::Modified {
                            sequence_number: seq,
                            shares_removed: shares,
                            remaining: 0,
                        })),
                    );
                    if let (Some(seq), false) = (seq, hidden) {
                        ctx.publish(symbol, Body::Mod(ModOrder { sequence_number: seq, side, shares_to_remove: shares }));
                    }
                }
                BookEvent::Routed { to, owner, order_id, shares } => {
                    self.stats.routed += 1;
                    ctx.send_related(owner, symbol, Some(order_id), Body::Receipt(ReceiptMsg::ok(ReceiptKind::Routed { to, shares })));
                    let mut forwarded = add.expect("only submissions route").clone();
                    forwarded.shares = shares;
                    forwarded.sequence_number = None;
                    ctx.forward(to, owner, symbol, Some(order_id), Body::Add(forwarded));
                }
            }
        }
        self.requote(symbol, ctx);
    }

    fn requote(&mut self, symbol: SymbolId, ctx: &mut Ctx) {
        let s = symbol.index();
        let q = self.books[s].quote();
        if q != self.last_quote[s] {
            self.last_quote[s] = q;
            self.stats.quotes += 1;
            self.dbbo.update(symbol, self.id, q);
            ctx.publish(symbol, Body::Quote(q));
        }
    }
}
