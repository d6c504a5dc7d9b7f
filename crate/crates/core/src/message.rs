//! Messages exchanged between agents over the communication network.
//!
//! Every message shares a [`MessageHeader`]; the [`Body`] varies by type. The
//! same `Add`/`Mod` bodies serve as requests (trader to exchange) and as feed
//! messages (exchange to subscribers).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::types::{AgentId, OrderType, Price, Side, SimTime, SymbolId, TimeInForce};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageHeader {
    pub message_id: u64,
    pub related_id: Option<u64>,
    pub sender_id: AgentId,
    pub recipient_id: AgentId,
    pub send_time: SimTime,
    pub receive_time: SimTime,
    pub trading_symbol: SymbolId,
    /// Uniform draw on [0, 1); breaks ties between equal receive times.
    pub random: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AddOrder {
    pub sequence_number: Option<u64>,
    pub order_type: OrderType,
    pub side: Side,
    pub shares: u32,
    pub limit_price: Price,
    pub all_or_nothing: bool,
    pub hidden: bool,
    pub iso: bool,
    pub time_in_force: TimeInForce,
}

impl AddOrder {
    /// Plain day limit order with no modifiers.
    pub fn limit(side: Side, shares: u32, limit_price: Price) -> Self {
        AddOrder {
            sequence_number: None,
            order_type: OrderType::Limit,
            side,
            shares,
            limit_price,
            all_or_nothing: false,
            hidden: false,
            iso: false,
            time_in_force: TimeInForce::DAY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModOrder {
    pub sequence_number: u64,
    pub side: Side,
    pub shares_to_remove: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeMsg {
    /// Sequence number of the resting order that was executed.
    pub sequence_number: u64,
    pub price: Price,
    pub shares: u32,
    pub triggering_side: Side,
    pub iso: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub price: Price,
    pub shares: u64,
}

/// Top of one order book. A side is absent when the book side holds no
/// displayed liquidity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteMsg {
    pub bid_price: Option<Price>,
    pub bid_shares: u64,
    pub offer_price: Option<Price>,
    pub offer_shares: u64,
}

impl QuoteMsg {
    pub fn new(bid: Option<Level>, offer: Option<Level>) -> Self {
        QuoteMsg {
            bid_price: bid.map(|l| l.price),
            bid_shares: bid.map_or(0, |l| l.shares),
            offer_price: offer.map(|l| l.price),
            offer_shares: offer.map_or(0, |l| l.shares),
        }
    }

    pub fn side(&self, side: Side) -> Option<Level> {
        match side {
            Side::Bid => self.bid_price.map(|price| Level { price, shares: self.bid_shares }),
            Side::Offer => self.offer_price.map(|price| Level { price, shares: self.offer_shares }),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bid_price.is_none() && self.offer_price.is_none()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NbboMsg {
    #[serde(flatten)]
    pub quote: QuoteMsg,
    pub bid_exchange: Option<AgentId>,
    pub offer_exchange: Option<AgentId>,
}

impl NbboMsg {
    pub fn holder(&self, side: Side) -> Option<AgentId> {
        match side {
            Side::Bid => self.bid_exchange,
            Side::Offer => self.offer_exchange,
        }
    }

    pub fn price(&self, side: Side) -> Option<Price> {
        self.quote.side(side).map(|l| l.price)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LuldBandMsg {
    pub upper_band: Price,
    pub lower_band: Price,
}

impl LuldBandMsg {
    pub fn midpoint(&self) -> Price {
        Price::from_subticks((self.upper_band.subticks() + self.lower_band.subticks()).div_euclid(2))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Liquidity {
    Maker,
    Taker,
}

/// What a receipt reports. Carries the details a trader needs to keep its
/// holdings and order tracking exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReceiptKind {
    AddAccepted { sequence_number: u64 },
    Modified { sequence_number: Option<u64>, shares_removed: u32, remaining: u32 },
    Traded { price: Price, shares: u32, side: Side, fee: i64, liquidity: Liquidity },
    Routed { to: AgentId, shares: u32 },
    Rejected,
}

/// Private response to the sender of a request. `related_id` in the header
/// holds the sender's original order message id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceiptMsg {
    pub success: bool,
    pub reason: Option<String>,
    #[serde(flatten)]
    pub kind: ReceiptKind,
}

impl ReceiptMsg {
    pub fn ok(kind: ReceiptKind) -> Self {
        ReceiptMsg { success: true, reason: None, kind }
    }

    pub fn rejected(reason: impl Into<String>) -> Self {
        ReceiptMsg { success: false, reason: Some(reason.into()), kind: ReceiptKind::Rejected }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerEvent {
    Auction,
    Trade,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerMsg {
    pub trigger_event: TriggerEvent,
}

/// Trade or quote forwarded on a SIP's TAQ feed, stamped with the SIP's
/// receive time. The exchange's original send time and identity are kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SipWrapped<T> {
    pub sip_time: SimTime,
    pub exchange: AgentId,
    pub exchange_send_time: SimTime,
    pub payload: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Body {
    Add(AddOrder),
    Mod(ModOrder),
    Trade(TradeMsg),
    Quote(QuoteMsg),
    Nbbo(NbboMsg),
    Luld(LuldBandMsg),
    Receipt(ReceiptMsg),
    Trigger(TriggerMsg),
    SipTrade(SipWrapped<TradeMsg>),
    SipQuote(SipWrapped<QuoteMsg>),
}

impl Body {
    /// Feed channel this body is published on, if it is a feed message.
    pub fn channel(&self) -> Option<Channel> {
        Some(match self {
            Body::Add(_) => Channel::Add,
            Body::Mod(_) => Channel::Mod,
            Body::Trade(_) => Channel::Trade,
            Body::Quote(_) => Channel::Quote,
            Body::Nbbo(_) => Channel::Nbbo,
            Body::Luld(_) => Channel::Luld,
            Body::SipTrade(_) => Channel::SipTrade,
            Body::SipQuote(_) => Channel::SipQuote,
            Body::Receipt(_) | Body::Trigger(_) => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub header: MessageHeader,
    pub body: Body,
}

/// Broadcast feeds an agent can subscribe to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Add,
    Mod,
    Trade,
    Quote,
    Nbbo,
    Luld,
    SipTrade,
    SipQuote,
}

impl Channel {
    pub const ALL: [Channel; 8] = [
        Channel::Add,
        Channel::Mod,
        Channel::Trade,
        Channel::Quote,
        Channel::Nbbo,
        Channel::Luld,
        Channel::SipTrade,
        Channel::SipQuote,
    ];

    pub const fn bit(self) -> u8 {
        1 << self as u8
    }
}

/// Set of channels, used for subscriptions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChannelSet(u8);

impl ChannelSet {
    pub const fn of(channels: &[Channel]) -> Self {
        let mut bits = 0;
        let mut i = 0;
        while i < channels.len() {
            bits |= channels[i].bit();
            i += 1;
        }
        ChannelSet(bits)
    }

    pub const fn contains(self, channel: Channel) -> bool {
        self.0 & channel.bit() != 0
    }

    pub const fn union(self, other: ChannelSet) -> Self {
        ChannelSet(self.0 | other.0)
    }
}

/// Delivery order: receive time, then the header's random draw, then id.
pub fn message_order(a: &Message, b: &Message) -> Ordering {
    header_order(&a.header, &b.header)
}

pub(crate) fn header_order(a: &MessageHeader, b: &MessageHeader) -> Ordering {
    a.receive_time
        .cmp(&b.receive_time)
        .then_with(|| a.random.total_cmp(&b.random))
        .then_with(|| a.message_id.cmp(&b.message_id))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub fn header(id: u64, receive: u64, random: f64) -> MessageHeader {
        MessageHeader {
            message_id: id,
            related_id: None,
            sender_id: AgentId(0),
            recipient_id: AgentId(1),
            send_time: SimTime::ZERO,
            receive_time: SimTime::from_micros(receive),
            trading_symbol: SymbolId(0),
            random,
        }
    }

    fn msg(id: u64, receive: u64, random: f64) -> Message {
        Message {
            header: header(id, receive, random),
            body: Body::Trigger(TriggerMsg { trigger_event: TriggerEvent::Trade }),
        }
    }

    #[test]
    fn order_examples() {
        assert_eq!(message_order(&msg(1, 10, 0.9), &msg(2, 20, 0.1)), Ordering::Less);
        assert_eq!(message_order(&msg(1, 10, 0.2), &msg(2, 10, 0.7)), Ordering::Less);
        assert_eq!(message_order(&msg(5, 10, 0.5), &msg(9, 10, 0.5)), Ordering::Less);
        assert_eq!(message_order(&msg(9, 10, 0.5), &msg(5, 10, 0.5)), Ordering::Greater);
    }

    fn arb_price() -> impl Strategy<Value = Price> {
        (0i64..2_000_000).prop_map(Price::from_subticks)
    }

    fn arb_side() -> impl Strategy<Value = Side> {
        prop_oneof![Just(Side::Bid), Just(Side::Offer)]
    }

    fn arb_quote() -> impl Strategy<Value = QuoteMsg> {
        (proptest::option::of(arb_price()), 0u64..10_000, proptest::option::of(arb_price()), 0u64..10_000)
            .prop_map(|(bp, bs, op, os)| QuoteMsg { bid_price: bp, bid_shares: bs, offer_price: op, offer_shares: os })
    }

    fn arb_trade() -> impl Strategy<Value = TradeMsg> {
        (any::<u64>(), arb_price(), 1u32..10_000, arb_side(), any::<bool>())
            .prop_map(|(s, p, n, side, iso)| TradeMsg { sequence_number: s, price: p, shares: n, triggering_side: side, iso })
    }

    fn arb_body() -> impl Strategy<Value = Body> {
        let order_type = prop_oneof![Just(OrderType::Limit), Just(OrderType::Market), Just(OrderType::Midpoint)];
        let tif = prop_oneof![Just(TimeInForce::DAY), any::<u64>().prop_map(TimeInForce::from_micros)];
        let add = (proptest::option::of(any::<u64>()), order_type, arb_side(), 1u32..100_000, arb_price(), any::<[bool; 3]>(), tif)
            .prop_map(|(seq, ot, side, shares, px, f, tif)| {
                Body::Add(AddOrder {
                    sequence_number: seq,
                    order_type: ot,
                    side,
                    shares,
                    limit_price: px,
                    all_or_nothing: f[0],
                    hidden: f[1],
                    iso: f[2],
                    time_in_force: tif,
                })
            });
        let receipt_kind = prop_oneof![
            any::<u64>().prop_map(|s| ReceiptKind::AddAccepted { sequence_number: s }),
            (proptest::option::of(any::<u64>()), any::<u32>(), any::<u32>())
                .prop_map(|(s, r, m)| ReceiptKind::Modified { sequence_number: s, shares_removed: r, remaining: m }),
            (arb_price(), any::<u32>(), arb_side(), any::<i64>(), any::<bool>()).prop_map(|(p, n, s, fee, maker)| {
                ReceiptKind::Traded {
                    price: p,
                    shares: n,
                    side: s,
                    fee,
                    liquidity: if maker { Liquidity::Maker } else { Liquidity::Taker },
                }
            }),
            (any::<u32>(), any::<u32>()).prop_map(|(a, n)| ReceiptKind::Routed { to: AgentId(a), shares: n }),
            Just(ReceiptKind::Rejected),
        ];
        prop_oneof![
            add,
            (any::<u64>(), arb_side(), 1u32..1000)
                .prop_map(|(s, side, n)| Body::Mod(ModOrder { sequence_number: s, side, shares_to_remove: n })),
            arb_trade().prop_map(Body::Trade),
            arb_quote().prop_map(Body::Quote),
            (arb_quote(), proptest::option::of(any::<u32>()), proptest::option::of(any::<u32>())).prop_map(|(q, b, o)| {
                Body::Nbbo(NbboMsg { quote: q, bid_exchange: b.map(AgentId), offer_exchange: o.map(AgentId) })
            }),
            (arb_price(), arb_price()).prop_map(|(a, b)| Body::Luld(LuldBandMsg { upper_band: a, lower_band: b })),
            (receipt_kind, any::<bool>(), proptest::option::of("[a-z ]{0,12}"))
                .prop_map(|(kind, success, reason)| Body::Receipt(ReceiptMsg { success, reason, kind })),
            prop_oneof![Just(TriggerEvent::Auction), Just(TriggerEvent::Trade)]
                .prop_map(|e| Body::Trigger(TriggerMsg { trigger_event: e })),
            (any::<u64>(), any::<u32>(), any::<u64>(), arb_trade()).prop_map(|(t, x, s, p)| {
                Body::SipTrade(SipWrapped {
                    sip_time: SimTime::from_micros(t),
                    exchange: AgentId(x),
                    exchange_send_time: SimTime::from_micros(s),
                    payload: p,
                })
            }),
            (any::<u64>(), any::<u32>(), any::<u64>(), arb_quote()).prop_map(|(t, x, s, p)| {
                Body::SipQuote(SipWrapped {
                    sip_time: SimTime::from_micros(t),
                    exchange: AgentId(x),
                    exchange_send_time: SimTime::from_micros(s),
                    payload: p,
                })
            }),
        ]
    }

    fn arb_message() -> impl Strategy<Value = Message> {
        (any::<u64>(), proptest::option::of(any::<u64>()), any::<(u32, u32)>(), any::<(u64, u64)>(), any::<u16>(), 0.0f64..1.0, arb_body())
            .prop_map(|(id, rel, (s, r), (st, rt), sym, random, body)| Message {
                header: MessageHeader {
                    message_id: id,
                    related_id: rel,
                    sender_id: AgentId(s),
                    recipient_id: AgentId(r),
                    send_time: SimTime::from_micros(st),
                    receive_time: SimTime::from_micros(rt),
                    trading_symbol: SymbolId(sym),
                    random,
                },
                body,
            })
    }

    proptest! {
        #[test]
        fn json_round_trip(m in arb_message()) {
            let encoded = serde_json::to_string(&m).unwrap();
            let decoded: Message = serde_json::from_str(&encoded).unwrap();
            prop_assert_eq!(decoded, m);
        }

        #[test]
        fn order_is_strict_total(a in arb_message(), b in arb_message(), c in arb_message()) {
            let ab = message_order(&a, &b);
            prop_assert_eq!(ab, message_order(&b, &a).reverse());
            if a.header.message_id != b.header.message_id {
                prop_assert_ne!(ab, Ordering::Equal);
            }
            if ab == Ordering::Less && message_order(&b, &c) == Ordering::Less {
                prop_assert_eq!(message_order(&a, &c), Ordering::Less);
            }
        }
    }
}
