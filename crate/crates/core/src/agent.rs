//! What an agent sees while it handles a message: the clock, its own random
//! stream, the calendar, and an outbox.

use rand_chacha::ChaCha8Rng;

use crate::calendar::TradingCalendar;
use crate::message::Body;
use crate::types::{AgentId, SimTime, SymbolId};

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Agent(AgentId),
    /// Every subscriber of the sender's feed for this channel and symbol.
    Subscribers,
}

/// A message waiting for the engine to stamp and dispatch it.
#[derive(Clone, Debug, PartialEq)]
pub struct Outgoing {
    /// Pre-assigned id for direct messages; feed copies get fresh ids.
    pub message_id: Option<u64>,
    pub target: Target,
    pub symbol: SymbolId,
    pub related_id: Option<u64>,
    /// Header sender when it differs from the physical origin (routed orders).
    pub sender: Option<AgentId>,
    /// Extra delay before the message leaves.
    pub hold_us: u64,
    pub body: Body,
}

pub struct Ctx<'a> {
    pub now: SimTime,
    pub me: AgentId,
    pub rng: &'a mut ChaCha8Rng,
    pub calendar: &'a TradingCalendar,
    outbox: &'a mut Vec<Outgoing>,
    next_id: &'a mut u64,
}

impl<'a> Ctx<'a> {
    pub fn new(
        now: SimTime,
        me: AgentId,
        rng: &'a mut ChaCha8Rng,
        calendar: &'a TradingCalendar,
        outbox: &'a mut Vec<Outgoing>,
        next_id: &'a mut u64,
    ) -> Self {
        Ctx { now, me, rng, calendar, outbox, next_id }
    }

    pub fn alloc_id(&mut self) -> u64 {
        let id = *self.next_id;
        *self.next_id += 1;
        id
    }

    /// Sends `body` to one agent and returns the message id.
    pub fn send(&mut self, to: AgentId, symbol: SymbolId, body: Body) -> u64 {
        self.send_related(to, symbol, None, body)
    }

    pub fn send_related(&mut self, to: AgentId, symbol: SymbolId, related_id: Option<u64>, body: Body) -> u64 {
        let id = self.alloc_id();
        self.outbox.push(Outgoing {
            message_id: Some(id),
            target: Target::Agent(to),
            symbol,
            related_id,
            sender: None,
            hold_us: 0,
            body,
        });
        id
    }

    /// Sends on behalf of `sender`, leaving from this agent's location.
    pub fn forward(&mut self, to: AgentId, sender: AgentId, symbol: SymbolId, related_id: Option<u64>, body: Body) -> u64 {
        let id = self.alloc_id();
        self.outbox.push(Outgoing {
            message_id: Some(id),
            target: Target::Agent(to),
            symbol,
            related_id,
            sender: Some(sender),
            hold_us: 0,
            body,
        });
        id
    }

    pub fn publish(&mut self, symbol: SymbolId, body: Body) {
        self.outbox.push(Outgoing {
            message_id: None,
            target: Target::Subscribers,
            symbol,
            related_id: None,
            sender: None,
            hold_us: 0,
            body,
        });
    }

    /// Sends `body` to this agent after `delay_us` plus network transit.
    pub fn schedule(&mut self, delay_us: u64, symbol: SymbolId, body: Body) -> u64 {
        let id = self.alloc_id();
        self.outbox.push(Outgoing {
            message_id: Some(id),
            target: Target::Agent(self.me),
            symbol,
            related_id: None,
            sender: None,
            hold_us: delay_us,
            body,
        });
        id
    }
}
