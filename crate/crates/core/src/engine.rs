//! The discrete-event loop: builds agents from a configuration, wires feed
//! subscriptions, and delivers messages in global order until the end of
//! the last simulated day.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Ctx, Outgoing, Target};
use crate::calendar::{Boundary, TradingCalendar};
use crate::config::{SimulationConfig, TraderKind, RANDOM_NODE};
use crate::error::Result;
use crate::exchange::{Exchange, ExchangeStats};
use crate::message::{Body, Channel, ChannelSet, Message, MessageHeader, ReceiptKind};
use crate::network::{InFlightQueue, Network};
use crate::observer::{FeedCounts, FeedWriter, Observer};
use crate::sip::{Sip, SipStats};
use crate::traders::{
    Arbitrageur, MinimalIntelligence, Strategy, Trader, TraderCore, TraderStats, VolumeDist, ZeroIntelligence, ZipTrader,
};
use crate::types::{AgentId, Price, Side, SimTime, SymbolId, MICROS_PER_DAY};

/// 64-bit FNV-1a, used to derive per-component random streams from names.
pub fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent stream for a named component, so adding an agent does not
/// perturb the draws of any other.
pub fn component_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name));
    rng
}

pub enum Agent {
    Exchange(Exchange),
    Sip(Sip),
    Trader(Box<Trader>),
    Observer(Observer),
}

impl Agent {
    pub fn kind(&self) -> &'static str {
        match self {
            Agent::Exchange(_) => "exchange",
            Agent::Sip(_) => "sip",
            Agent::Trader(t) => t.strategy.kind(),
            Agent::Observer(_) => "observer",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub id: AgentId,
    pub name: String,
    pub kind: String,
    pub node: String,
}

#[derive(Clone, Copy, Debug)]
struct Subscription {
    subscriber: AgentId,
    channels: ChannelSet,
    symbols: u64,
}

fn mask(flags: &[bool]) -> u64 {
    flags.iter().enumerate().filter(|(_, &f)| f).fold(0, |m, (i, _)| m | (1u64 << i))
}

/// What one call to [`Simulation::step`] did.
#[derive(Clone, Debug, PartialEq)]
pub enum StepEvent {
    Boundary { time: SimTime, kind: Boundary },
    Delivered { time: SimTime, sender: AgentId, recipient: AgentId, symbol: SymbolId, channel: Option<Channel> },
}

/// Total cash and shares across traders, exchange fee income, and
/// fills still in flight.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub cash: i128,
    pub shares: Vec<i64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub checks: u64,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangeReport {
    pub name: String,
    pub stats: ExchangeStats,
    pub fee_income: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SipReport {
    pub name: String,
    pub stats: SipStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub seed: u64,
    pub days: u32,
    pub start_date: NaiveDate,
    pub end_time: SimTime,
    /// Subticks per dollar in every exported price.
    pub price_scale: i64,
    pub symbols: Vec<String>,
    pub agents: Vec<AgentInfo>,
    pub messages_delivered: u64,
    pub feed: FeedCounts,
    pub exchanges: Vec<ExchangeReport>,
    pub sips: Vec<SipReport>,
    pub traders: TraderStats,
    pub conservation: ConservationReport,
    pub files: Vec<String>,
}

impl RunSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE))?)?)
    }
}

pub const SUMMARY_FILE: &str = "run_summary.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Where and whether to keep the observer's records.
#[derive(Clone, Debug, Default)]
pub struct OutputOptions {
    /// Directory for JSON-lines feeds and the run summary.
    pub dir: Option<PathBuf>,
    /// Hold every observer record in memory.
    pub keep_records: bool,
    pub run_id: Option<String>,
}

pub struct Simulation {
    config: SimulationConfig,
    calendar: TradingCalendar,
    infos: Vec<AgentInfo>,
    agents: Vec<Agent>,
    rngs: Vec<ChaCha8Rng>,
    subs: Vec<Vec<Subscription>>,
    network: Network,
    queue: InFlightQueue,
    outbox: Vec<Outgoing>,
    next_id: u64,
    clock: SimTime,
    end: SimTime,
    next_boundary: (SimTime, Boundary),
    started: bool,
    finished: bool,
    delivered: u64,
    initial: Totals,
    conservation: ConservationReport,
    output: OutputOptions,
    observer: AgentId,
}

impl Simulation {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        Self::with_output(config, OutputOptions::default())
    }

    pub fn with_output(config: SimulationConfig, output: OutputOptions) -> Result<Self> {
        config.validate()?;
        let calendar = config.calendar();
        let n_sym = config.symbols.len();
        let topo = &config.network.topology;
        let mut infos = Vec::new();
        let mut agents = Vec::new();
        let mut rngs = Vec::new();
        let mut nodes = Vec::new();
        let mut push = |name: &str, node: &str, agent: Agent, rng: ChaCha8Rng| -> Result<()> {
            let id = AgentId(infos.len() as u32);
            nodes.push(topo.node_index(node)?);
            infos.push(AgentInfo { id, name: name.to_string(), kind: agent.kind().to_string(), node: node.to_string() });
            agents.push(agent);
            rngs.push(rng);
            Ok(())
        };

        let symbol_flags = |list: &[String]| -> Result<Vec<bool>> {
            let mut f = vec![list.is_empty(); n_sym];
            for s in list {
                f[config.symbol_index(s)?] = true;
            }
            Ok(f)
        };

        let mut exchange_masks = Vec::new();
        for (i, x) in config.exchanges.iter().enumerate() {
            let listed = symbol_flags(&x.symbols)?;
            exchange_masks.push(mask(&listed));
            push(&x.id, &x.node, Agent::Exchange(Exchange::new(AgentId(i as u32), x.fees, listed)), component_rng(config.seed, &x.id))?;
        }
        let n_ex = config.exchanges.len();
        let mut sip_masks = Vec::new();
        for (i, s) in config.sips.iter().enumerate() {
            let managed = symbol_flags(&s.symbols)?;
            sip_masks.push(mask(&managed));
            let id = AgentId((n_ex + i) as u32);
            push(&s.id, &s.node, Agent::Sip(Sip::new(id, &s.params, managed)), component_rng(config.seed, &s.id))?;
        }

        let venues: Vec<Vec<AgentId>> =
            (0..n_sym).map(|s| (0..n_ex).filter(|&x| exchange_masks[x] & (1 << s) != 0).map(|x| AgentId(x as u32)).collect()).collect();
        let mut placement = component_rng(config.placement_seed.unwrap_or(config.seed), "placement");
        let names = config.trader_names();
        let mut name_iter = names.iter();
        let mut trader_kinds = Vec::new();
        for spec in &config.agents {
            for _ in 0..spec.count {
                let name = name_iter.next().expect("one name per trader");
                let id = AgentId(infos_len(&trader_kinds, n_ex + config.sips.len()));
                let node = if spec.node == RANDOM_NODE {
                    topo.nodes[placement.random_range(0..topo.nodes.len())].clone()
                } else {
                    spec.node.clone()
                };
                let mut rng = component_rng(config.seed, name);
                let (cash, shares) = spec.holdings.unwrap_or(spec.kind.default_holdings()).draw(&mut rng, n_sym);
                let volume = VolumeDist::new(spec.volume.unwrap_or_default());
                let strategy = match spec.kind {
                    TraderKind::Zi => Strategy::Zi(ZeroIntelligence::new(n_sym, volume)),
                    TraderKind::Mi => Strategy::Mi(MinimalIntelligence::new(n_sym, volume)),
                    TraderKind::Zip => Strategy::Zip(ZipTrader::new(&mut rng, spec.zip.unwrap_or_default(), n_sym, volume)),
                    TraderKind::Arb => Strategy::Arb(Arbitrageur::new(n_sym)),
                };
                let core = TraderCore::new(id, cash, shares, venues.clone());
                let trader = Trader::new(core, strategy, spec.wait.unwrap_or_default());
                push(name, &node, Agent::Trader(Box::new(trader)), rng)?;
                trader_kinds.push(spec.kind);
            }
        }

        let observer = AgentId((n_ex + config.sips.len() + trader_kinds.len()) as u32);
        let mut agent_names: Vec<String> = config.exchanges.iter().map(|x| x.id.clone()).collect();
        agent_names.extend(config.sips.iter().map(|s| s.id.clone()));
        agent_names.extend(names.iter().cloned());
        agent_names.push(config.observer.id.clone());
        let writer = match &output.dir {
            Some(dir) => Some(FeedWriter::create(dir, agent_names, config.symbols.clone(), config.observer.record_taq)?),
            None => None,
        };
        push(
            &config.observer.id,
            &config.observer.node,
            Agent::Observer(Observer::new(observer, n_sym, output.keep_records, writer)),
            component_rng(config.seed, &config.observer.id),
        )?;

        // Feed subscriptions, indexed by publisher.
        let n = agents.len();
        let mut subs: Vec<Vec<Subscription>> = vec![Vec::new(); n];
        let sub = |subs: &mut Vec<Vec<Subscription>>, publisher: usize, subscriber: usize, channels: &[Channel], symbols: u64| {
            if symbols != 0 {
                subs[publisher].push(Subscription { subscriber: AgentId(subscriber as u32), channels: ChannelSet::of(channels), symbols });
            }
        };
        let sip_ids = n_ex..n_ex + config.sips.len();
        for x in 0..n_ex {
            for s in sip_ids.clone() {
                sub(&mut subs, x, s, &[Channel::Trade, Channel::Quote], exchange_masks[x] & sip_masks[s - n_ex]);
                sub(&mut subs, s, x, &[Channel::Nbbo, Channel::Luld], exchange_masks[x] & sip_masks[s - n_ex]);
            }
            if config.exchange_direct_quotes {
                for y in (0..n_ex).filter(|&y| y != x) {
                    sub(&mut subs, y, x, &[Channel::Quote], exchange_masks[x] & exchange_masks[y]);
                }
            }
        }
        let first_trader = n_ex + config.sips.len();
        for (k, kind) in trader_kinds.iter().enumerate() {
            let t = first_trader + k;
            let sip_channels: &[Channel] = match kind {
                TraderKind::Zip => &[Channel::Nbbo, Channel::Luld, Channel::SipTrade, Channel::SipQuote],
                _ => &[Channel::Nbbo, Channel::Luld],
            };
            for s in sip_ids.clone() {
                sub(&mut subs, s, t, sip_channels, sip_masks[s - n_ex]);
            }
            if *kind == TraderKind::Arb {
                for x in 0..n_ex {
                    sub(&mut subs, x, t, &[Channel::Quote], exchange_masks[x]);
                }
            }
        }
        let o = observer.index();
        for x in 0..n_ex {
            sub(&mut subs, x, o, &[Channel::Add, Channel::Mod, Channel::Trade, Channel::Quote], exchange_masks[x]);
        }
        let sip_feed: &[Channel] = if config.observer.record_taq {
            &[Channel::Nbbo, Channel::Luld, Channel::SipTrade, Channel::SipQuote]
        } else {
            &[Channel::Nbbo, Channel::Luld]
        };
        for s in sip_ids {
            sub(&mut subs, s, o, sip_feed, sip_masks[s - n_ex]);
        }

        let mut network = Network::new(topo, config.network.delays.clone(), component_rng(config.seed, "network"))?;
        for node in nodes {
            network.register(node)?;
        }

        let end_day = calendar.nth_trading_day(config.days) + 1;
        let end = SimTime::from_micros(end_day * MICROS_PER_DAY);
        let next_boundary = calendar.next_boundary(SimTime::ZERO);
        let mut sim = Simulation {
            config,
            calendar,
            infos,
            agents,
            rngs,
            subs,
            network,
            queue: InFlightQueue::new(),
            outbox: Vec::new(),
            next_id: 1,
            clock: SimTime::ZERO,
            end,
            next_boundary,
            started: false,
            finished: false,
            delivered: 0,
            initial: Totals { cash: 0, shares: Vec::new() },
            conservation: ConservationReport::default(),
            output,
            observer,
        };
        sim.initial = sim.totals();
        Ok(sim)
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    pub fn end(&self) -> SimTime {
        self.end
    }

    pub fn agents(&self) -> &[AgentInfo] {
        &self.infos
    }

    pub fn agent(&self, id: AgentId) -> &Agent {
        &self.agents[id.index()]
    }

    pub fn exchanges(&self) -> impl Iterator<Item = &Exchange> {
        self.agents.iter().filter_map(|a| match a {
            Agent::Exchange(x) => Some(x),
            _ => None,
        })
    }

    pub fn sips(&self) -> impl Iterator<Item = &Sip> {
        self.agents.iter().filter_map(|a| match a {
            Agent::Sip(s) => Some(s),
            _ => None,
        })
    }

    pub fn traders(&self) -> impl Iterator<Item = &Trader> {
        self.agents.iter().filter_map(|a| match a {
            Agent::Trader(t) => Some(&**t),
            _ => None,
        })
    }

    pub fn observer(&self) -> &Observer {
        match &self.agents[self.observer.index()] {
            Agent::Observer(o) => o,
            _ => unreachable!("observer slot holds the observer"),
        }
    }

    pub fn observer_mut(&mut self) -> &mut Observer {
        match &mut self.agents[self.observer.index()] {
            Agent::Observer(o) => o,
            _ => unreachable!("observer slot holds the observer"),
        }
    }

    pub fn queue(&self) -> &InFlightQueue {
        &self.queue
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn messages_delivered(&self) -> u64 {
        self.delivered
    }

    pub fn conservation(&self) -> &ConservationReport {
        &self.conservation
    }

    pub fn initial_totals(&self) -> &Totals {
        &self.initial
    }

    /// Current totals, counting fills whose receipts are still in flight as
    /// already applied and exchange fee income as held value.
    pub fn totals(&self) -> Totals {
        let n = self.config.symbols.len();
        let mut cash: i128 = 0;
        let mut shares = vec![0i64; n];
        for a in &self.agents {
            match a {
                Agent::Trader(t) => {
                    cash += t.core.cash as i128;
                    for (s, v) in t.core.shares.iter().enumerate() {
                        shares[s] += v;
                    }
                }
                Agent::Exchange(x) => cash += x.fee_income() as i128,
                _ => {}
            }
        }
        for m in self.queue.iter() {
            let Body::Receipt(r) = &m.body else { continue };
            let ReceiptKind::Traded { price, shares: q, side, fee, .. } = &r.kind else { continue };
            if !matches!(self.agents[m.header.recipient_id.index()], Agent::Trader(_)) {
                continue;
            }
            let notional = price.notional(*q as u64) as i128;
            let s = m.header.trading_symbol.index();
            match side {
                Side::Bid => {
                    cash -= notional;
                    shares[s] += *q as i64;
                }
                Side::Offer => {
                    cash += notional;
                    shares[s] -= *q as i64;
                }
            }
            cash -= *fee as i128;
        }
        Totals { cash, shares }
    }

    fn check_conservation(&mut self) {
        let now = self.totals();
        self.conservation.checks += 1;
        if now.cash != self.initial.cash {
            self.conservation.violations.push(format!("{}: cash {} != {}", self.clock.as_micros(), now.cash, self.initial.cash));
        }
        if now.shares != self.initial.shares {
            self.conservation.violations.push(format!("{}: shares {:?} != {:?}", self.clock.as_micros(), now.shares, self.initial.shares));
        }
    }

    fn with_ctx<F>(&mut self, id: usize, f: F) -> Result<()>
    where
        F: FnOnce(&mut Agent, &mut Ctx) -> Result<()>,
    {
        let mut ctx = Ctx::new(self.clock, AgentId(id as u32), &mut self.rngs[id], &self.calendar, &mut self.outbox, &mut self.next_id);
        f(&mut self.agents[id], &mut ctx)?;
        self.flush(id)
    }

    /// Stamps and dispatches everything the agent `from` queued.
    fn flush(&mut self, from: usize) -> Result<()> {
        let mut outbox = std::mem::take(&mut self.outbox);
        for out in outbox.drain(..) {
            let sender = out.sender.unwrap_or(AgentId(from as u32));
            let mut header = MessageHeader {
                message_id: 0,
                related_id: out.related_id,
                sender_id: sender,
                recipient_id: sender,
                send_time: self.clock,
                receive_time: self.clock,
                trading_symbol: out.symbol,
                random: 0.0,
            };
            match out.target {
                Target::Agent(to) => {
                    header.message_id = match out.message_id {
                        Some(id) => id,
                        None => self.alloc_id(),
                    };
                    header.recipient_id = to;
                    self.network.dispatch(&mut self.queue, Message { header, body: out.body }, from, out.hold_us)?;
                }
                Target::Subscribers => {
                    let Some(channel) = out.body.channel() else { continue };
                    let bit = 1u64 << out.symbol.index();
                    for i in 0..self.subs[from].len() {
                        let s = self.subs[from][i];
                        if s.symbols & bit == 0 || !s.channels.contains(channel) {
                            continue;
                        }
                        header.message_id = self.alloc_id();
                        header.recipient_id = s.subscriber;
                        self.network.dispatch(&mut self.queue, Message { header: header.clone(), body: out.body.clone() }, from, out.hold_us)?;
                    }
                }
            }
        }
        self.outbox = outbox;
        Ok(())
    }

    fn alloc_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn start(&mut self) -> Result<()> {
        self.started = true;
        for id in 0..self.agents.len() {
            if matches!(self.agents[id], Agent::Trader(_)) {
                self.with_ctx(id, |a, ctx| {
                    if let Agent::Trader(t) = a {
                        t.start(ctx);
                    }
                    Ok(())
                })?;
            }
        }
        Ok(())
    }

    fn boundary(&mut self, time: SimTime, kind: Boundary) -> Result<()> {
        self.clock = time;
        match kind {
            Boundary::Open => {
                for id in 0..self.agents.len() {
                    if matches!(self.agents[id], Agent::Sip(_)) {
                        self.with_ctx(id, |a, ctx| {
                            if let Agent::Sip(s) = a {
                                s.open_day(ctx);
                            }
                            Ok(())
                        })?;
                    }
                }
            }
            Boundary::Close => {
                for id in 0..self.agents.len() {
                    if matches!(self.agents[id], Agent::Exchange(_)) {
                        self.with_ctx(id, |a, ctx| {
                            if let Agent::Exchange(x) = a {
                                x.close_day(ctx);
                            }
                            Ok(())
                        })?;
                    }
                }
                for a in &mut self.agents {
                    if let Agent::Trader(t) = a {
                        t.clear_stale(time);
                    }
                }
                self.check_conservation();
            }
        }
        self.next_boundary = self.calendar.next_boundary(time);
        Ok(())
    }

    /// Advances by one boundary or one delivered message. Returns `None`
    /// once nothing remains before the end time.
    pub fn step(&mut self) -> Result<Option<StepEvent>> {
        if self.finished {
            return Ok(None);
        }
        if !self.started {
            self.start()?;
        }
        let next_msg = self.queue.peek_time().filter(|&t| t < self.end);
        let (bt, kind) = self.next_boundary;
        if bt < self.end && next_msg.is_none_or(|t| bt <= t) {
            self.boundary(bt, kind)?;
            return Ok(Some(StepEvent::Boundary { time: bt, kind }));
        }
        if next_msg.is_none() {
            self.finished = true;
            self.clock = self.end;
            self.check_conservation();
            self.observer_mut().flush()?;
            return Ok(None);
        }
        let msg = self.queue.pop_next().expect("peeked");
        self.clock = msg.header.receive_time;
        self.delivered += 1;
        let to = msg.header.recipient_id.index();
        let event = StepEvent::Delivered {
            time: self.clock,
            sender: msg.header.sender_id,
            recipient: msg.header.recipient_id,
            symbol: msg.header.trading_symbol,
            channel: msg.body.channel(),
        };
        self.with_ctx(to, |a, ctx| {
            match a {
                Agent::Exchange(x) => x.on_message(&msg, ctx),
                Agent::Sip(s) => s.on_message(&msg, ctx),
                Agent::Trader(t) => t.on_message(&msg, ctx),
                Agent::Observer(o) => o.on_message(&msg)?,
            }
            Ok(())
        })?;
        Ok(Some(event))
    }

    /// Runs to the end and returns the summary. With an output directory,
    /// also writes the summary and the configuration there.
    pub fn run(&mut self) -> Result<RunSummary> {
        while self.step()?.is_some() {}
        let summary = self.summary();
        if let Some(dir) = &self.output.dir {
            std::fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
            std::fs::write(dir.join(CONFIG_FILE), self.config.to_toml()?)?;
        }
        Ok(summary)
    }

    pub fn summary(&self) -> RunSummary {
        let mut traders = TraderStats::default();
        for t in self.traders() {
            let s = &t.core.stats;
            traders.orders_sent += s.orders_sent;
            traders.blocked_by_budget += s.blocked_by_budget;
            traders.fills += s.fills;
            traders.rejections += s.rejections;
        }
        let name = |id: AgentId| self.infos[id.index()].name.clone();
        let mut files = self.observer().output_files();
        if self.output.dir.is_some() {
            files.push(SUMMARY_FILE.into());
            files.push(CONFIG_FILE.into());
        }
        RunSummary {
            run_id: self.output.run_id.clone().unwrap_or_else(|| format!("seed_{}", self.config.seed)),
            seed: self.config.seed,
            days: self.config.days,
            start_date: self.config.start_date,
            end_time: self.end,
            price_scale: Price::SCALE,
            symbols: self.config.symbols.clone(),
            agents: self.infos.clone(),
            messages_delivered: self.delivered,
            feed: self.observer().counts().clone(),
            exchanges: self
                .exchanges()
                .map(|x| ExchangeReport { name: name(x.id()), stats: x.stats().clone(), fee_income: x.fee_income() })
                .collect(),
            sips: self.sips().map(|s| SipReport { name: name(s.id()), stats: s.stats().clone() }).collect(),
            traders,
            conservation: self.conservation.clone(),
            files,
        }
    }
}

fn infos_len(traders_so_far: &[TraderKind], before: usize) -> u32 {
    (before + traders_so_far.len()) as u32
}
