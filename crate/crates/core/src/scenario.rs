//! Built-in experimental setups.

use std::fmt;
use std::str::FromStr;

use crate::config::{AgentSpec, ExchangeSpec, NetworkSection, ObserverSpec, SimulationConfig, SipSpec, TraderKind};
use crate::error::Error;
use crate::exchange::FeeSchedule;
use crate::sip::SipParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// One exchange, one SIP and 30 ZIP traders, all at Carteret.
    ZipSimple,
    /// 16 exchanges, two SIPs, 29 randomly placed ZIP traders and an arbitrageur at Secaucus.
    ZipNms,
    /// As `ZipNms` with a 30th ZIP trader in place of the arbitrageur.
    ZipNoArbNms,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::ZipSimple, Preset::ZipNms, Preset::ZipNoArbNms];

    pub fn name(self) -> &'static str {
        match self {
            Preset::ZipSimple => "zip_simple",
            Preset::ZipNms => "zip_nms",
            Preset::ZipNoArbNms => "zip_no_arb_nms",
        }
    }

    pub fn config(self, seed: u64, days: u32) -> SimulationConfig {
        match self {
            Preset::ZipSimple => zip_simple(seed, days),
            Preset::ZipNms => zip_nms(seed, days, true),
            Preset::ZipNoArbNms => zip_nms(seed, days, false),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| Error::Config(format!("unknown preset `{s}`")))
    }
}

pub const SYMBOLS: [&str; 2] = ["SYMA", "SYMB"];

/// Exchanges per data center in the fragmented presets.
pub const NMS_EXCHANGE_NODES: [(&str, usize); 4] = [("Mahwah", 5), ("Carteret", 3), ("Secaucus", 6), ("Weehawken", 2)];

fn base(seed: u64, days: u32) -> SimulationConfig {
    SimulationConfig {
        seed,
        days,
        start_date: chrono::NaiveDate::from_ymd_opt(2021, 4, 5).expect("valid date"),
        holidays: Vec::new(),
        symbols: SYMBOLS.map(String::from).to_vec(),
        network: NetworkSection::default(),
        exchanges: Vec::new(),
        sips: Vec::new(),
        agents: Vec::new(),
        observer: ObserverSpec::default(),
        placement_seed: None,
        exchange_direct_quotes: true,
    }
}

fn exchange(id: String, node: &str) -> ExchangeSpec {
    ExchangeSpec { id, node: node.into(), fees: FeeSchedule::default(), symbols: Vec::new() }
}

pub fn zip_simple(seed: u64, days: u32) -> SimulationConfig {
    let mut c = base(seed, days);
    c.exchanges.push(exchange("EX01".into(), "Carteret"));
    c.sips.push(SipSpec { id: "SIP".into(), node: "Carteret".into(), symbols: c.symbols.clone(), params: SipParams::default() });
    c.agents.push(AgentSpec::new(TraderKind::Zip, "Carteret", 30));
    c
}

/// Symbols with even index go to the Mahwah SIP, odd to Carteret.
pub fn zip_nms(seed: u64, days: u32, with_arb: bool) -> SimulationConfig {
    let mut c = base(seed, days);
    let mut n = 0;
    for (node, count) in NMS_EXCHANGE_NODES {
        for _ in 0..count {
            n += 1;
            c.exchanges.push(exchange(format!("EX{n:02}"), node));
        }
    }
    for (parity, node) in [(0, "Mahwah"), (1, "Carteret")] {
        let symbols = c.symbols.iter().enumerate().filter(|(i, _)| i % 2 == parity).map(|(_, s)| s.clone()).collect();
        c.sips.push(SipSpec { id: format!("SIP_{}", node.to_uppercase()), node: node.into(), symbols, params: SipParams::default() });
    }
    if with_arb {
        c.agents.push(AgentSpec::new(TraderKind::Zip, "random", 29));
        c.agents.push(AgentSpec::new(TraderKind::Arb, "Secaucus", 1));
    } else {
        c.agents.push(AgentSpec::new(TraderKind::Zip, "random", 30));
    }
    c
}
