//! Run configuration, read from and written to TOML.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::TradingCalendar;
use crate::error::{Error, Result};
use crate::exchange::FeeSchedule;
use crate::network::{NetworkConfig, NetworkTopology};
use crate::sip::SipParams;
use crate::traders::{HoldingsInit, VolumeParams, WaitParams, ZipParams};

pub const RANDOM_NODE: &str = "random";
/// Subscriptions use a 64-bit symbol mask.
pub const MAX_SYMBOLS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSection {
    #[serde(flatten)]
    pub topology: NetworkTopology,
    #[serde(flatten)]
    pub delays: NetworkConfig,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection { topology: NetworkTopology::nj_default(100), delays: NetworkConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangeSpec {
    pub id: String,
    pub node: String,
    #[serde(flatten)]
    pub fees: FeeSchedule,
    /// Symbols traded; empty means all.
    #[serde(default)]
    pub symbols: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SipSpec {
    pub id: String,
    pub node: String,
    pub symbols: Vec<String>,
    #[serde(flatten)]
    pub params: SipParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraderKind {
    Zi,
    Mi,
    Zip,
    Arb,
}

impl TraderKind {
    pub fn prefix(self) -> &'static str {
        match self {
            TraderKind::Zi => "ZI",
            TraderKind::Mi => "MI",
            TraderKind::Zip => "ZIP",
            TraderKind::Arb => "ARB",
        }
    }

    pub fn default_holdings(self) -> HoldingsInit {
        match self {
            TraderKind::Zi => HoldingsInit { cash_mean: 10_000.0, shares_mean: 1_000.0 },
            TraderKind::Mi => HoldingsInit { cash_mean: 10_000.0, shares_mean: 10_000.0 },
            TraderKind::Zip => HoldingsInit { cash_mean: 100_000.0, shares_mean: 10_000.0 },
            TraderKind::Arb => HoldingsInit { cash_mean: 100_000_000.0, shares_mean: 0.0 },
        }
    }
}

/// A group of identical traders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    #[serde(rename = "type")]
    pub kind: TraderKind,
    /// Node name, or `random` for a uniform draw per trader.
    #[serde(default = "random_node")]
    pub node: String,
    #[serde(default = "one")]
    pub count: u32,
    /// Name prefix; traders are named `<prefix>_<nnn>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdings: Option<HoldingsInit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zip: Option<ZipParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<VolumeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wait: Option<WaitParams>,
}

impl AgentSpec {
    pub fn new(kind: TraderKind, node: &str, count: u32) -> Self {
        AgentSpec { kind, node: node.into(), count, prefix: None, holdings: None, zip: None, volume: None, wait: None }
    }

    pub fn prefix(&self) -> &str {
        self.prefix.as_deref().unwrap_or(self.kind.prefix())
    }
}

fn random_node() -> String {
    RANDOM_NODE.into()
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverSpec {
    #[serde(default = "observer_id")]
    pub id: String,
    #[serde(default = "carteret")]
    pub node: String,
    /// Also record the SIP-forwarded trade and quote feed.
    #[serde(default)]
    pub record_taq: bool,
}

fn observer_id() -> String {
    "OBSERVER".into()
}

fn carteret() -> String {
    "Carteret".into()
}

impl Default for ObserverSpec {
    fn default() -> Self {
        ObserverSpec { id: observer_id(), node: carteret(), record_taq: false }
    }
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 4, 5).expect("valid date")
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seed: u64,
    /// Trading days to simulate.
    #[serde(default = "one")]
    pub days: u32,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    #[serde(default)]
    pub holidays: Vec<NaiveDate>,
    pub symbols: Vec<String>,
    #[serde(default)]
    pub network: NetworkSection,
    pub exchanges: Vec<ExchangeSpec>,
    pub sips: Vec<SipSpec>,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub observer: ObserverSpec,
    /// Fixes random trader placement across seeds when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement_seed: Option<u64>,
    /// Whether exchanges subscribe to each other's quotes to build a DBBO.
    #[serde(default = "yes")]
    pub exchange_direct_quotes: bool,
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimulationConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn calendar(&self) -> TradingCalendar {
        TradingCalendar { holidays: self.holidays.clone(), ..TradingCalendar::new(self.start_date) }
    }

    pub fn trader_count(&self) -> u64 {
        self.agents.iter().map(|a| a.count as u64).sum()
    }

    /// Trader names in creation order.
    pub fn trader_names(&self) -> Vec<String> {
        let mut counters: std::collections::BTreeMap<&str, u32> = Default::default();
        let mut names = Vec::new();
        for spec in &self.agents {
            let prefix = spec.prefix();
            for _ in 0..spec.count {
                let n = counters.entry(prefix).or_default();
                *n += 1;
                names.push(format!("{prefix}_{:03}", n));
            }
        }
        names
    }

    pub fn symbol_index(&self, name: &str) -> Result<usize> {
        self.symbols.iter().position(|s| s == name).ok_or_else(|| Error::config(format!("unknown symbol `{name}`")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::config("days must be at least 1"));
        }
        if self.symbols.is_empty() || self.symbols.len() > MAX_SYMBOLS {
            return Err(Error::config(format!("between 1 and {MAX_SYMBOLS} symbols required")));
        }
        if self.symbols.iter().collect::<BTreeSet<_>>().len() != self.symbols.len() {
            return Err(Error::config("duplicate symbol"));
        }
        if self.exchanges.is_empty() {
            return Err(Error::config("at least one exchange required"));
        }
        if self.sips.is_empty() {
            return Err(Error::config("at least one SIP required"));
        }
        self.network.topology.validate()?;
        self.network.delays.validate()?;
        self.calendar().validate()?;
        if (0..14).all(|d| !self.calendar().is_trading_day(d)) {
            return Err(Error::config("no trading day in the first two weeks"));
        }

        let node = |n: &str| self.network.topology.node_index(n).map(|_| ());
        let mut ids = BTreeSet::new();
        let mut unique = |id: &str| {
            if ids.insert(id.to_string()) {
                Ok(())
            } else {
                Err(Error::config(format!("duplicate agent id `{id}`")))
            }
        };
        for x in &self.exchanges {
            unique(&x.id)?;
            node(&x.node)?;
            for s in &x.symbols {
                self.symbol_index(s)?;
            }
        }
        let mut managed = vec![0u32; self.symbols.len()];
        for s in &self.sips {
            unique(&s.id)?;
            node(&s.node)?;
            if s.params.window_us == 0 {
                return Err(Error::config("SIP window must be positive"));
            }
            for sym in &s.symbols {
                managed[self.symbol_index(sym)?] += 1;
            }
        }
        if let Some(i) = managed.iter().position(|&m| m != 1) {
            return Err(Error::config(format!("symbol `{}` must be managed by exactly one SIP", self.symbols[i])));
        }
        for a in &self.agents {
            if a.node != RANDOM_NODE {
                node(&a.node)?;
            }
            if a.count == 0 {
                return Err(Error::config("agent count must be positive"));
            }
            if let Some(v) = a.volume {
                if !(v.sigma >= 0.0 && v.sigma.is_finite() && v.mu.is_finite()) {
                    return Err(Error::config("volume sigma must be a non-negative number"));
                }
            }
            if let Some(w) = a.wait {
                if w.min_us > w.max_us {
                    return Err(Error::config("wait min exceeds max"));
                }
            }
            if let Some(h) = a.holdings {
                if !(h.cash_mean >= 0.0 && h.shares_mean >= 0.0) {
                    return Err(Error::config("holding means must be non-negative"));
                }
            }
        }
        for name in self.trader_names() {
            unique(&name)?;
        }
        unique(&self.observer.id)?;
        node(&self.observer.node)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
symbols = ["AAA"]

[[exchanges]]
id = "EX"
node = "Carteret"

[[sips]]
id = "SIP"
node = "Carteret"
symbols = ["AAA"]

[[agents]]
type = "zip"
node = "random"
count = 3
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = SimulationConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.days, 1);
        assert_eq!(c.network.delays.min_delay_us, 5);
        assert_eq!(c.sips[0].params.round_lot, 100);
        assert_eq!(c.observer.node, "Carteret");
        assert_eq!(c.trader_names(), vec!["ZIP_001", "ZIP_002", "ZIP_003"]);
    }

    #[test]
    fn toml_round_trip() {
        let c = SimulationConfig::from_toml(MINIMAL).unwrap();
        let again = SimulationConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = MINIMAL.replace("node = \"Carteret\"\n\n[[sips]]", "node = \"Nowhere\"\n\n[[sips]]");
        assert!(matches!(SimulationConfig::from_toml(&bad), Err(Error::UnknownNode(_))));
        let unmanaged = MINIMAL.replace("symbols = [\"AAA\"]\n\n[[exchanges]]", "symbols = [\"AAA\", \"BBB\"]\n\n[[exchanges]]");
        assert!(SimulationConfig::from_toml(&unmanaged).is_err());
        let dup = MINIMAL.replace("id = \"SIP\"", "id = \"EX\"");
        assert!(SimulationConfig::from_toml(&dup).is_err());
        assert!(SimulationConfig::from_toml("seed = 1").is_err());
    }
}
