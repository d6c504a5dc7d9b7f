//! Analyses applied to one simulation run, in memory or on disk.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::daily::{daily_stats, trading_days, DailyStats};
use super::dislocations::{feed_dislocations, DislocationSegment};
use super::facts::{run_facts, six_fact_score, FactOutcome, FactParams, FACTS};
use super::series::{sample_last_trade, DEFAULT_INTERVAL_US};
use crate::config::SimulationConfig;
use crate::engine::{RunSummary, CONFIG_FILE, SUMMARY_FILE};
use crate::error::{Error, Result};
use crate::observer::{read_feed_file, FeedRecord};
use crate::types::SymbolId;

/// Feed files the analyses need.
pub const ANALYSIS_FILES: [&str; 3] = ["trades.jsonl", "quotes.jsonl", "nbbo.jsonl"];

pub struct LoadedRun {
    pub dir: PathBuf,
    pub config: SimulationConfig,
    pub summary: RunSummary,
    /// Records from the loaded files, ordered by observer time.
    pub records: Vec<FeedRecord>,
}

impl LoadedRun {
    pub fn load(dir: &Path) -> Result<Self> {
        Self::load_files(dir, &ANALYSIS_FILES)
    }

    pub fn load_files(dir: &Path, files: &[&str]) -> Result<Self> {
        if !dir.join(SUMMARY_FILE).is_file() {
            return Err(Error::InvalidInput(format!("{} is not a run directory (no {SUMMARY_FILE})", dir.display())));
        }
        let summary = RunSummary::load(dir)?;
        let config = SimulationConfig::load(&dir.join(CONFIG_FILE))?;
        let mut records = Vec::new();
        for f in files {
            let path = dir.join(f);
            if !path.is_file() {
                return Err(Error::InvalidInput(format!("missing feed file {}", path.display())));
            }
            records.extend(read_feed_file(&path, &config.symbols)?);
        }
        records.sort_by_key(|r| r.observer_time);
        Ok(LoadedRun { dir: dir.to_path_buf(), config, summary, records })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolFacts {
    pub symbol: String,
    pub returns: usize,
    pub score: u32,
    pub outcomes: Vec<FactOutcome>,
}

/// Fact tests on the one-second last-trade returns of every symbol.
pub fn symbol_facts(records: &[FeedRecord], config: &SimulationConfig, params: &FactParams) -> Vec<SymbolFacts> {
    let calendar = config.calendar();
    config
        .symbols
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let (returns, outcomes) = match sample_last_trade(records, SymbolId(i as u16), &calendar, DEFAULT_INTERVAL_US) {
                Ok(s) => (s.len(), run_facts(&FACTS, &s.returns, s.volumes.as_deref(), params)),
                Err(e) => (0, FACTS.iter().map(|&fact| FactOutcome { fact, result: Err(e.to_string()) }).collect()),
            };
            SymbolFacts { symbol: name.clone(), returns, score: six_fact_score(&outcomes), outcomes }
        })
        .collect()
}

pub fn run_dislocations(records: &[FeedRecord], config: &SimulationConfig) -> Result<Vec<DislocationSegment>> {
    feed_dislocations(records, config.symbols.len(), &config.calendar())
}

pub fn run_daily_stats(records: &[FeedRecord], dislocations: &[DislocationSegment], config: &SimulationConfig) -> Vec<DailyStats> {
    let calendar = config.calendar();
    daily_stats(records, dislocations, &calendar, &trading_days(&calendar, config.days))
}
