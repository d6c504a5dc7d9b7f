//! The observer: a passive agent that records feed traffic as it arrives at
//! its location, keeps a round-lot direct best bid and offer, and writes
//! one JSON-lines file per channel.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::message::{Body, Channel, Message, NbboMsg};
use crate::quotes::BestQuoteBook;
use crate::types::{AgentId, SimTime, SymbolId};

/// One feed message as seen by the observer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedRecord {
    /// When the observer received it.
    pub observer_time: SimTime,
    pub send_time: SimTime,
    pub source: AgentId,
    pub symbol: SymbolId,
    pub body: Body,
}

impl FeedRecord {
    pub fn channel(&self) -> Option<Channel> {
        self.body.channel()
    }
}

/// Output file for a channel. The SIP-forwarded feeds share one file.
pub fn channel_file(channel: Channel) -> &'static str {
    match channel {
        Channel::Add => "adds.jsonl",
        Channel::Mod => "mods.jsonl",
        Channel::Trade => "trades.jsonl",
        Channel::Quote => "quotes.jsonl",
        Channel::Nbbo => "nbbo.jsonl",
        Channel::Luld => "luld.jsonl",
        Channel::SipTrade | Channel::SipQuote => "taq.jsonl",
    }
}

pub const FEED_FILES: [&str; 7] = ["adds.jsonl", "mods.jsonl", "trades.jsonl", "quotes.jsonl", "nbbo.jsonl", "luld.jsonl", "taq.jsonl"];

#[derive(Serialize)]
struct ExportRef<'a> {
    observer_time: SimTime,
    send_time: SimTime,
    source: &'a str,
    source_id: AgentId,
    symbol: &'a str,
    #[serde(flatten)]
    body: &'a Body,
}

/// A line of an exported feed file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub observer_time: SimTime,
    pub send_time: SimTime,
    pub source: String,
    pub source_id: AgentId,
    pub symbol: String,
    #[serde(flatten)]
    pub body: Body,
}

/// Streams records to `<dir>/<channel>.jsonl`.
pub struct FeedWriter {
    dir: PathBuf,
    files: Vec<(&'static str, BufWriter<File>)>,
    agent_names: Vec<String>,
    symbol_names: Vec<String>,
}

impl FeedWriter {
    pub fn create(dir: &Path, agent_names: Vec<String>, symbol_names: Vec<String>, record_taq: bool) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for name in FEED_FILES {
            if name == "taq.jsonl" && !record_taq {
                continue;
            }
            files.push((name, BufWriter::new(File::create(dir.join(name))?)));
        }
        Ok(FeedWriter { dir: dir.to_path_buf(), files, agent_names, symbol_names })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rec: &FeedRecord) -> Result<()> {
        let Some(channel) = rec.channel() else { return Ok(()) };
        let file = channel_file(channel);
        let Some((_, w)) = self.files.iter_mut().find(|(n, _)| *n == file) else { return Ok(()) };
        let line = ExportRef {
            observer_time: rec.observer_time,
            send_time: rec.send_time,
            source: self.agent_names.get(rec.source.index()).map_or("?", String::as_str),
            source_id: rec.source,
            symbol: self.symbol_names.get(rec.symbol.index()).map_or("?", String::as_str),
            body: &rec.body,
        };
        serde_json::to_writer(&mut *w, &line)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        for (_, w) in &mut self.files {
            w.flush()?;
        }
        Ok(())
    }

    pub fn file_names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.to_string()).collect()
    }
}

/// Reads one exported feed file back. Symbols are resolved against `symbols`.
pub fn read_feed_file(path: &Path, symbols: &[String]) -> Result<Vec<FeedRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ExportRecord = serde_json::from_str(&line)?;
        let symbol = symbols
            .iter()
            .position(|s| *s == r.symbol)
            .ok_or_else(|| Error::Config(format!("{}: unknown symbol `{}`", path.display(), r.symbol)))?;
        out.push(FeedRecord {
            observer_time: r.observer_time,
            send_time: r.send_time,
            source: r.source_id,
            symbol: SymbolId(symbol as u16),
            body: r.body,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedCounts {
    pub adds: u64,
    pub mods: u64,
    pub trades: u64,
    pub quotes: u64,
    pub nbbo: u64,
    pub luld: u64,
    pub taq: u64,
}

impl FeedCounts {
    fn bump(&mut self, channel: Channel) {
        let c = match channel {
            Channel::Add => &mut self.adds,
            Channel::Mod => &mut self.mods,
            Channel::Trade => &mut self.trades,
            Channel::Quote => &mut self.quotes,
            Channel::Nbbo => &mut self.nbbo,
            Channel::Luld => &mut self.luld,
            Channel::SipTrade | Channel::SipQuote => &mut self.taq,
        };
        *c += 1;
    }
}

/// Round lot for the observer's direct view, matching the SIP default.
pub const OBSERVER_ROUND_LOT: u64 = 100;

pub struct Observer {
    id: AgentId,
    dbbo: BestQuoteBook,
    keep: bool,
    records: Vec<FeedRecord>,
    writer: Option<FeedWriter>,
    counts: FeedCounts,
}

impl Observer {
    /// `keep` holds every record in memory for later analysis.
    pub fn new(id: AgentId, symbols: usize, keep: bool, writer: Option<FeedWriter>) -> Self {
        Observer { id, dbbo: BestQuoteBook::new(symbols, OBSERVER_ROUND_LOT), keep, records: Vec::new(), writer, counts: FeedCounts::default() }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn dbbo(&self, symbol: SymbolId) -> &NbboMsg {
        self.dbbo.best(symbol)
    }

    pub fn dbbo_book(&self) -> &BestQuoteBook {
        &self.dbbo
    }

    pub fn records(&self) -> &[FeedRecord] {
        &self.records
    }

    pub fn take_records(&mut self) -> Vec<FeedRecord> {
        std::mem::take(&mut self.records)
    }

    pub fn counts(&self) -> &FeedCounts {
        &self.counts
    }

    pub fn output_files(&self) -> Vec<String> {
        self.writer.as_ref().map(FeedWriter::file_names).unwrap_or_default()
    }

    pub fn on_message(&mut self, msg: &Message) -> Result<()> {
        let Some(channel) = msg.body.channel() else { return Ok(()) };
        let symbol = msg.header.trading_symbol;
        if let Body::Quote(q) = &msg.body {
            if symbol.index() < self.dbbo.symbols() {
                self.dbbo.update(symbol, msg.header.sender_id, *q);
            }
        }
        self.counts.bump(channel);
        if self.writer.is_none() && !self.keep {
            return Ok(());
        }
        let rec = FeedRecord {
            observer_time: msg.header.receive_time,
            send_time: msg.header.send_time,
            source: msg.header.sender_id,
            symbol,
            body: msg.body.clone(),
        };
        if let Some(w) = &mut self.writer {
            w.write(&rec)?;
        }
        if self.keep {
            self.records.push(rec);
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        match &mut self.writer {
            Some(w) => w.flush(),
            None => Ok(()),
        }
    }
}
