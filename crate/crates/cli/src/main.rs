//! `fragsim`: run simulated trials and analyse their output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use fragsim::analysis::calibrate::{calibrate_file, write_pass_table, CalibrationRow};
use fragsim::analysis::dislocations::summarize;
use fragsim::analysis::facts::{FactParams, FACTS};
use fragsim::analysis::run::{run_daily_stats, run_dislocations, symbol_facts, LoadedRun, SymbolFacts};
use fragsim::analysis::smile::activity_smile_test;
use fragsim::config::SimulationConfig;
use fragsim::engine::{OutputOptions, RunSummary, Simulation, SUMMARY_FILE};
use fragsim::message::Body;
use fragsim::scenario::Preset;

const INDEX_FILE: &str = "index.json";

#[derive(Parser)]
#[command(name = "fragsim", version, about = "Fragmented equity market simulator")]
struct Cli {
    /// Base seed; trial i uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulation config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in scenario: zip_simple, zip_nms or zip_no_arb_nms.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    trials: Option<u32>,
    /// Trading days per trial.
    #[arg(long, global = true)]
    days: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more trials and write their feeds.
    Run,
    /// Stylized-fact table for run directories or OHLCV CSV files.
    Facts {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// TOML file overriding fact-test parameters.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Dislocation segments and their summary for a run directory.
    Dislocations { run_dir: PathBuf },
    /// Daily trading statistics for a run directory.
    Stats { run_dir: PathBuf },
    /// Fact pass table for OHLCV CSV files.
    Calibrate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

/// An error and the exit code it maps to.
enum Failure {
    Usage(anyhow::Error),
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let config = matches!(
            e.downcast_ref::<fragsim::Error>(),
            Some(fragsim::Error::Config(_) | fragsim::Error::UnknownNode(_) | fragsim::Error::Toml(_) | fragsim::Error::TomlSer(_))
        );
        if config {
            Failure::Config(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let line = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("fragsim: {}", line.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let reason = format!("{:#}", f.error()).replace('\n', " ");
            eprintln!("fragsim: {reason}");
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome<()> {
    match &cli.command {
        Command::Run => cmd_run(cli),
        Command::Facts { paths, params } => cmd_facts(cli, paths, params.as_deref()),
        Command::Dislocations { run_dir } => Ok(cmd_dislocations(cli, run_dir)?),
        Command::Stats { run_dir } => Ok(cmd_stats(cli, run_dir)?),
        Command::Calibrate { files, params } => {
            let params = load_params(params.as_deref())?;
            Ok(cmd_calibrate(cli, files, &params)?)
        }
    }
}

/// The base configuration and a label for run directories.
fn base_config(cli: &Cli) -> Outcome<(SimulationConfig, String)> {
    let seed = cli.seed.unwrap_or(1);
    let days = cli.days.unwrap_or(1);
    let (mut config, label) = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => return Err(Failure::Usage(anyhow!("give either --config or --preset, not both"))),
        (None, None) => return Err(Failure::Usage(anyhow!("one of --config or --preset is required"))),
        (None, Some(name)) => {
            let preset: Preset = name.parse().map_err(|e: fragsim::Error| Failure::Config(e.into()))?;
            (preset.config(seed, days), preset.name().to_string())
        }
        (Some(path), None) => {
            let c = SimulationConfig::load(path).map_err(|e| Failure::Config(anyhow!(e).context(format!("config {}", path.display()))))?;
            let label = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            (c, label)
        }
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(d) = cli.days {
        config.days = d;
    }
    config.validate().map_err(|e| Failure::Config(e.into()))?;
    Ok((config, label))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    run_id: String,
    dir: String,
    label: String,
    seed: u64,
    days: u32,
    trades: u64,
    quotes: u64,
    nbbo: u64,
    conservation_violations: usize,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    runs: Vec<IndexEntry>,
}

fn cmd_run(cli: &Cli) -> Outcome<()> {
    let (config, label) = base_config(cli)?;
    let trials = cli.trials.unwrap_or(1);
    if trials == 0 {
        return Err(Failure::Usage(anyhow!("--trials must be at least 1")));
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;

    let results: Vec<anyhow::Result<IndexEntry>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut cfg = config.clone();
            cfg.seed = config.seed.wrapping_add(i as u64);
            let run_id = format!("{label}_seed{}", cfg.seed);
            let dir = out.join(&run_id);
            let output = OutputOptions { dir: Some(dir.clone()), keep_records: false, run_id: Some(run_id.clone()) };
            let summary = Simulation::with_output(cfg.clone(), output)
                .and_then(|mut sim| sim.run())
                .with_context(|| format!("trial {run_id}"))?;
            Ok(IndexEntry {
                run_id: run_id.clone(),
                dir: run_id,
                label: label.clone(),
                seed: cfg.seed,
                days: cfg.days,
                trades: summary.feed.trades,
                quotes: summary.feed.quotes,
                nbbo: summary.feed.nbbo,
                conservation_violations: summary.conservation.violations.len(),
            })
        })
        .collect();
    let entries = results.into_iter().collect::<anyhow::Result<Vec<_>>>()?;

    let index_path = out.join(INDEX_FILE);
    let mut index: Index = match std::fs::read_to_string(&index_path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => Index::default(),
    };
    for e in &entries {
        index.runs.retain(|r| r.run_id != e.run_id);
        index.runs.push(e.clone());
    }
    index.runs.sort_by(|a, b| (&a.label, a.seed).cmp(&(&b.label, b.seed)));
    std::fs::write(&index_path, serde_json::to_string_pretty(&index).map_err(anyhow::Error::from)?).with_context(|| format!("writing {}", index_path.display()))?;

    for e in &entries {
        println!("{}\t{}\ttrades={}\tquotes={}\tnbbo={}", e.run_id, out.join(&e.dir).display(), e.trades, e.quotes, e.nbbo);
    }
    if let Some(bad) = entries.iter().find(|e| e.conservation_violations > 0) {
        return Err(Failure::Runtime(anyhow!("{}: {} conservation violations", bad.run_id, bad.conservation_violations)));
    }
    Ok(())
}

fn load_params(path: Option<&Path>) -> Outcome<FactParams> {
    match path {
        None => Ok(FactParams::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(Failure::Config)?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display())).map_err(Failure::Config)
        }
    }
}

/// Run directories under `path`: the path itself, the runs in its index,
/// or any immediate subdirectory holding a run.
fn run_dirs(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if path.join(SUMMARY_FILE).is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        bail!("{} is neither a run directory nor a CSV file", path.display());
    }
    let index = path.join(INDEX_FILE);
    if index.is_file() {
        let idx: Index = serde_json::from_str(&std::fs::read_to_string(&index)?).with_context(|| format!("reading {}", index.display()))?;
        let dirs: Vec<PathBuf> = idx.runs.iter().map(|r| path.join(&r.dir)).collect();
        if !dirs.is_empty() {
            return Ok(dirs);
        }
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SUMMARY_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no runs found in {}", path.display());
    }
    Ok(dirs)
}

fn is_csv(path: &Path) -> bool {
    path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

struct RunFacts {
    summary: RunSummary,
    facts: Vec<SymbolFacts>,
}

fn cmd_facts(cli: &Cli, paths: &[PathBuf], params: Option<&Path>) -> Outcome<()> {
    let params = load_params(params)?;
    let mut csvs = Vec::new();
    let mut dirs = Vec::new();
    for p in paths {
        if is_csv(p) {
            csvs.push(p.clone());
        } else {
            dirs.extend(run_dirs(p)?);
        }
    }
    let runs: Vec<RunFacts> = dirs
        .par_iter()
        .map(|d| {
            let run = LoadedRun::load_files(d, &["trades.jsonl"]).with_context(|| format!("loading {}", d.display()))?;
            Ok(RunFacts { facts: symbol_facts(&run.records, &run.config, &params), summary: run.summary })
        })
        .collect::<anyhow::Result<_>>()?;
    let rows: Vec<CalibrationRow> = csvs.iter().map(|p| calibrate_file(p, &params)).collect();

    let mut table = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut table);
        let mut header = vec!["source".to_string(), "seed".into(), "symbol".into(), "returns".into()];
        header.extend(FACTS.iter().map(|f| format!("fact{f}")));
        header.push("score".into());
        w.write_record(&header).map_err(anyhow::Error::from)?;
        for r in &runs {
            for f in &r.facts {
                let mut rec = vec![r.summary.run_id.clone(), r.summary.seed.to_string(), f.symbol.clone(), f.returns.to_string()];
                rec.extend(f.outcomes.iter().map(|o| u8::from(o.passed()).to_string()));
                rec.push(f.score.to_string());
                w.write_record(&rec).map_err(anyhow::Error::from)?;
            }
        }
        for r in &rows {
            let mut rec = vec![r.file.display().to_string(), String::new(), String::new(), r.returns.to_string()];
            rec.extend(r.outcomes.iter().map(|o| u8::from(o.passed()).to_string()));
            rec.push(r.score().to_string());
            w.write_record(&rec).map_err(anyhow::Error::from)?;
        }
        w.flush().map_err(anyhow::Error::from)?;
    }
    std::io::stdout().write_all(&table).map_err(anyhow::Error::from)?;

    let scores: Vec<f64> = runs.iter().flat_map(|r| r.facts.iter().map(|f| f.score as f64)).chain(rows.iter().map(|r| r.score() as f64)).collect();
    if !scores.is_empty() {
        eprintln!("{} series, mean six-fact score {:.2}", scores.len(), scores.iter().sum::<f64>() / scores.len() as f64);
    }
    if let Some(out) = &cli.out {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        std::fs::write(out.join("facts.csv"), &table).map_err(anyhow::Error::from)?;
        let detail: BTreeMap<String, &Vec<SymbolFacts>> = runs.iter().map(|r| (r.summary.run_id.clone(), &r.facts)).collect();
        let json = serde_json::json!({ "runs": detail, "files": rows });
        std::fs::write(out.join("facts.json"), serde_json::to_string_pretty(&json).map_err(anyhow::Error::from)?).map_err(anyhow::Error::from)?;
    }
    Ok(())
}

fn cmd_dislocations(cli: &Cli, run_dir: &Path) -> anyhow::Result<()> {
    let run = LoadedRun::load_files(run_dir, &["quotes.jsonl", "nbbo.jsonl"])?;
    let segments = run_dislocations(&run.records, &run.config)?;
    let summary = summarize(&segments, run.config.days as usize);
    let out = cli.out.clone().unwrap_or_else(|| run_dir.to_path_buf());
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let path = out.join("dislocations.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["symbol", "side", "start_us", "end_us", "duration_us", "magnitude"])?;
    for s in &segments {
        w.write_record([
            run.config.symbols[s.symbol.index()].clone(),
            format!("{:?}", s.side).to_lowercase(),
            s.start.as_micros().to_string(),
            s.end.as_micros().to_string(),
            s.duration_us.to_string(),
            format!("{:.4}", s.magnitude.as_dollars()),
        ])?;
    }
    w.flush()?;
    std::fs::write(out.join("dislocation_summary.json"), serde_json::to_string_pretty(&summary)?)?;

    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(["count", "days", "per_day", "mean_duration_us", "median_duration_us", "mean_magnitude", "median_magnitude", "max_magnitude"])?;
    w.write_record([
        summary.count.to_string(),
        summary.days.to_string(),
        format!("{:.2}", summary.per_day),
        format!("{:.2}", summary.mean_duration_us),
        format!("{:.2}", summary.median_duration_us),
        format!("{:.4}", summary.mean_magnitude),
        format!("{:.4}", summary.median_magnitude),
        format!("{:.4}", summary.max_magnitude),
    ])?;
    w.flush()?;
    eprintln!("segments written to {}", path.display());
    Ok(())
}

fn cmd_stats(cli: &Cli, run_dir: &Path) -> anyhow::Result<()> {
    let run = LoadedRun::load(run_dir)?;
    let segments = run_dislocations(&run.records, &run.config)?;
    let daily = run_daily_stats(&run.records, &segments, &run.config);
    let calendar = run.config.calendar();
    let trade_times: Vec<_> = run.records.iter().filter(|r| matches!(r.body, Body::Trade(_))).map(|r| r.observer_time).collect();

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["day", "date", "trades", "mean_shares_per_trade", "quotes", "nbbo", "dislocations", "smile_p", "smile_pass"])?;
        for d in &daily {
            let smile = activity_smile_test(&trade_times, &calendar, d.day, 0.05);
            let (p, pass) = match &smile {
                Ok(s) => (format!("{:.4}", s.p_value), s.pass.to_string()),
                Err(_) => (String::new(), "insufficient".into()),
            };
            w.write_record([
                d.day.to_string(),
                d.date.to_string(),
                d.trades.to_string(),
                format!("{:.2}", d.mean_shares_per_trade),
                d.quotes.to_string(),
                d.nbbo.to_string(),
                d.dislocations.to_string(),
                p,
                pass,
            ])?;
        }
        w.flush()?;
    }
    std::io::stdout().write_all(&buf)?;
    if let Some(out) = &cli.out {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        std::fs::write(out.join("daily_stats.csv"), &buf)?;
    }
    Ok(())
}

fn cmd_calibrate(cli: &Cli, files: &[PathBuf], params: &FactParams) -> anyhow::Result<()> {
    let rows: Vec<CalibrationRow> = files.par_iter().map(|f| calibrate_file(f, params)).collect();
    let mut buf = Vec::new();
    write_pass_table(&rows, &mut buf)?;
    std::io::stdout().write_all(&buf)?;
    for r in &rows {
        match &r.error {
            Some(e) => eprintln!("{}: {e}", r.file.display()),
            None => eprintln!("{}: {} returns, score {}", r.file.display(), r.returns, r.score()),
        }
    }
    if let Some(out) = &cli.out {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        std::fs::write(out.join("calibration.csv"), &buf)?;
        std::fs::write(out.join("calibration.json"), serde_json::to_string_pretty(&rows)?)?;
    }
    Ok(())
}
