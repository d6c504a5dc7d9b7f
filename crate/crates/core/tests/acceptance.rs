//! Acceptance suite. Runs without the libtest harness so that each
//! criterion prints exactly one PASS or FAIL line; exits non-zero when any
//! criterion fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use fragsim::analysis::run::{run_daily_stats, run_dislocations, symbol_facts, SymbolFacts};
use fragsim::analysis::stats::median;
use fragsim::analysis::{run_facts, synthetic, DislocationSegment, FactOutcome, FactParams};
use fragsim::engine::{component_rng, Agent, OutputOptions, Simulation, StepEvent};
use fragsim::exchange::{BookEvent, Fill, ModOutcome, NewOrder, OrderBook, Party, RestingOrder};
use fragsim::message::{Body, Level, Message, MessageHeader, NbboMsg, QuoteMsg, TriggerEvent, TriggerMsg};
use fragsim::network::{InFlightQueue, Network, NetworkConfig, NetworkTopology};
use fragsim::quotes::BestQuoteBook;
use fragsim::scenario::Preset;
use fragsim::traders::submodels::{next_action_time, next_wait};
use fragsim::traders::{Strategy, VolumeDist, VolumeParams, WaitParams};
use fragsim::types::{AgentId, Price, Side, SimTime, SymbolId, TimeInForce};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// Brute-force matcher: an unsorted list rescanned for the best contra order
// on every step.

#[derive(Clone)]
struct Brute {
    orders: Vec<RestingOrder>,
}

fn better_price(side: Side, a: Price, b: Price) -> bool {
    match side {
        Side::Bid => a > b,
        Side::Offer => a < b,
    }
}

fn outranks(a: &RestingOrder, b: &RestingOrder) -> bool {
    if a.price != b.price {
        return better_price(a.side, a.price, b.price);
    }
    if a.hidden != b.hidden {
        return !a.hidden;
    }
    (a.accept_time, a.tie_break, a.seq) < (b.accept_time, b.tie_break, b.seq)
}

impl Brute {
    fn best(&self, side: Side) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, o) in self.orders.iter().enumerate() {
            if o.side == side && best.is_none_or(|b| outranks(o, &self.orders[b])) {
                best = Some(i);
            }
        }
        best
    }

    fn sorted(&self, side: Side) -> Vec<RestingOrder> {
        let mut v: Vec<RestingOrder> = self.orders.iter().filter(|o| o.side == side).cloned().collect();
        // Selection by repeated rescans keeps this independent of any sort key.
        let mut out = Vec::new();
        while !v.is_empty() {
            let mut b = 0;
            for i in 1..v.len() {
                if outranks(&v[i], &v[b]) {
                    b = i;
                }
            }
            out.push(v.remove(b));
        }
        out
    }

    fn quote(&self) -> QuoteMsg {
        let level = |side: Side| {
            let visible: Vec<&RestingOrder> = self.orders.iter().filter(|o| o.side == side && !o.hidden).collect();
            let price = visible.iter().map(|o| o.price).reduce(|a, b| if better_price(side, a, b) { a } else { b })?;
            let shares = visible.iter().filter(|o| o.price == price).map(|o| o.remaining as u64).sum();
            Some(Level { price, shares })
        };
        QuoteMsg::new(level(Side::Bid), level(Side::Offer))
    }

    fn take(&mut self, i: usize, shares: u32) -> u32 {
        self.orders[i].remaining -= shares;
        let left = self.orders[i].remaining;
        if left == 0 {
            self.orders.remove(i);
        }
        left
    }

    fn submit(&mut self, o: &NewOrder, me: AgentId, nbbo: &NbboMsg, next_seq: &mut u64) -> Vec<BookEvent> {
        if !o.all_or_nothing {
            return self.submit_plain(o, me, nbbo, next_seq);
        }
        // All or nothing: try it on a copy and keep the result only when the
        // whole order filled.
        let mut trial = self.clone();
        let mut seq = *next_seq;
        let events = trial.submit_plain(o, me, nbbo, &mut seq);
        let filled: u32 = events.iter().map(|e| if let BookEvent::Fill(f) = e { f.shares } else { 0 }).sum();
        if filled == o.shares {
            *self = trial;
            *next_seq = seq;
            return events;
        }
        if let [BookEvent::Routed { .. }] = events.as_slice() {
            return events;
        }
        vec![BookEvent::Cancelled { seq: None, owner: o.owner, order_id: o.order_id, side: o.side, shares: o.shares, hidden: o.hidden }]
    }

    fn submit_plain(&mut self, o: &NewOrder, me: AgentId, nbbo: &NbboMsg, next_seq: &mut u64) -> Vec<BookEvent> {
        let contra = o.side.opposite();
        let protect = if o.iso {
            None
        } else {
            match (nbbo.price(contra), nbbo.holder(contra)) {
                (Some(p), Some(h)) if h != me => Some((p, h)),
                _ => None,
            }
        };
        let mut events = Vec::new();
        let mut remaining = o.shares;
        while remaining > 0 {
            let Some(i) = self.best(contra) else { break };
            let top = self.orders[i].clone();
            let crosses = match o.side {
                Side::Bid => o.price >= top.price,
                Side::Offer => top.price >= o.price,
            };
            if !crosses {
                break;
            }
            if let Some((p, to)) = protect {
                if better_price(contra, p, top.price) {
                    events.push(BookEvent::Routed { to, owner: o.owner, order_id: o.order_id, shares: remaining });
                    return events;
                }
            }
            let shares = remaining.min(top.remaining);
            remaining -= shares;
            let maker_left = self.take(i, shares);
            events.push(BookEvent::Fill(Fill {
                price: top.price,
                shares,
                taker_side: o.side,
                maker: Party { seq: Some(top.seq), owner: top.owner, order_id: top.order_id, remaining: maker_left },
                taker: Party { seq: None, owner: o.owner, order_id: o.order_id, remaining },
                iso: o.iso,
                maker_hidden: top.hidden,
            }));
        }
        if remaining == 0 {
            return events;
        }
        if o.all_or_nothing || o.time_in_force == TimeInForce::IMMEDIATE {
            events.push(BookEvent::Cancelled { seq: None, owner: o.owner, order_id: o.order_id, side: o.side, shares: remaining, hidden: o.hidden });
            return events;
        }
        *next_seq += 1;
        events.push(BookEvent::Rested { seq: *next_seq, owner: o.owner, order_id: o.order_id, side: o.side, price: o.price, shares: remaining, hidden: o.hidden });
        self.orders.push(RestingOrder {
            seq: *next_seq,
            owner: o.owner,
            order_id: o.order_id,
            side: o.side,
            price: o.price,
            original_shares: o.shares,
            remaining,
            hidden: o.hidden,
            midpoint: o.midpoint,
            time_in_force: o.time_in_force,
            accept_time: o.accept_time,
            tie_break: o.tie_break,
        });
        events
    }

    fn modify(&mut self, seq: u64, shares: u32) -> Option<ModOutcome> {
        let i = self.orders.iter().position(|o| o.seq == seq)?;
        let o = self.orders[i].clone();
        let removed = shares.min(o.remaining);
        let remaining = self.take(i, removed);
        Some(ModOutcome { seq, owner: o.owner, order_id: o.order_id, side: o.side, removed, remaining, hidden: o.hidden })
    }

    fn reprice(&mut self, mid: Price) -> Vec<BookEvent> {
        let mut moved = false;
        for o in self.orders.iter_mut().filter(|o| o.midpoint && o.price != mid) {
            o.price = mid;
            moved = true;
        }
        let mut events = Vec::new();
        if !moved {
            return events;
        }
        loop {
            let (Some(b), Some(a)) = (self.best(Side::Bid), self.best(Side::Offer)) else { break };
            let (bid, offer) = (self.orders[b].clone(), self.orders[a].clone());
            if bid.price < offer.price {
                break;
            }
            let bid_takes = if bid.midpoint != offer.midpoint { bid.midpoint } else { bid.seq > offer.seq };
            let (taker, maker) = if bid_takes { (bid, offer) } else { (offer, bid) };
            let shares = taker.remaining.min(maker.remaining);
            let t_left = {
                let i = self.orders.iter().position(|o| o.seq == taker.seq).unwrap();
                self.take(i, shares)
            };
            let m_left = {
                let i = self.orders.iter().position(|o| o.seq == maker.seq).unwrap();
                self.take(i, shares)
            };
            events.push(BookEvent::Fill(Fill {
                price: maker.price,
                shares,
                taker_side: taker.side,
                maker: Party { seq: Some(maker.seq), owner: maker.owner, order_id: maker.order_id, remaining: m_left },
                taker: Party { seq: Some(taker.seq), owner: taker.owner, order_id: taker.order_id, remaining: t_left },
                iso: false,
                maker_hidden: maker.hidden,
            }));
        }
        events
    }

    fn close(&mut self, now: SimTime) -> Vec<BookEvent> {
        let mut gone: Vec<RestingOrder> = self
            .orders
            .iter()
            .filter(|o| {
                let tif = o.time_in_force;
                tif == TimeInForce::DAY
                    || tif.micros() < 17 * 3_600_000_000 + 1_800_000_000
                    || o.accept_time.as_micros().saturating_add(tif.micros()) <= now.as_micros()
            })
            .cloned()
            .collect();
        gone.sort_by_key(|o| o.seq);
        self.orders.retain(|o| !gone.iter().any(|g| g.seq == o.seq));
        gone.into_iter()
            .map(|o| BookEvent::Cancelled { seq: Some(o.seq), owner: o.owner, order_id: o.order_id, side: o.side, shares: o.remaining, hidden: o.hidden })
            .collect()
    }
}

fn random_nbbo(rng: &mut ChaCha8Rng) -> NbboMsg {
    let mut side = |base: i64| -> (Option<Level>, Option<AgentId>) {
        if rng.random_bool(0.25) {
            return (None, None);
        }
        let price = Price::from_cents(base + rng.random_range(-2..=2));
        (Some(Level { price, shares: 100 }), Some(AgentId(rng.random_range(1..=3))))
    };
    let (bid, bx) = side(9_999);
    let (offer, ox) = side(10_001);
    NbboMsg { quote: QuoteMsg::new(bid, offer), bid_exchange: bx, offer_exchange: ox }
}

const TIFS: [TimeInForce; 4] = [
    TimeInForce::IMMEDIATE,
    TimeInForce::DAY,
    TimeInForce::from_micros(1_000_000),
    TimeInForce::from_micros(48 * 3_600_000_000),
];

fn grid_price(rng: &mut ChaCha8Rng) -> Price {
    // Half-cent steps so midpoint prices occur too.
    Price::from_subticks(1_000_000 + 50 * rng.random_range(-6..=6))
}

/// Runs one scenario through both matchers. Returns a description of the
/// first disagreement, if any, and records which order flavours occurred.
fn matching_scenario(seed: u64, seen: &mut BTreeSet<(bool, bool, bool, bool, u64)>, outcomes: &mut [u64; 4]) -> Option<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let me = AgentId(1);
    let mut book = OrderBook::new();
    let mut brute = Brute { orders: Vec::new() };
    let (mut seq_a, mut seq_b) = (0u64, 0u64);
    let mut now = 0u64;
    let mut nbbo = random_nbbo(&mut rng);
    let orders = rng.random_range(1..=20);
    let mut submitted = 0;
    let mut step = 0;
    while submitted < orders {
        step += 1;
        now += rng.random_range(0..3);
        let roll = rng.random_range(0..100);
        let (a, b, what) = if roll < 70 {
            submitted += 1;
            if rng.random_bool(0.3) {
                nbbo = random_nbbo(&mut rng);
            }
            let flags = (rng.random_bool(0.3), rng.random_bool(0.25), rng.random_bool(0.25), rng.random_bool(0.2));
            let tif = TIFS[rng.random_range(0..TIFS.len())];
            let order = NewOrder {
                owner: AgentId(10 + rng.random_range(0..4)),
                order_id: step,
                side: if rng.random_bool(0.5) { Side::Bid } else { Side::Offer },
                price: grid_price(&mut rng),
                shares: rng.random_range(1..=300),
                hidden: flags.0,
                all_or_nothing: flags.1,
                iso: flags.2,
                midpoint: flags.3,
                time_in_force: tif,
                accept_time: SimTime::from_micros(now),
                tie_break: rng.random::<f64>(),
            };
            seen.insert((flags.0, flags.1, flags.2, flags.3, tif.micros()));
            let a = book.submit(order.clone(), me, &nbbo, &mut seq_a);
            let b = brute.submit(&order, me, &nbbo, &mut seq_b);
            for e in &a {
                match e {
                    BookEvent::Fill(_) => outcomes[0] += 1,
                    BookEvent::Rested { .. } => outcomes[1] += 1,
                    BookEvent::Cancelled { .. } => outcomes[2] += 1,
                    BookEvent::Routed { .. } => outcomes[3] += 1,
                }
            }
            (a, b, "submit")
        } else if roll < 85 {
            let live: Vec<u64> = brute.orders.iter().map(|o| o.seq).collect();
            let seq = if live.is_empty() || rng.random_bool(0.1) { 999 } else { live[rng.random_range(0..live.len())] };
            let shares = rng.random_range(1..=300);
            let (x, y) = (book.modify(seq, shares), brute.modify(seq, shares));
            if x != y {
                return Some(format!("seed {seed} step {step}: modify {x:?} != {y:?}"));
            }
            (Vec::new(), Vec::new(), "modify")
        } else {
            let mid = grid_price(&mut rng);
            (book.reprice_midpoints(mid), brute.reprice(mid), "reprice")
        };
        if a != b {
            return Some(format!("seed {seed} step {step}: {what} events {a:?} != {b:?}"));
        }
        if seq_a != seq_b || book.quote() != brute.quote() {
            return Some(format!("seed {seed} step {step}: quote {:?} != {:?}", book.quote(), brute.quote()));
        }
        for side in [Side::Bid, Side::Offer] {
            let x: Vec<RestingOrder> = book.orders(side).cloned().collect();
            if x != brute.sorted(side) {
                return Some(format!("seed {seed} step {step}: {side:?} queue differs"));
            }
        }
    }
    let close = SimTime::from_micros(now + rng.random_range(0..2_000_000));
    let (a, b) = (book.close_day(close), brute.close(close));
    if a != b {
        return Some(format!("seed {seed}: close {a:?} != {b:?}"));
    }
    if book.len() != brute.orders.len() {
        return Some(format!("seed {seed}: {} orders survive the close, expected {}", book.len(), brute.orders.len()));
    }
    None
}

fn criterion2() -> Verdict {
    let mut seen = BTreeSet::new();
    let mut outcomes = [0u64; 4];
    let mut mismatches = Vec::new();
    for seed in 0..10_000 {
        if let Some(m) = matching_scenario(seed, &mut seen, &mut outcomes) {
            mismatches.push(m);
        }
    }
    let combos = 16 * TIFS.len();
    let covered = seen.len() == combos && outcomes.iter().all(|&n| n > 0);
    let detail = format!(
        "{} mismatches in 10000 scenarios; {}/{} flag and TIF combinations; fills {} rests {} cancels {} routes {}{}",
        mismatches.len(),
        seen.len(),
        combos,
        outcomes[0],
        outcomes[1],
        outcomes[2],
        outcomes[3],
        mismatches.first().map(|m| format!("; first: {m}")).unwrap_or_default()
    );
    verdict(mismatches.is_empty() && covered, detail)
}

// ---------------------------------------------------------------------------
// Best-quote oracle: recompute from every cached quote.

fn brute_best(book: &BestQuoteBook, symbol: SymbolId) -> NbboMsg {
    let lot = book.round_lot().max(1);
    let pick = |side: Side| {
        let mut best: Option<(Level, AgentId)> = None;
        for (x, q) in book.quotes(symbol) {
            let Some(l) = q.side(side).filter(|l| l.shares >= lot) else { continue };
            let take = match best {
                None => true,
                Some((b, bx)) => better_price(side, l.price, b.price) || (l.price == b.price && x < bx),
            };
            if take {
                best = Some((l, x));
            }
        }
        best
    };
    let (bid, offer) = (pick(Side::Bid), pick(Side::Offer));
    NbboMsg { quote: QuoteMsg::new(bid.map(|b| b.0), offer.map(|o| o.0)), bid_exchange: bid.map(|b| b.1), offer_exchange: offer.map(|o| o.1) }
}

#[derive(Default)]
struct BookChecks {
    checks: u64,
    mismatches: u64,
    first: Option<String>,
}

impl BookChecks {
    fn check(&mut self, who: &str, book: &BestQuoteBook, time: SimTime) {
        for s in 0..book.symbols() {
            let sym = SymbolId(s as u16);
            self.checks += 1;
            if *book.best(sym) != brute_best(book, sym) {
                self.mismatches += 1;
                self.first.get_or_insert_with(|| format!("{who} symbol {s} at {} us", time.as_micros()));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Desk-scale trials.

struct Trial {
    preset: Preset,
    seed: u64,
    facts: Vec<SymbolFacts>,
    dislocations: Vec<DislocationSegment>,
    trades: u64,
    quotes: u64,
    nbbo: u64,
    days: usize,
    conservation_checks: u64,
    conservation_violations: Vec<String>,
    books: BookChecks,
    secs: f64,
}

fn run_trial(preset: Preset, seed: u64, dir: &Path, check_books: bool) -> Trial {
    let config = preset.config(seed, 1);
    let run_id = format!("{}_seed{seed}", preset.name());
    let output = OutputOptions { dir: Some(dir.join(&run_id)), keep_records: true, run_id: Some(run_id) };
    let started = Instant::now();
    let mut sim = Simulation::with_output(config.clone(), output).expect("simulation builds");
    let initial = sim.initial_totals().clone();
    let mut books = BookChecks::default();
    let mut violations = Vec::new();
    let mut checks = 0u64;
    let mut steps = 0u64;
    while let Some(ev) = sim.step().expect("step") {
        steps += 1;
        if steps % 2_000 == 0 {
            checks += 1;
            let now = sim.totals();
            if now != initial {
                violations.push(format!("step {steps}: {now:?} != {initial:?}"));
            }
        }
        let StepEvent::Delivered { time, recipient, .. } = ev else { continue };
        if !check_books {
            continue;
        }
        match sim.agent(recipient) {
            Agent::Sip(s) => books.check("sip", s.quotes(), time),
            Agent::Observer(o) => books.check("observer", o.dbbo_book(), time),
            Agent::Trader(t) => {
                if let Strategy::Arb(a) = &t.strategy {
                    books.check("arbitrageur", a.dbbo(), time);
                }
            }
            Agent::Exchange(_) => {}
        }
    }
    let summary = sim.run().expect("summary");
    let secs = started.elapsed().as_secs_f64();
    let records = sim.observer_mut().take_records();
    let dislocations = run_dislocations(&records, &config).expect("dislocations");
    let daily = run_daily_stats(&records, &dislocations, &config);
    let facts = symbol_facts(&records, &config, &FactParams::default());
    violations.extend(summary.conservation.violations.iter().cloned());
    Trial {
        preset,
        seed,
        facts,
        trades: daily.iter().map(|d| d.trades).sum(),
        quotes: daily.iter().map(|d| d.quotes).sum(),
        nbbo: daily.iter().map(|d| d.nbbo).sum(),
        days: daily.len(),
        dislocations,
        conservation_checks: checks + summary.conservation.checks,
        conservation_violations: violations,
        books,
        secs,
    }
}

fn feed_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("run dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).expect("feed")))
        .collect();
    v.sort();
    v
}

fn criterion1(trials: &[Trial], dir: &Path) -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut simple_secs = f64::NAN;
    for preset in Preset::ALL {
        let first = trials.iter().find(|t| t.preset == preset).expect("trial per preset");
        let again = dir.join("again");
        let run_id = format!("{}_seed{}", preset.name(), first.seed);
        let started = Instant::now();
        let mut sim = Simulation::with_output(
            preset.config(first.seed, 1),
            OutputOptions { dir: Some(again.join(&run_id)), keep_records: false, run_id: Some(run_id.clone()) },
        )
        .expect("simulation builds");
        sim.run().expect("run");
        let secs = started.elapsed().as_secs_f64();
        if preset == Preset::ZipSimple {
            simple_secs = secs;
        }
        let a = feed_bytes(&dir.join(&run_id));
        let b = feed_bytes(&again.join(&run_id));
        let same = !a.is_empty() && a == b;
        pass &= same;
        notes.push(format!("{} {}", preset.name(), if same { "identical" } else { "DIFFERENT" }));
    }
    pass &= simple_secs < 300.0;
    verdict(pass, format!("{}; zip_simple 1 day in {simple_secs:.1} s (limit 300 s)", notes.join(", ")))
}

fn criterion3(trials: &[Trial]) -> Verdict {
    let checks: u64 = trials.iter().map(|t| t.conservation_checks).sum();
    let bad: Vec<&Trial> = trials.iter().filter(|t| !t.conservation_violations.is_empty()).collect();
    let first = bad.first().map(|t| format!("; first: {} seed {} {}", t.preset, t.seed, t.conservation_violations[0])).unwrap_or_default();
    verdict(bad.is_empty() && checks > 0, format!("{} trials, {checks} checks, {} trials with violations{first}", trials.len(), bad.len()))
}

fn criterion4(trials: &[Trial]) -> Verdict {
    let t = trials.iter().find(|t| t.preset == Preset::ZipNms && t.books.checks > 0).expect("checked zip_nms trial");
    let b = &t.books;
    let first = b.first.as_ref().map(|f| format!("; first: {f}")).unwrap_or_default();
    verdict(b.mismatches == 0 && b.checks > 0, format!("zip_nms seed {}: {} recomputations, {} mismatches{first}", t.seed, b.checks, b.mismatches))
}

fn of(trials: &[Trial], preset: Preset) -> Vec<&Trial> {
    trials.iter().filter(|t| t.preset == preset).collect()
}

fn fact_passed(s: &SymbolFacts, fact: u8) -> bool {
    s.outcomes.iter().any(|o: &FactOutcome| o.fact == fact && o.passed())
}

fn criterion5(trials: &[Trial]) -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for preset in Preset::ALL {
        let series: Vec<&SymbolFacts> = of(trials, preset).iter().flat_map(|t| t.facts.iter()).collect();
        let mean = series.iter().map(|s| s.score as f64).sum::<f64>() / series.len() as f64;
        let f5 = series.iter().filter(|s| fact_passed(s, 5)).count();
        let f6 = series.iter().filter(|s| fact_passed(s, 6)).count();
        let ok = mean >= 3.0 && f5 == series.len() && f6 == series.len();
        pass &= ok;
        notes.push(format!("{} mean {mean:.2}, fact5 {f5}/{n}, fact6 {f6}/{n}", preset.name(), n = series.len()));
    }
    verdict(pass, notes.join("; "))
}

fn per_day(trials: &[&Trial], f: impl Fn(&Trial) -> u64) -> f64 {
    let days: usize = trials.iter().map(|t| t.days).sum();
    trials.iter().map(|t| f(t)).sum::<u64>() as f64 / days.max(1) as f64
}

fn criterion6(trials: &[Trial]) -> Verdict {
    let simple = of(trials, Preset::ZipSimple);
    let nms = of(trials, Preset::ZipNms);
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, f) in [("trades", (|t: &Trial| t.trades) as fn(&Trial) -> u64), ("quotes", |t: &Trial| t.quotes), ("nbbo", |t: &Trial| t.nbbo)] {
        let (a, b) = (per_day(&simple, f), per_day(&nms, f));
        let ratio = b / a;
        pass &= ratio >= 5.0;
        notes.push(format!("{name} {b:.0}/{a:.0} = {ratio:.2}x"));
    }
    verdict(pass, format!("zip_nms over zip_simple per day: {} (need >= 5x each)", notes.join(", ")))
}

fn criterion7(trials: &[Trial]) -> Verdict {
    let count = |p: Preset| per_day(&of(trials, p), |t| t.dislocations.len() as u64);
    let med = |p: Preset| {
        let d: Vec<f64> = of(trials, p).iter().flat_map(|t| t.dislocations.iter().map(|s| s.duration_us as f64)).collect();
        if d.is_empty() {
            f64::NAN
        } else {
            median(&d)
        }
    };
    let (simple, nms, no_arb) = (count(Preset::ZipSimple), count(Preset::ZipNms), count(Preset::ZipNoArbNms));
    let (m_nms, m_no_arb) = (med(Preset::ZipNms), med(Preset::ZipNoArbNms));
    let mean = |p: Preset| {
        let d: Vec<u64> = of(trials, p).iter().flat_map(|t| t.dislocations.iter().map(|s| s.duration_us)).collect();
        d.iter().sum::<u64>() as f64 / d.len().max(1) as f64
    };
    let frag = nms >= 2.0 * simple && no_arb >= 2.0 * simple;
    let arb_count = nms > no_arb;
    let arb_duration = m_nms < m_no_arb;
    verdict(
        frag && arb_count && arb_duration,
        format!(
            "per day: simple {simple:.0}, nms {nms:.0}, no_arb {no_arb:.0} (>=2x: {frag}); arb raises count: {arb_count}; median duration nms {m_nms} us vs no_arb {m_no_arb} us (decrease: {arb_duration}); mean duration nms {:.0} us vs no_arb {:.0} us",
            mean(Preset::ZipNms),
            mean(Preset::ZipNoArbNms)
        ),
    )
}

// ---------------------------------------------------------------------------

fn passes(outcomes: &[FactOutcome], fact: u8) -> bool {
    outcomes.iter().any(|o| o.fact == fact && o.passed())
}

fn criterion8() -> Verdict {
    const N: usize = 10_000;
    const SEEDS: u64 = 100;
    let params = FactParams::default();
    let facts = [2u8, 5, 6, 7];
    let garch = |seed| run_facts(&facts, &synthetic::garch_t3(N, 0.1, 0.85, seed), None, &params);
    let gauss = |seed| run_facts(&[2, 6], &synthetic::gaussian(N, seed), None, &params);

    let canonical_garch = garch(11);
    let canonical_gauss = gauss(11);
    let repeatable = canonical_garch == garch(11) && canonical_gauss == gauss(11);
    let canonical = facts.iter().all(|&f| passes(&canonical_garch, f)) && !passes(&canonical_gauss, 2) && !passes(&canonical_gauss, 6);

    let mut g_rate = [0usize; 4];
    let mut n_rate = [0usize; 2];
    for seed in 0..SEEDS {
        let g = garch(1000 + seed);
        for (i, f) in facts.iter().enumerate() {
            g_rate[i] += passes(&g, *f) as usize;
        }
        let n = gauss(1000 + seed);
        n_rate[0] += passes(&n, 2) as usize;
        n_rate[1] += passes(&n, 6) as usize;
    }
    let rates_ok = g_rate.iter().all(|&k| k as u64 * 100 >= 95 * SEEDS) && n_rate.iter().all(|&k| k as u64 * 100 <= 5 * SEEDS);
    verdict(
        repeatable && canonical && rates_ok,
        format!(
            "seed 11: GARCH passes 2/5/6/7 {canonical}, repeatable {repeatable}; over {SEEDS} seeds GARCH passes f2 {} f5 {} f6 {} f7 {}, Gaussian passes f2 {} f6 {} (need >= 95 and <= 5)",
            g_rate[0], g_rate[1], g_rate[2], g_rate[3], n_rate[0], n_rate[1]
        ),
    )
}

fn criterion9() -> Verdict {
    let topo = NetworkTopology::nj_default(100);
    let config = NetworkConfig::default();
    let target = config.jitter_mean_us;
    let mut net = Network::new(&topo, config, component_rng(9, "network")).expect("network");
    for node in 0..topo.nodes.len() {
        net.register(node).expect("node");
    }
    net.track_stats(true);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut queue = InFlightQueue::new();
    const N: u64 = 100_000;
    for id in 0..N {
        let (from, to) = (rng.random_range(0..4u32), rng.random_range(0..4u32));
        let header = MessageHeader {
            message_id: id,
            related_id: None,
            sender_id: AgentId(from),
            recipient_id: AgentId(to),
            send_time: SimTime::from_micros(id),
            receive_time: SimTime::from_micros(id),
            trading_symbol: SymbolId(0),
            random: 0.0,
        };
        let msg = Message { header, body: Body::Trigger(TriggerMsg { trigger_event: TriggerEvent::Trade }) };
        net.dispatch(&mut queue, msg, from as usize, 0).expect("dispatch");
    }
    let (count, extra) = net.stats().values().fold((0u64, 0u64), |(c, e), (n, x)| (c + n, e + x));
    let mean = extra as f64 / count as f64;
    let err = (mean - target).abs() / target;
    verdict(count == N && err <= 0.02, format!("{count} dispatches, mean extra delay {mean:.4} us vs {target} us ({:.2}% off, limit 2%)", 100.0 * err))
}

fn criterion10() -> Verdict {
    const N: usize = 1_000_000;
    let params = VolumeParams::default();
    let dist = VolumeDist::new(params);
    let mut rng = component_rng(10, "submodels");
    let mut draws: Vec<f64> = (0..N).map(|_| dist.sample(&mut rng) as f64).collect();
    let mean = draws.iter().sum::<f64>() / N as f64;
    draws.sort_by(f64::total_cmp);
    let med = draws[N / 2];
    let (want_med, want_mean) = (params.mu.exp(), (params.mu + params.sigma * params.sigma / 2.0).exp());
    let med_err = (med - want_med).abs() / want_med;
    let mean_err = (mean - want_mean).abs() / want_mean;

    let wait = WaitParams::default();
    let mut out_of_bounds = 0;
    let mut wsum = 0.0;
    for _ in 0..N {
        let w = next_wait(&mut rng, wait);
        out_of_bounds += (w < wait.min_us || w > wait.max_us) as usize;
        wsum += w as f64;
    }
    let wmean = wsum / N as f64;
    let calendar = Preset::ZipSimple.config(1, 1).calendar();
    let open = calendar.session_open(0);
    let mut action_out = 0;
    for i in 0..N as u64 / 10 {
        let now = open.plus_micros(i * 234_000 % 23_400_000_000);
        let t = next_action_time(&mut rng, wait, &calendar, now);
        let gap = t.saturating_since(now);
        // Either a plain wait, or a wait after the open of a later session.
        let since_open = t.saturating_since(calendar.session_open(t.day()));
        let plain = (wait.min_us..=wait.max_us).contains(&gap);
        let deferred = t.day() > now.day() && (wait.min_us..=wait.max_us).contains(&since_open);
        action_out += (!calendar.is_trading_time(t) || !(plain || deferred)) as usize;
    }
    let pass = med_err <= 0.05 && mean_err <= 0.05 && out_of_bounds == 0 && action_out == 0;
    verdict(
        pass,
        format!(
            "volume median {med} vs {want_med:.3} ({:.2}%), mean {mean:.3} vs {want_mean:.3} ({:.2}%); waits out of [{}, {}] us: {out_of_bounds}, mean {wmean:.0} us; action times outside a session or bounds: {action_out}",
            100.0 * med_err,
            100.0 * mean_err,
            wait.min_us,
            wait.max_us
        ),
    )
}

fn main() {
    // `cargo test` passes libtest flags; listing asks for no work.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let report = |n: u32, name: &str, v: &Verdict| {
        println!("criterion {n:>2} {name}: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };

    let v = criterion2();
    report(2, "matching engine oracle", &v);
    results.push((2, "matching engine oracle", v));

    let tmp = tempfile::tempdir().expect("temp dir");
    let mut trials = Vec::new();
    for preset in Preset::ALL {
        for k in 0..5u64 {
            let check_books = preset == Preset::ZipNms && k == 0;
            let t = run_trial(preset, 100 + k, tmp.path(), check_books);
            eprintln!("  {} seed {}: {:.1} s, {} trades", t.preset, t.seed, t.secs, t.trades);
            trials.push(t);
        }
    }

    let named: [(u32, &str, Box<dyn Fn() -> Verdict>); 8] = [
        (1, "determinism and runtime", Box::new(|| criterion1(&trials, tmp.path()))),
        (3, "conservation", Box::new(|| criterion3(&trials))),
        (4, "NBBO/DBBO oracle", Box::new(|| criterion4(&trials))),
        (5, "stylized-fact score", Box::new(|| criterion5(&trials))),
        (6, "fragmentation effect", Box::new(|| criterion6(&trials))),
        (7, "dislocation effects", Box::new(|| criterion7(&trials))),
        (8, "analysis controls", Box::new(criterion8)),
        (9, "network delay", Box::new(criterion9)),
    ];
    for (n, name, f) in named.iter() {
        let v = f();
        report(*n, name, &v);
        results.push((*n, name, v));
    }
    let v = criterion10();
    report(10, "submodel distributions", &v);
    results.push((10, "submodel distributions", v));

    results.sort_by_key(|r| r.0);
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
