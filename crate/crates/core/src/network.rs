//! The communication network: data-center topology, propagation delays, and
//! the global queue of in-flight messages.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::message::{header_order, Message};
use crate::types::SimTime;

/// Undirected edge `(node, node, delay_us)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge(pub String, pub String, pub u64);

/// Weighted undirected graph of data centers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
}

impl NetworkTopology {
    /// Mahwah, Carteret and Secaucus in a triangle, Weehawken hanging off
    /// Secaucus, every edge `edge_delay_us`.
    pub fn nj_default(edge_delay_us: u64) -> Self {
        let e = |a: &str, b: &str| Edge(a.into(), b.into(), edge_delay_us);
        NetworkTopology {
            nodes: ["Mahwah", "Carteret", "Secaucus", "Weehawken"].map(String::from).to_vec(),
            edges: vec![
                e("Mahwah", "Carteret"),
                e("Mahwah", "Secaucus"),
                e("Carteret", "Secaucus"),
                e("Secaucus", "Weehawken"),
            ],
        }
    }

    pub fn node_index(&self, name: &str) -> Result<usize> {
        self.nodes.iter().position(|n| n == name).ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::config("topology has no nodes"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if self.nodes[..i].contains(n) {
                return Err(Error::config(format!("duplicate node `{n}`")));
            }
        }
        for Edge(a, b, w) in &self.edges {
            self.node_index(a)?;
            self.node_index(b)?;
            if a == b {
                return Err(Error::config(format!("self-loop at `{a}`")));
            }
            if *w == 0 {
                return Err(Error::config(format!("edge {a}-{b} must have a positive delay")));
            }
        }
        let table = self.delay_table();
        if table[0].iter().any(|d| d.is_none()) {
            return Err(Error::config("topology is not connected"));
        }
        Ok(())
    }

    fn adjacency(&self) -> Vec<Vec<(usize, u64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for Edge(a, b, w) in &self.edges {
            // Validated elsewhere; unknown names are skipped here.
            if let (Ok(i), Ok(j)) = (self.node_index(a), self.node_index(b)) {
                adj[i].push((j, *w));
                adj[j].push((i, *w));
            }
        }
        adj
    }

    /// Single-source Dijkstra. `None` marks unreachable nodes.
    fn shortest_from(&self, adj: &[Vec<(usize, u64)>], src: usize) -> Vec<Option<u64>> {
        let mut dist: Vec<Option<u64>> = vec![None; adj.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = Some(0);
        heap.push(Reverse((0u64, src)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist[u].is_some_and(|best| d > best) {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = d + w;
                if dist[v].map_or(true, |cur| nd < cur) {
                    dist[v] = Some(nd);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist
    }

    /// All-pairs shortest-path delays.
    pub fn delay_table(&self) -> Vec<Vec<Option<u64>>> {
        let adj = self.adjacency();
        (0..self.nodes.len()).map(|s| self.shortest_from(&adj, s)).collect()
    }

    /// Total weight of the minimum-weight path between two nodes.
    pub fn path_delay(&self, src: &str, dst: &str) -> Result<u64> {
        let s = self.node_index(src)?;
        let d = self.node_index(dst)?;
        let adj = self.adjacency();
        self.shortest_from(&adj, s)[d]
            .ok_or_else(|| Error::config(format!("no path from `{src}` to `{dst}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(default = "default_min_delay")]
    pub min_delay_us: u64,
    #[serde(default = "default_jitter")]
    pub jitter_mean_us: f64,
}

fn default_min_delay() -> u64 {
    5
}

fn default_jitter() -> f64 {
    5.0
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig { min_delay_us: default_min_delay(), jitter_mean_us: default_jitter() }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter_mean_us >= 0.0 && self.jitter_mean_us.is_finite()) {
            return Err(Error::config("jitter_mean_us must be a non-negative number"));
        }
        Ok(())
    }
}

/// Deterministic part of a transit plus a jitter draw, floored at the minimum delay.
pub fn transit_delay(path_delay_us: u64, min_delay_us: u64, jitter_us: u64) -> u64 {
    path_delay_us.max(min_delay_us) + jitter_us
}

struct Queued(Message);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        header_order(&self.0.header, &other.0.header)
    }
}

/// Messages sent but not yet received, popped in delivery order.
#[derive(Default)]
pub struct InFlightQueue {
    heap: BinaryHeap<Reverse<Queued>>,
    last_popped: SimTime,
}

impl InFlightQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, msg: Message) {
        debug_assert!(msg.header.receive_time >= msg.header.send_time);
        self.heap.push(Reverse(Queued(msg)));
    }

    /// Removes the globally minimal message.
    pub fn pop_next(&mut self) -> Option<Message> {
        let Reverse(Queued(msg)) = self.heap.pop()?;
        debug_assert!(msg.header.receive_time >= self.last_popped, "queue delivered out of order");
        self.last_popped = msg.header.receive_time;
        Some(msg)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(Queued(m))| m.header.receive_time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Iterates the queued messages in no particular order.
    pub fn iter(&self) -> impl Iterator<Item = &Message> {
        self.heap.iter().map(|Reverse(Queued(m))| m)
    }
}

/// Routes messages between registered agents: assigns receive times and
/// tie-break draws, then enqueues.
pub struct Network {
    delays: Vec<Vec<u64>>,
    locations: Vec<usize>,
    config: NetworkConfig,
    jitter: Option<Exp<f64>>,
    rng: ChaCha8Rng,
    stats: BTreeMap<(usize, usize), (u64, u64)>,
    track_stats: bool,
}

impl Network {
    pub fn new(topology: &NetworkTopology, config: NetworkConfig, rng: ChaCha8Rng) -> Result<Self> {
        topology.validate()?;
        config.validate()?;
        let delays = topology
            .delay_table()
            .into_iter()
            .map(|row| row.into_iter().map(|d| d.expect("validated connected")).collect())
            .collect();
        let jitter = (config.jitter_mean_us > 0.0)
            .then(|| Exp::new(1.0 / config.jitter_mean_us).expect("positive rate"));
        Ok(Network { delays, locations: Vec::new(), config, jitter, rng, stats: BTreeMap::new(), track_stats: false })
    }

    /// Registers the next agent at `node`; agents must register in id order.
    pub fn register(&mut self, node: usize) -> Result<()> {
        if node >= self.delays.len() {
            return Err(Error::config(format!("node index {node} out of range")));
        }
        self.locations.push(node);
        Ok(())
    }

    pub fn location(&self, agent: usize) -> Option<usize> {
        self.locations.get(agent).copied()
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Records per node-pair delay sums; used by diagnostics and tests.
    pub fn track_stats(&mut self, on: bool) {
        self.track_stats = on;
    }

    /// `(count, total extra delay over the deterministic floor)` per node pair.
    pub fn stats(&self) -> &BTreeMap<(usize, usize), (u64, u64)> {
        &self.stats
    }

    /// Rounded to the nearest microsecond; flooring would pull the mean
    /// down by about half a microsecond.
    fn draw_jitter(&mut self) -> u64 {
        match &self.jitter {
            Some(exp) => exp.sample(&mut self.rng).round() as u64,
            None => 0,
        }
    }

    /// Fills in `receive_time` and `random`, then enqueues.
    ///
    /// `from_agent` is where the message physically leaves from, which can
    /// differ from `header.sender_id` for routed orders. `hold_us` delays
    /// departure (self-scheduled triggers).
    pub fn dispatch(&mut self, queue: &mut InFlightQueue, mut msg: Message, from_agent: usize, hold_us: u64) -> Result<()> {
        let to_agent = msg.header.recipient_id.index();
        let (Some(&src), Some(&dst)) = (self.locations.get(from_agent), self.locations.get(to_agent)) else {
            return Err(Error::UnknownAgent(format!("{from_agent}->{to_agent}")));
        };
        let path = self.delays[src][dst];
        let jitter = self.draw_jitter();
        let delay = transit_delay(path, self.config.min_delay_us, jitter);
        if self.track_stats {
            let e = self.stats.entry((src, dst)).or_default();
            e.0 += 1;
            e.1 += delay - path.max(self.config.min_delay_us);
        }
        msg.header.receive_time = msg.header.send_time.plus_micros(hold_us + delay);
        msg.header.random = self.rng.random::<f64>();
        queue.push(msg);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::tests::header;
    use crate::message::{Body, TriggerEvent, TriggerMsg};
    use crate::types::AgentId;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn triangle() -> NetworkTopology {
        NetworkTopology {
            nodes: vec!["A".into(), "B".into(), "C".into()],
            edges: vec![Edge("A".into(), "B".into(), 10), Edge("B".into(), "C".into(), 10), Edge("A".into(), "C".into(), 30)],
        }
    }

    #[test]
    fn path_delay_examples() {
        let t = triangle();
        assert_eq!(t.path_delay("A", "A").unwrap(), 0);
        assert_eq!(t.path_delay("A", "C").unwrap(), 20);
        let nj = NetworkTopology::nj_default(100);
        // Mahwah -> Secaucus -> Weehawken.
        assert_eq!(nj.path_delay("Mahwah", "Weehawken").unwrap(), 200);
        assert!(matches!(t.path_delay("A", "Z"), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn validation_rejects_bad_graphs() {
        let mut t = triangle();
        t.edges.push(Edge("A".into(), "A".into(), 3));
        assert!(t.validate().is_err());
        let t = NetworkTopology { nodes: vec!["A".into(), "B".into()], edges: vec![] };
        assert!(t.validate().is_err());
        let t = NetworkTopology { nodes: vec!["A".into(), "B".into()], edges: vec![Edge("A".into(), "B".into(), 0)] };
        assert!(t.validate().is_err());
    }

    #[test]
    fn transit_examples() {
        assert_eq!(transit_delay(0, 5, 0), 5);
        assert_eq!(transit_delay(100, 5, 3), 103);
    }

    fn trigger(id: u64, from: u32, to: u32, send: u64) -> Message {
        let mut h = header(id, 0, 0.0);
        h.sender_id = AgentId(from);
        h.recipient_id = AgentId(to);
        h.send_time = SimTime::from_micros(send);
        Message { header: h, body: Body::Trigger(TriggerMsg { trigger_event: TriggerEvent::Trade }) }
    }

    #[test]
    fn dispatch_same_node_without_jitter_uses_floor() {
        let cfg = NetworkConfig { min_delay_us: 5, jitter_mean_us: 0.0 };
        let mut net = Network::new(&triangle(), cfg, ChaCha8Rng::seed_from_u64(1)).unwrap();
        net.register(0).unwrap();
        net.register(0).unwrap();
        let mut q = InFlightQueue::new();
        net.dispatch(&mut q, trigger(1, 0, 1, 1000), 0, 0).unwrap();
        assert_eq!(q.pop_next().unwrap().header.receive_time, SimTime::from_micros(1005));
        assert!(net.dispatch(&mut q, trigger(2, 0, 7, 0), 0, 0).is_err());
    }

    #[test]
    fn jitter_mean_matches_config() {
        let mut net = Network::new(&triangle(), NetworkConfig::default(), ChaCha8Rng::seed_from_u64(3)).unwrap();
        net.register(0).unwrap();
        net.register(2).unwrap();
        net.track_stats(true);
        let mut q = InFlightQueue::new();
        for id in 0..20_000 {
            net.dispatch(&mut q, trigger(id, 0, 1, 0), 0, 0).unwrap();
        }
        let (n, extra) = net.stats()[&(0, 2)];
        let mean = extra as f64 / n as f64;
        assert!((mean - 5.0).abs() < 0.25, "{mean}");
    }

    #[test]
    fn pop_examples() {
        let mut q = InFlightQueue::new();
        assert!(q.pop_next().is_none());
        let mut a = trigger(1, 0, 1, 0);
        a.header.receive_time = SimTime::from_micros(10);
        let mut b = trigger(2, 0, 1, 0);
        b.header.receive_time = SimTime::from_micros(5);
        q.push(a);
        q.push(b);
        assert_eq!(q.pop_next().unwrap().header.message_id, 2);
        assert_eq!(q.pop_next().unwrap().header.message_id, 1);
        assert!(q.pop_next().is_none());
    }

    /// Oracle: minimum over every simple path, enumerated by DFS.
    fn brute_force(t: &NetworkTopology, src: usize, dst: usize) -> Option<u64> {
        let adj = t.adjacency();
        fn dfs(adj: &[Vec<(usize, u64)>], u: usize, dst: usize, seen: &mut Vec<bool>, acc: u64, best: &mut Option<u64>) {
            if u == dst {
                *best = Some(best.map_or(acc, |b: u64| b.min(acc)));
                return;
            }
            for &(v, w) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    dfs(adj, v, dst, seen, acc + w, best);
                    seen[v] = false;
                }
            }
        }
        let mut seen = vec![false; adj.len()];
        seen[src] = true;
        let mut best = None;
        dfs(&adj, src, dst, &mut seen, 0, &mut best);
        best
    }

    proptest! {
        #[test]
        fn dijkstra_matches_path_enumeration(n in 2usize..=6, raw in proptest::collection::vec((0usize..6, 0usize..6, 1u64..50), 1..15)) {
            let nodes: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
            let edges = raw.into_iter()
                .filter(|(a, b, _)| a % n != b % n)
                .map(|(a, b, w)| Edge(nodes[a % n].clone(), nodes[b % n].clone(), w))
                .collect();
            let t = NetworkTopology { nodes, edges };
            let table = t.delay_table();
            for s in 0..n {
                for d in 0..n {
                    prop_assert_eq!(table[s][d], brute_force(&t, s, d));
                }
            }
        }

        #[test]
        fn queue_drains_sorted(seed in any::<u64>()) {
            let mut net = Network::new(&NetworkTopology::nj_default(100), NetworkConfig::default(), ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for node in [0, 1, 2, 3] { net.register(node).unwrap(); }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let mut q = InFlightQueue::new();
            let mut all = Vec::new();
            for id in 0..1000u64 {
                let m = trigger(id, rng.random_range(0..4), rng.random_range(0..4), rng.random_range(0..10_000));
                net.dispatch(&mut q, m, 0, 0).unwrap();
            }
            all.extend(q.iter().cloned());
            all.sort_by(crate::message::message_order);
            let mut popped = Vec::new();
            while let Some(m) = q.pop_next() {
                prop_assert!(m.header.receive_time.saturating_since(m.header.send_time) >= 5);
                popped.push(m);
            }
            prop_assert!(popped.windows(2).all(|w| w[0].header.receive_time <= w[1].header.receive_time));
            prop_assert_eq!(popped, all);
        }
    }
}
