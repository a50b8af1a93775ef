//! Discrete-event simulation of the propagation race between an original
//! transaction and its malleated copy.
//!
//! Nodes follow the first-seen rule: they forward the first version of a
//! conflicting pair they receive and ignore the other from then on. The
//! attacker listens on its own connections, and on first receiving the
//! original waits a processing delay and injects the modified version. A
//! uniformly chosen miner node decides which version wins; whatever it saw
//! first is the version confirmed.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-edge propagation delay, drawn uniformly per edge.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct LatencyRange {
    pub min_ms: f64,
    pub max_ms: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub node_count: usize,
    /// Average peer connections per node; at least 2, below node_count.
    pub degree: f64,
    pub latency_ms: LatencyRange,
    /// How many random peers the attacker holds connections to.
    pub attacker_connections: usize,
    /// Processing delay between intercepting the original and rebroadcasting
    /// the modified version.
    pub attacker_delay_ms: f64,
    pub trials: usize,
    pub seed: u64,
    /// Symmetric mode for calibration: original and modified are injected at
    /// t = 0 by two external injectors with equal connection counts, instead
    /// of the intercept race.
    #[serde(default)]
    pub simultaneous_injection: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            node_count: 1000,
            degree: 8.0,
            latency_ms: LatencyRange {
                min_ms: 10.0,
                max_ms: 100.0,
            },
            attacker_connections: 100,
            attacker_delay_ms: 50.0,
            trials: 1000,
            seed: 7,
            simultaneous_injection: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("infeasible config: {0}")]
    InfeasibleConfig(String),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: &str| Err(SimError::InfeasibleConfig(msg.to_string()));
        if self.node_count < 3 {
            return fail("node_count must be at least 3");
        }
        if !(2.0 <= self.degree && self.degree < self.node_count as f64) {
            return fail("degree must satisfy 2 <= degree < node_count");
        }
        if self.attacker_connections > self.node_count {
            return fail("attacker_connections must not exceed node_count");
        }
        if self.trials < 1 {
            return fail("trials must be at least 1");
        }
        if !(self.latency_ms.min_ms.is_finite()
            && self.latency_ms.max_ms.is_finite()
            && 0.0 <= self.latency_ms.min_ms
            && self.latency_ms.min_ms <= self.latency_ms.max_ms)
        {
            return fail("latency range must satisfy 0 <= min <= max");
        }
        if !(self.attacker_delay_ms.is_finite() && self.attacker_delay_ms >= 0.0) {
            return fail("attacker_delay_ms must be non-negative");
        }
        Ok(())
    }
}

/// Simulation time in microseconds.
type Time = u64;

fn to_micros(ms: f64) -> Time {
    (ms * 1000.0).round() as Time
}

fn draw_latency(rng: &mut impl Rng, range: LatencyRange) -> Time {
    let lo = to_micros(range.min_ms);
    let hi = to_micros(range.max_ms);
    rng.gen_range(lo..=hi)
}

/// Connected undirected random graph with per-edge latencies.
pub struct Network {
    pub node_count: usize,
    /// adjacency[u] = (peer, latency) pairs.
    pub adjacency: Vec<Vec<(usize, Time)>>,
    pub edge_count: usize,
}

/// Erdős–Rényi-style G(n, m) graph with m = round(n·degree/2) distinct
/// edges; connectivity is enforced by bridging components with extra random
/// edges. Deterministic given the rng state.
pub fn build_network(config: &SimConfig, rng: &mut impl Rng) -> Result<Network, SimError> {
    config.validate()?;
    let n = config.node_count;
    let target_edges = ((n as f64 * config.degree) / 2.0).round() as usize;
    let max_edges = n * (n - 1) / 2;
    let target_edges = target_edges.min(max_edges);

    let mut edges: HashSet<(usize, usize)> = HashSet::with_capacity(target_edges);
    while edges.len() < target_edges {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }

    // Bridge disconnected components into the one containing node 0.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for &(u, v) in &edges {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
        }
    }
    let mut bridges = Vec::new();
    let root0 = find(&mut parent, 0);
    let mut component_member: Vec<usize> = Vec::new();
    for i in 1..n {
        if find(&mut parent, i) != find(&mut parent, 0) {
            component_member.clear();
            let ri = find(&mut parent, i);
            for j in 0..n {
                if find(&mut parent, j) == ri {
                    component_member.push(j);
                }
            }
            let from = component_member[rng.gen_range(0..component_member.len())];
            let to = rng.gen_range(0..n);
            let to = if find(&mut parent, to) == ri { 0 } else { to };
            bridges.push((from.min(to), from.max(to)));
            parent[ri] = find(&mut parent, root0);
        }
    }
    edges.extend(bridges);

    let mut sorted: Vec<(usize, usize)> = edges.into_iter().collect();
    sorted.sort_unstable();
    let mut adjacency = vec![Vec::new(); n];
    for (u, v) in &sorted {
        let latency = draw_latency(rng, config.latency_ms);
        adjacency[*u].push((*v, latency));
        adjacency[*v].push((*u, latency));
    }
    Ok(Network {
        node_count: n,
        adjacency,
        edge_count: sorted.len(),
    })
}

/// The two racing versions of the transaction.
#[derive(Clone, Copy, PartialEq, Eq, Debug, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Original,
    Modified,
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct TrialResult {
    pub winner: Winner,
    pub miner_node: usize,
    /// Fraction of nodes whose first-seen version was the original.
    pub first_seen_original_fraction: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Dest {
    Node(usize),
    Attacker,
}

/// One race over a built network. Draws the victim, miner, and attacker
/// connections from `rng`, then floods deterministically.
pub fn run_trial(network: &Network, config: &SimConfig, rng: &mut impl Rng) -> TrialResult {
    let n = network.node_count;
    let victim = rng.gen_range(0..n);
    let miner = rng.gen_range(0..n);

    // The attacker's own connections into the graph; not part of the
    // node-to-node topology.
    let attacker_peers: Vec<(usize, Time)> = sample(rng, n, config.attacker_connections)
        .into_iter()
        .map(|peer| (peer, draw_latency(rng, config.latency_ms)))
        .collect();

    let mut first_seen: Vec<Option<Winner>> = vec![None; n];
    let mut heap: BinaryHeap<Reverse<(Time, u64, Dest, Winner)>> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<_>, time, dest, version| {
        heap.push(Reverse((time, seq, dest, version)));
        seq += 1;
    };

    if config.simultaneous_injection {
        // Two symmetric external injectors with equal connection counts.
        let rival_peers: Vec<(usize, Time)> = sample(rng, n, config.attacker_connections)
            .into_iter()
            .map(|peer| (peer, draw_latency(rng, config.latency_ms)))
            .collect();
        // Unbiased tie-breaking between the two batches.
        let original_first = rng.gen_bool(0.5);
        let batches: [(&[(usize, Time)], Winner); 2] = if original_first {
            [
                (&attacker_peers, Winner::Original),
                (&rival_peers, Winner::Modified),
            ]
        } else {
            [
                (&rival_peers, Winner::Modified),
                (&attacker_peers, Winner::Original),
            ]
        };
        for (peers, version) in batches {
            for &(peer, latency) in peers {
                push(&mut heap, latency, Dest::Node(peer), version);
            }
        }
    } else {
        push(&mut heap, 0, Dest::Node(victim), Winner::Original);
    }

    let attacker_delay = to_micros(config.attacker_delay_ms);
    let mut attacker_triggered = false;
    let peer_to_attacker: Vec<Option<Time>> = {
        let mut v = vec![None; n];
        for &(peer, latency) in &attacker_peers {
            v[peer] = Some(latency);
        }
        v
    };

    while let Some(Reverse((time, _, dest, version))) = heap.pop() {
        match dest {
            Dest::Node(node) => {
                if first_seen[node].is_some() {
                    continue;
                }
                first_seen[node] = Some(version);
                for &(peer, latency) in &network.adjacency[node] {
                    push(&mut heap, time + latency, Dest::Node(peer), version);
                }
                if !config.simultaneous_injection {
                    if let Some(latency) = peer_to_attacker[node] {
                        push(&mut heap, time + latency, Dest::Attacker, version);
                    }
                }
            }
            Dest::Attacker => {
                if attacker_triggered || version != Winner::Original {
                    continue;
                }
                attacker_triggered = true;
                for &(peer, latency) in &attacker_peers {
                    push(
                        &mut heap,
                        time + attacker_delay + latency,
                        Dest::Node(peer),
                        Winner::Modified,
                    );
                }
            }
        }
    }

    let originals = first_seen
        .iter()
        .filter(|v| **v == Some(Winner::Original))
        .count();
    TrialResult {
        // A miner that saw nothing (possible only with zero injected
        // connections in symmetric mode) confirms the original.
        winner: first_seen[miner].unwrap_or(Winner::Original),
        miner_node: miner,
        first_seen_original_fraction: originals as f64 / n as f64,
    }
}

/// Monte-Carlo estimate of the attack success probability.
#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
pub struct SimEstimate {
    /// Fraction of trials the modified version won.
    pub probability: f64,
    /// Wilson 95% confidence interval.
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub trials: usize,
    pub modified_wins: usize,
    pub mean_first_seen_original_fraction: f64,
}

/// Runs `config.trials` independent trials, each over a fresh network, with
/// one rng stream per trial index — results are identical whatever the
/// scheduling order.
pub fn estimate_success(config: &SimConfig) -> Result<SimEstimate, SimError> {
    config.validate()?;
    let results: Vec<TrialResult> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(trial as u64 + 1);
            let network = build_network(config, &mut rng).expect("config validated");
            run_trial(&network, config, &mut rng)
        })
        .collect();

    let modified_wins = results
        .iter()
        .filter(|r| r.winner == Winner::Modified)
        .count();
    let mean_fraction = results
        .iter()
        .map(|r| r.first_seen_original_fraction)
        .sum::<f64>()
        / results.len() as f64;
    let (low, high) = wilson_interval(modified_wins, config.trials);

    Ok(SimEstimate {
        probability: modified_wins as f64 / config.trials as f64,
        wilson_low: low,
        wilson_high: high,
        trials: config.trials,
        modified_wins,
        mean_first_seen_original_fraction: mean_fraction,
    })
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}
