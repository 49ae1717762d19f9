//! Random graph instances with two connectivity levels.

use std::collections::VecDeque;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{EdgeCost, GraphEnvConfig};
use crate::error::{BiclError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    Sparse,
    Dense,
}

impl Density {
    /// Probability that a node receives one extra edge beyond the spanning tree.
    pub fn extra_edge_prob(self) -> f64 {
        match self {
            Density::Sparse => 0.2,
            Density::Dense => 0.5,
        }
    }

    /// Fraction of edges that some node can guard.
    pub fn guardable_fraction(self) -> f64 {
        match self {
            Density::Sparse => 0.3,
            Density::Dense => 0.6,
        }
    }
}

impl std::str::FromStr for Density {
    type Err = BiclError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(Density::Sparse),
            "dense" => Ok(Density::Dense),
            other => Err(BiclError::Config(format!("unknown density {other:?}"))),
        }
    }
}

fn hop_distances(adjacency: &[Vec<usize>], from: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    dist[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap_or(0);
        for &v in &adjacency[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Random connected instance: a random spanning tree plus extra edges, both
/// directions of every edge traversable with a shared cost in `[1, 5]`. All
/// robots start on node 0; the target is the node farthest from it in hops.
pub fn generate_graph(nodes: usize, robots: usize, density: Density, seed: u64) -> Result<GraphEnvConfig> {
    if nodes < 2 || robots == 0 {
        return Err(BiclError::Config(format!(
            "need at least 2 nodes and 1 robot, got {nodes} nodes / {robots} robots"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adjacency = vec![Vec::new(); nodes];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let connect = |adjacency: &mut Vec<Vec<usize>>, edges: &mut Vec<(usize, usize)>, u: usize, v: usize| {
        adjacency[u].push(v);
        adjacency[v].push(u);
        edges.push((u.min(v), u.max(v)));
    };

    let mut order: Vec<usize> = (1..nodes).collect();
    order.shuffle(&mut rng);
    let mut placed = vec![0usize];
    for v in order {
        let parent = placed[rng.random_range(0..placed.len())];
        connect(&mut adjacency, &mut edges, parent, v);
        placed.push(v);
    }
    for u in 0..nodes {
        if rng.random_bool(density.extra_edge_prob()) {
            let candidates: Vec<usize> = (0..nodes)
                .filter(|&v| v != u && !adjacency[u].contains(&v))
                .collect();
            if let Some(&v) = candidates.choose(&mut rng) {
                connect(&mut adjacency, &mut edges, u, v);
            }
        }
    }
    for nbrs in adjacency.iter_mut() {
        nbrs.sort_unstable();
    }

    let mut edge_cost = Vec::with_capacity(2 * edges.len());
    for &(u, v) in &edges {
        let cost = (rng.random_range(1.0..5.0_f64) * 100.0).round() / 100.0;
        edge_cost.push(EdgeCost { from: u, to: v, cost });
        edge_cost.push(EdgeCost { from: v, to: u, cost });
    }
    edge_cost.sort_by_key(|e| (e.from, e.to));

    let mut guard_map = vec![Vec::new(); nodes];
    for e in &edge_cost {
        if !rng.random_bool(density.guardable_fraction()) {
            continue;
        }
        let mut watchers: Vec<usize> = (0..nodes)
            .filter(|&w| w != e.from && w != e.to)
            .filter(|&w| adjacency[w].contains(&e.from) || adjacency[w].contains(&e.to))
            .collect();
        if watchers.is_empty() {
            watchers = (0..nodes).filter(|&w| w != e.from && w != e.to).collect();
        }
        if let Some(&w) = watchers.choose(&mut rng) {
            guard_map[w].push((e.from, e.to));
        }
    }
    for g in guard_map.iter_mut() {
        g.sort_unstable();
    }

    let dist = hop_distances(&adjacency, 0);
    let target_node = (0..nodes)
        .max_by_key(|&v| (dist[v].unwrap_or(0), std::cmp::Reverse(v)))
        .unwrap_or(nodes - 1);

    let config = GraphEnvConfig {
        n: robots,
        adjacency,
        edge_cost,
        guard_map,
        alpha_star: 0.5,
        time_penalty: 0.1,
        arrival_bonus: 100.0,
        horizon: 50,
        start_nodes: vec![0; robots],
        target_node,
        random_start: false,
    };
    config.validate()?;
    Ok(config)
}
