//! Discrete traversal of a directed graph with guardable edges.

use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CoordinationEnv, GuardOption, MoveSpace, StepOutcome};
use crate::error::{BiclError, Result};
use crate::topology::ObservationScale;
use crate::types::{GuardAction, GuardVector, JointState, MoveVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCost {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEnvConfig {
    pub n: usize,
    /// `adjacency[v]` lists the nodes reachable from `v` in one move.
    pub adjacency: Vec<Vec<usize>>,
    pub edge_cost: Vec<EdgeCost>,
    /// `guard_map[v]` lists the ordered edges a robot standing on `v` may guard.
    pub guard_map: Vec<Vec<(usize, usize)>>,
    pub alpha_star: f64,
    pub time_penalty: f64,
    pub arrival_bonus: f64,
    pub horizon: usize,
    pub start_nodes: Vec<usize>,
    pub target_node: usize,
    /// Draw start nodes at random on reset instead of using `start_nodes`.
    #[serde(default)]
    pub random_start: bool,
}

impl GraphEnvConfig {
    pub fn nodes(&self) -> usize {
        self.adjacency.len()
    }

    /// Nodes from which the target can be reached.
    fn reaching_target(&self) -> Vec<bool> {
        let nodes = self.nodes();
        let mut reverse = vec![Vec::new(); nodes];
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            for &v in nbrs {
                if v < nodes {
                    reverse[v].push(u);
                }
            }
        }
        let mut seen = vec![false; nodes];
        let mut queue = VecDeque::new();
        if self.target_node < nodes {
            seen[self.target_node] = true;
            queue.push_back(self.target_node);
        }
        while let Some(v) = queue.pop_front() {
            for &u in &reverse[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BiclError::Config(m));
        let nodes = self.nodes();
        if self.n == 0 || nodes == 0 {
            return fail("graph env needs robots and nodes".into());
        }
        if self.start_nodes.len() != self.n {
            return fail(format!("{} start nodes for {} robots", self.start_nodes.len(), self.n));
        }
        if self.target_node >= nodes {
            return fail(format!("target node {} out of range", self.target_node));
        }
        if !(self.alpha_star > 0.0 && self.alpha_star <= 1.0) {
            return fail(format!("alpha_star {} must lie in (0, 1]", self.alpha_star));
        }
        if !(self.time_penalty >= 0.0 && self.arrival_bonus >= 0.0) {
            return fail("time_penalty and arrival_bonus must be nonnegative".into());
        }
        if self.horizon == 0 {
            return fail("horizon must be positive".into());
        }
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            if let Some(&v) = nbrs.iter().find(|&&v| v >= nodes) {
                return fail(format!("edge ({u}, {v}) leaves the graph"));
            }
        }
        let has_edge = |u: usize, v: usize| u < nodes && self.adjacency[u].contains(&v);
        for e in &self.edge_cost {
            if !has_edge(e.from, e.to) {
                return fail(format!("cost given for missing edge ({}, {})", e.from, e.to));
            }
            if !(e.cost >= 0.0 && e.cost.is_finite()) {
                return fail(format!("edge ({}, {}) cost {} must be >= 0", e.from, e.to, e.cost));
            }
        }
        let costs: HashMap<(usize, usize), f64> =
            self.edge_cost.iter().map(|e| ((e.from, e.to), e.cost)).collect();
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            for &v in nbrs {
                if u != v && !costs.contains_key(&(u, v)) {
                    return fail(format!("edge ({u}, {v}) has no cost"));
                }
            }
        }
        if self.guard_map.len() != nodes {
            return fail(format!("guard_map has {} entries for {nodes} nodes", self.guard_map.len()));
        }
        for (w, edges) in self.guard_map.iter().enumerate() {
            for &(u, v) in edges {
                if !has_edge(u, v) || u == v {
                    return fail(format!("node {w} guards missing edge ({u}, {v})"));
                }
            }
        }
        let reach = self.reaching_target();
        for (i, &s) in self.start_nodes.iter().enumerate() {
            if s >= nodes || !reach[s] {
                return fail(format!("robot {i} start node {s} cannot reach the target"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GraphEnv {
    config: GraphEnvConfig,
    costs: HashMap<(usize, usize), f64>,
    reachable: Vec<usize>,
}

impl GraphEnv {
    pub fn new(config: GraphEnvConfig) -> Result<Self> {
        config.validate()?;
        let costs = config.edge_cost.iter().map(|e| ((e.from, e.to), e.cost)).collect();
        let reachable = config
            .reaching_target()
            .iter()
            .enumerate()
            .filter(|&(v, &ok)| ok && v != config.target_node)
            .map(|(v, _)| v)
            .collect();
        Ok(Self {
            config,
            costs,
            reachable,
        })
    }

    pub fn config(&self) -> &GraphEnvConfig {
        &self.config
    }

    /// Cost of traversing `from -> to`; staying put is free.
    pub fn edge_cost(&self, from: usize, to: usize) -> f64 {
        if from == to {
            0.0
        } else {
            self.costs.get(&(from, to)).copied().unwrap_or(0.0)
        }
    }

    /// The current node plus its out-neighbors; arrived robots may only stay on the target.
    pub fn legal_moves_of(&self, state: &JointState, i: usize) -> Vec<usize> {
        if state.arrived[i] {
            return vec![self.config.target_node];
        }
        let s = state.node(i);
        let mut moves = vec![s];
        moves.extend(self.config.adjacency[s].iter().copied().filter(|&v| v != s));
        moves.sort_unstable();
        moves.dedup();
        moves
    }

    /// `none` plus the edges guardable from `node`.
    pub fn legal_guards(&self, node: usize) -> Vec<GuardAction> {
        std::iter::once(GuardAction::None)
            .chain(self.config.guard_map[node].iter().map(|&(u, v)| GuardAction::Edge(u, v)))
            .collect()
    }

    fn check(&self, state: &JointState, moves: &MoveVector, guards: &GuardVector) -> Result<()> {
        let n = self.config.n;
        if state.robots() != n || moves.len() != n || guards.len() != n {
            return Err(BiclError::Contract(format!("expected {n} robots in state, moves and guards")));
        }
        for i in 0..n {
            let x = moves.moves[i];
            if x.fract() != 0.0 || x < 0.0 || !self.legal_moves_of(state, i).contains(&(x as usize)) {
                return Err(BiclError::Contract(format!(
                    "robot {i} cannot move from node {} to {x}",
                    state.positions[i]
                )));
            }
            let g = guards.guards[i];
            if g != GuardAction::None && !self.legal_guards(x as usize).contains(&g) {
                return Err(BiclError::Contract(format!(
                    "robot {i} on node {x} cannot guard {g:?}"
                )));
            }
        }
        Ok(())
    }

    fn unchecked_reward(&self, state: &JointState, moves: &MoveVector, guards: &GuardVector) -> f64 {
        let n = self.config.n;
        let mut cost = 0.0;
        for i in 0..n {
            let (from, to) = (state.node(i), moves.node(i));
            let c = self.edge_cost(from, to);
            if c == 0.0 {
                continue;
            }
            let guarded = guards
                .guards
                .iter()
                .filter(|&&g| g == GuardAction::Edge(from, to))
                .count();
            cost += self.config.alpha_star.powi(guarded as i32) * c;
        }
        let mut r = -cost - self.config.time_penalty;
        let arriving = (0..n).all(|i| state.arrived[i] || moves.node(i) == self.config.target_node);
        if arriving && !state.all_arrived() {
            r += self.config.arrival_bonus;
        }
        r
    }
}

pub fn graph_reset(env: &GraphEnv, seed: u64) -> JointState {
    let c = &env.config;
    if !c.random_start || env.reachable.is_empty() {
        return JointState::new(c.start_nodes.iter().map(|&v| v as f64).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..c.n)
        .map(|_| env.reachable[rng.random_range(0..env.reachable.len())] as f64)
        .collect();
    JointState::new(positions)
}

pub fn graph_step(
    env: &GraphEnv,
    state: &JointState,
    moves: &MoveVector,
    guards: &GuardVector,
) -> Result<StepOutcome> {
    env.check(state, moves, guards)?;
    let reward = env.unchecked_reward(state, moves, guards);
    let mut next = state.clone();
    for i in 0..env.config.n {
        next.positions[i] = moves.moves[i];
        if moves.node(i) == env.config.target_node {
            next.arrived[i] = true;
        }
    }
    next.step_index += 1;
    let done = next.all_arrived() || next.step_index >= env.config.horizon;
    Ok(StepOutcome {
        state: next,
        reward,
        done,
    })
}

impl CoordinationEnv for GraphEnv {
    fn robots(&self) -> usize {
        self.config.n
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn observation_scale(&self) -> ObservationScale {
        ObservationScale {
            position: self.config.nodes() as f64,
            horizon: self.config.horizon,
        }
    }

    fn move_space(&self) -> MoveSpace {
        MoveSpace::Discrete {
            nodes: self.config.nodes(),
        }
    }

    fn reset(&self, seed: u64) -> JointState {
        graph_reset(self, seed)
    }

    fn legal_moves(&self, state: &JointState, i: usize) -> Vec<usize> {
        self.legal_moves_of(state, i)
    }

    fn guard_slots(&self) -> usize {
        1 + self.config.guard_map.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn guard_options(&self, _state: &JointState, moves: &MoveVector, i: usize) -> Vec<GuardOption> {
        self.legal_guards(moves.node(i))
            .into_iter()
            .enumerate()
            .map(|(slot, guard)| GuardOption { slot, guard })
            .collect()
    }

    fn reward(&self, state: &JointState, moves: &MoveVector, guards: &GuardVector) -> Result<f64> {
        self.check(state, moves, guards)?;
        Ok(self.unchecked_reward(state, moves, guards))
    }

    fn step(
        &self,
        state: &JointState,
        moves: &MoveVector,
        guards: &GuardVector,
    ) -> Result<StepOutcome> {
        graph_step(self, state, moves, guards)
    }

    fn move_feature(&self, mv: f64) -> f64 {
        mv / self.config.nodes() as f64
    }
}
