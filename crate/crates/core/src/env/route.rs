//! Continuous route traversal with adversary impact areas.
//!
//! Robots move along `[0, L]` toward a common target. Adversary `j` covers the
//! interval `|s - p_j| <= r_j` and charges every robot inside it a cost that
//! decays linearly with distance from the center. A robot standing inside an
//! impact area may guard that adversary, which discounts the adversary's cost
//! for the whole team by a factor that is stronger the slower the guard moves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CoordinationEnv, GuardOption, MoveSpace, StepOutcome};
use crate::error::{BiclError, Result};
use crate::topology::ObservationScale;
use crate::types::{GuardAction, GuardVector, JointState, MoveVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adversary {
    pub center: f64,
    pub radius: f64,
    pub intensity: f64,
}

impl Adversary {
    pub fn covers(&self, pos: f64) -> bool {
        (pos - self.center).abs() <= self.radius
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteEnvConfig {
    pub n: usize,
    pub route_length: f64,
    pub v_max: f64,
    pub adversaries: Vec<Adversary>,
    pub guard_beta: f64,
    pub time_penalty: f64,
    pub arrival_bonus: f64,
    pub horizon: usize,
    pub start_positions: Vec<f64>,
    pub target_position: f64,
    /// Half-width of the uniform jitter applied to start positions on reset.
    #[serde(default)]
    pub start_jitter: f64,
}

impl RouteEnvConfig {
    /// Default constants with `n` robots starting at 0 and the target at the end of the route.
    pub fn with_adversaries(n: usize, adversaries: Vec<Adversary>) -> Self {
        Self {
            n,
            route_length: 50.0,
            v_max: 3.0,
            adversaries,
            guard_beta: 0.6,
            time_penalty: 0.1,
            arrival_bonus: 100.0,
            horizon: 50,
            start_positions: vec![0.0; n],
            target_position: 50.0,
            start_jitter: 0.0,
        }
    }

    pub fn arrival_tolerance(&self) -> f64 {
        1e-6 * self.route_length
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BiclError::Config(m));
        if self.n == 0 {
            return fail("route env needs at least one robot".into());
        }
        if self.start_positions.len() != self.n {
            return fail(format!(
                "{} start positions for {} robots",
                self.start_positions.len(),
                self.n
            ));
        }
        if !(self.route_length > 0.0 && self.route_length.is_finite()) {
            return fail(format!("route_length {} must be positive", self.route_length));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return fail(format!("v_max {} must be positive", self.v_max));
        }
        if !(self.guard_beta > 0.0 && self.guard_beta <= 1.0) {
            return fail(format!("guard_beta {} must lie in (0, 1]", self.guard_beta));
        }
        if !(self.time_penalty >= 0.0 && self.arrival_bonus >= 0.0 && self.start_jitter >= 0.0) {
            return fail("time_penalty, arrival_bonus and start_jitter must be nonnegative".into());
        }
        if self.horizon == 0 {
            return fail("horizon must be positive".into());
        }
        if !(self.target_position > 0.0 && self.target_position <= self.route_length) {
            return fail(format!(
                "target {} outside (0, {}]",
                self.target_position, self.route_length
            ));
        }
        for &s in &self.start_positions {
            if !(s >= 0.0 && s < self.target_position) {
                return fail(format!(
                    "start {s} must satisfy 0 <= start < target {}",
                    self.target_position
                ));
            }
        }
        for (j, a) in self.adversaries.iter().enumerate() {
            if !(a.radius > 0.0 && a.intensity > 0.0 && a.center.is_finite()) {
                return fail(format!("adversary {j} needs positive radius and intensity"));
            }
        }
        Ok(())
    }
}

/// Team-wide cost multiplier contributed by robot `k` for adversary `j`.
pub fn guard_discount(
    velocity: f64,
    guard: GuardAction,
    j: usize,
    position: f64,
    config: &RouteEnvConfig,
) -> f64 {
    match (guard, config.adversaries.get(j)) {
        (GuardAction::Adversary(g), Some(adv)) if g == j && adv.covers(position) => {
            (1.0 - config.guard_beta * (config.v_max - velocity) / config.v_max).max(0.0)
        }
        _ => 1.0,
    }
}

/// Undiscounted cost adversary `adversary` charges a robot at `position`.
pub fn base_cost(position: f64, adversary: &Adversary) -> f64 {
    adversary.intensity * (1.0 - (position - adversary.center).abs() / adversary.radius).max(0.0)
}

pub fn route_reset(config: &RouteEnvConfig, seed: u64) -> JointState {
    if config.start_jitter == 0.0 {
        return JointState::new(config.start_positions.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let upper = config.target_position - 2.0 * config.arrival_tolerance();
    let positions = config
        .start_positions
        .iter()
        .map(|&s| {
            let d = rng.random_range(-config.start_jitter..=config.start_jitter);
            (s + d).clamp(0.0, upper)
        })
        .collect();
    JointState::new(positions)
}

fn check_moves(state: &JointState, moves: &MoveVector, config: &RouteEnvConfig) -> Result<()> {
    if state.robots() != config.n || moves.len() != config.n {
        return Err(BiclError::Contract(format!(
            "expected {} robots, got state {} / moves {}",
            config.n,
            state.robots(),
            moves.len()
        )));
    }
    let limit = config.v_max * (1.0 + 1e-12);
    for (i, &x) in moves.moves.iter().enumerate() {
        if !x.is_finite() || x.abs() > limit {
            return Err(BiclError::Contract(format!(
                "robot {i} velocity {x} exceeds v_max {}",
                config.v_max
            )));
        }
    }
    Ok(())
}

fn check_guards(guards: &GuardVector, config: &RouteEnvConfig) -> Result<()> {
    if guards.len() != config.n {
        return Err(BiclError::Contract(format!(
            "{} guards for {} robots",
            guards.len(),
            config.n
        )));
    }
    for (k, g) in guards.guards.iter().enumerate() {
        match *g {
            GuardAction::None => {}
            GuardAction::Adversary(j) if j < config.adversaries.len() => {}
            other => {
                return Err(BiclError::Contract(format!(
                    "robot {k} guard {other:?} is not a route adversary"
                )))
            }
        }
    }
    Ok(())
}

fn next_positions(state: &JointState, moves: &MoveVector, config: &RouteEnvConfig) -> JointState {
    let tol = config.arrival_tolerance();
    let mut next = state.clone();
    for i in 0..config.n {
        if state.arrived[i] {
            next.positions[i] = config.target_position;
            continue;
        }
        let p = (state.positions[i] + moves.moves[i]).clamp(0.0, config.route_length);
        if p >= config.target_position - tol {
            next.positions[i] = config.target_position;
            next.arrived[i] = true;
        } else {
            next.positions[i] = p;
        }
    }
    next.step_index = state.step_index + 1;
    next
}

/// Team cost of one step, evaluated at the pre-move positions.
fn team_cost(state: &JointState, moves: &MoveVector, guards: &GuardVector, config: &RouteEnvConfig) -> f64 {
    let mut total = 0.0;
    for (j, adv) in config.adversaries.iter().enumerate() {
        let mut factor = 1.0;
        for k in 0..config.n {
            if !state.arrived[k] {
                factor *= guard_discount(moves.moves[k], guards.guards[k], j, state.positions[k], config);
            }
        }
        for i in 0..config.n {
            if !state.arrived[i] {
                total += factor * base_cost(state.positions[i], adv);
            }
        }
    }
    total
}

fn reward_for(
    state: &JointState,
    next: &JointState,
    moves: &MoveVector,
    guards: &GuardVector,
    config: &RouteEnvConfig,
) -> f64 {
    let mut r = -team_cost(state, moves, guards, config) - config.time_penalty;
    if next.all_arrived() && !state.all_arrived() {
        r += config.arrival_bonus;
    }
    r
}

pub fn route_step(
    state: &JointState,
    moves: &MoveVector,
    guards: &GuardVector,
    config: &RouteEnvConfig,
) -> Result<StepOutcome> {
    check_moves(state, moves, config)?;
    check_guards(guards, config)?;
    let next = next_positions(state, moves, config);
    let reward = reward_for(state, &next, moves, guards, config);
    let done = next.all_arrived() || next.step_index >= config.horizon;
    Ok(StepOutcome {
        state: next,
        reward,
        done,
    })
}

#[derive(Clone, Debug)]
pub struct RouteEnv {
    config: RouteEnvConfig,
}

impl RouteEnv {
    pub fn new(config: RouteEnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &RouteEnvConfig {
        &self.config
    }
}

impl CoordinationEnv for RouteEnv {
    fn robots(&self) -> usize {
        self.config.n
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn observation_scale(&self) -> ObservationScale {
        ObservationScale {
            position: self.config.route_length,
            horizon: self.config.horizon,
        }
    }

    fn move_space(&self) -> MoveSpace {
        MoveSpace::Continuous {
            v_max: self.config.v_max,
        }
    }

    fn reset(&self, seed: u64) -> JointState {
        route_reset(&self.config, seed)
    }

    fn legal_moves(&self, _state: &JointState, _i: usize) -> Vec<usize> {
        Vec::new()
    }

    fn guard_slots(&self) -> usize {
        self.config.adversaries.len() + 1
    }

    fn guard_options(&self, state: &JointState, _moves: &MoveVector, i: usize) -> Vec<GuardOption> {
        let mut opts = vec![GuardOption {
            slot: 0,
            guard: GuardAction::None,
        }];
        if !state.arrived[i] {
            let pos = state.positions[i];
            opts.extend(
                self.config
                    .adversaries
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.covers(pos))
                    .map(|(j, _)| GuardOption {
                        slot: j + 1,
                        guard: GuardAction::Adversary(j),
                    }),
            );
        }
        opts
    }

    fn reward(&self, state: &JointState, moves: &MoveVector, guards: &GuardVector) -> Result<f64> {
        check_moves(state, moves, &self.config)?;
        check_guards(guards, &self.config)?;
        let next = next_positions(state, moves, &self.config);
        Ok(reward_for(state, &next, moves, guards, &self.config))
    }

    fn step(
        &self,
        state: &JointState,
        moves: &MoveVector,
        guards: &GuardVector,
    ) -> Result<StepOutcome> {
        route_step(state, moves, guards, &self.config)
    }

    fn move_feature(&self, mv: f64) -> f64 {
        mv / self.config.v_max
    }
}
