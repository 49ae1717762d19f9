//! Benchmark environments with decomposed move/guard actions.
//!
//! Both environments share one contract: the next state depends only on the
//! move vector, while the team reward depends on moves and guards.

pub mod generate;
pub mod graph;
pub mod route;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::topology::ObservationScale;
use crate::types::{GuardAction, GuardVector, JointState, MoveVector};

pub use graph::{GraphEnv, GraphEnvConfig};
pub use route::{Adversary, RouteEnv, RouteEnvConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MoveSpace {
    /// Velocities in `[-v_max, v_max]`.
    Continuous { v_max: f64 },
    /// Node indices `0..nodes`, restricted per state by [`CoordinationEnv::legal_moves`].
    Discrete { nodes: usize },
}

/// A legal guard choice together with its index in a fixed-width policy head.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GuardOption {
    pub slot: usize,
    pub guard: GuardAction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: JointState,
    pub reward: f64,
    pub done: bool,
}

pub trait CoordinationEnv {
    fn robots(&self) -> usize;

    fn horizon(&self) -> usize;

    fn observation_scale(&self) -> ObservationScale;

    fn move_space(&self) -> MoveSpace;

    fn reset(&self, seed: u64) -> JointState;

    /// Legal discrete moves of robot `i`; empty for continuous move spaces.
    fn legal_moves(&self, state: &JointState, i: usize) -> Vec<usize>;

    /// Width of a per-robot guard policy head (the `none` option is slot 0).
    fn guard_slots(&self) -> usize;

    /// Legal guard options of robot `i` after `moves`, ordered by slot.
    fn guard_options(&self, state: &JointState, moves: &MoveVector, i: usize) -> Vec<GuardOption>;

    /// One-step team reward `U(s, x, y)`, including the arrival bonus.
    fn reward(&self, state: &JointState, moves: &MoveVector, guards: &GuardVector) -> Result<f64>;

    fn step(&self, state: &JointState, moves: &MoveVector, guards: &GuardVector)
        -> Result<StepOutcome>;

    /// Normalized scalar encoding of one robot's move, fed to guard policies.
    fn move_feature(&self, mv: f64) -> f64;
}

/// Serializable description of either environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvSpec {
    Route(RouteEnvConfig),
    Graph(GraphEnvConfig),
}

#[derive(Clone, Debug)]
pub enum EnvInstance {
    Route(RouteEnv),
    Graph(GraphEnv),
}

impl EnvInstance {
    pub fn from_spec(spec: &EnvSpec) -> Result<Self> {
        Ok(match spec {
            EnvSpec::Route(c) => EnvInstance::Route(RouteEnv::new(c.clone())?),
            EnvSpec::Graph(c) => EnvInstance::Graph(GraphEnv::new(c.clone())?),
        })
    }

    pub fn spec(&self) -> EnvSpec {
        match self {
            EnvInstance::Route(e) => EnvSpec::Route(e.config().clone()),
            EnvInstance::Graph(e) => EnvSpec::Graph(e.config().clone()),
        }
    }

    fn inner(&self) -> &dyn CoordinationEnv {
        match self {
            EnvInstance::Route(e) => e,
            EnvInstance::Graph(e) => e,
        }
    }
}

impl From<RouteEnv> for EnvInstance {
    fn from(e: RouteEnv) -> Self {
        EnvInstance::Route(e)
    }
}

impl From<GraphEnv> for EnvInstance {
    fn from(e: GraphEnv) -> Self {
        EnvInstance::Graph(e)
    }
}

impl CoordinationEnv for EnvInstance {
    fn robots(&self) -> usize {
        self.inner().robots()
    }
    fn horizon(&self) -> usize {
        self.inner().horizon()
    }
    fn observation_scale(&self) -> ObservationScale {
        self.inner().observation_scale()
    }
    fn move_space(&self) -> MoveSpace {
        self.inner().move_space()
    }
    fn reset(&self, seed: u64) -> JointState {
        self.inner().reset(seed)
    }
    fn legal_moves(&self, state: &JointState, i: usize) -> Vec<usize> {
        self.inner().legal_moves(state, i)
    }
    fn guard_slots(&self) -> usize {
        self.inner().guard_slots()
    }
    fn guard_options(&self, state: &JointState, moves: &MoveVector, i: usize) -> Vec<GuardOption> {
        self.inner().guard_options(state, moves, i)
    }
    fn reward(&self, state: &JointState, moves: &MoveVector, guards: &GuardVector) -> Result<f64> {
        self.inner().reward(state, moves, guards)
    }
    fn step(
        &self,
        state: &JointState,
        moves: &MoveVector,
        guards: &GuardVector,
    ) -> Result<StepOutcome> {
        self.inner().step(state, moves, guards)
    }
    fn move_feature(&self, mv: f64) -> f64 {
        self.inner().move_feature(mv)
    }
}
