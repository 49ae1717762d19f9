//! Bi-level coordination learning for multi-robot teams whose actions split
//! into moves, which drive the state, and guards, which only shape the reward.
//!
//! A centralized lower-level solver picks guards exhaustively during training,
//! local imitation policies learn to reproduce them, and reinforcement
//! learning trains the move policies over the reduced action space.

pub mod baseline;
pub mod env;
pub mod error;
pub mod learners;
pub mod lower;
pub mod nn;
pub mod seed;
pub mod topology;
pub mod trainer;
pub mod types;

pub use baseline::{evaluate_full_action, save_full_action, train_full_action, FullActionBundle};
pub use env::{CoordinationEnv, EnvInstance, EnvSpec, GraphEnv, GraphEnvConfig, RouteEnv, RouteEnvConfig};
pub use error::{BiclError, Result};
pub use learners::PolicyBundle;
pub use lower::{solve_with_env, solve_y_star, GuardCandidateSpace, LowerSolution};
pub use topology::{build_topology, ObservationTopology, TopologyMode};
pub use trainer::{
    convergence_episode, evaluate, r_gap, train_bicl, Backend, EvalMode, MetricsRecord, PenaltySchedule, TrainConfig,
    TrainResult,
};
pub use types::{GuardAction, GuardVector, JointState, MoveVector};
