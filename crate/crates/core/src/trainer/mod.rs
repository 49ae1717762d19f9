//! Bi-level training loop, penalty schedule, evaluation and convergence.

mod bicl;
mod config;
mod eval;
mod metrics;
mod schedule;

pub use bicl::{train_bicl, TrainResult};
pub(crate) use bicl::{finish, Recorder, Seeds};
pub use config::{Backend, Exploration, TopologyConfig, TrainConfig};
pub use eval::{bundle_action, evaluate, rollout_return, rollout_returns, EvalMode};
pub use metrics::{convergence_episode, r_gap, MetricsRecord, CONVERGENCE_TOLERANCE, CONVERGENCE_WINDOW};
pub use schedule::PenaltySchedule;
