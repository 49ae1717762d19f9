use serde::{Deserialize, Serialize};

use super::schedule::PenaltySchedule;
use crate::env::{CoordinationEnv, MoveSpace};
use crate::error::{BiclError, Result};
use crate::learners::LearnerSettings;
use crate::topology::{build_topology, ObservationTopology, TopologyMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    RouteActorCritic,
    GraphVdn,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::RouteActorCritic => "route-actor-critic",
            Backend::GraphVdn => "graph-vdn",
        }
    }

    /// Backend that fits an environment's move space.
    pub fn for_env<E: CoordinationEnv + ?Sized>(env: &E) -> Self {
        match env.move_space() {
            MoveSpace::Continuous { .. } => Backend::RouteActorCritic,
            MoveSpace::Discrete { .. } => Backend::GraphVdn,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub mode: TopologyMode,
    /// Neighborhood size; `None` means every robot sees every robot.
    #[serde(default)]
    pub k: Option<usize>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            mode: TopologyMode::Window,
            k: None,
        }
    }
}

impl TopologyConfig {
    pub fn build(&self, robots: usize) -> Result<ObservationTopology> {
        build_topology(robots, self.mode, self.k.unwrap_or(robots))
    }
}

/// Exploration level decaying linearly from `start` to `end` over the first
/// `decay_fraction` of training, then held at `end`. Gaussian standard
/// deviation (in units of `v_max`) for route moves, epsilon for graph moves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exploration {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Exploration {
    pub fn route_default() -> Self {
        Self {
            start: 0.5,
            end: 0.05,
            decay_fraction: 0.6,
        }
    }

    pub fn graph_default() -> Self {
        Self {
            start: 0.9,
            end: 0.05,
            decay_fraction: 0.6,
        }
    }

    pub fn at(&self, episode: usize, episodes: usize) -> f64 {
        let span = (self.decay_fraction * episodes as f64).max(1.0);
        let t = (episode as f64 / span).min(1.0);
        self.start + (self.end - self.start) * t
    }
}

fn default_episodes() -> usize {
    5000
}
fn default_steps() -> usize {
    50
}
fn default_gamma() -> f64 {
    0.99
}
fn default_batch() -> usize {
    128
}
fn default_buffer() -> usize {
    100_000
}
fn default_warmup() -> usize {
    1000
}
fn default_eval_every() -> usize {
    50
}
fn default_eval_rollouts() -> usize {
    30
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_steps")]
    pub steps_per_episode: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_buffer")]
    pub buffer_capacity: usize,
    /// Transitions collected before the first update.
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_eval_rollouts")]
    pub eval_rollouts: usize,
    #[serde(default)]
    pub seed: u64,
    pub backend: Backend,
    #[serde(default)]
    pub schedule: PenaltySchedule,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub learner: LearnerSettings,
    /// Defaults to the backend's standard decay when absent.
    #[serde(default)]
    pub exploration: Option<Exploration>,
    /// Write elapsed milliseconds into metrics; off keeps metrics byte-reproducible.
    #[serde(default)]
    pub record_wall_clock: bool,
}

impl TrainConfig {
    pub fn new(backend: Backend) -> Self {
        Self {
            episodes: default_episodes(),
            steps_per_episode: default_steps(),
            gamma: default_gamma(),
            batch: default_batch(),
            buffer_capacity: default_buffer(),
            warmup: default_warmup(),
            eval_every: default_eval_every(),
            eval_rollouts: default_eval_rollouts(),
            seed: 0,
            backend,
            schedule: PenaltySchedule::default(),
            topology: TopologyConfig::default(),
            learner: LearnerSettings::default(),
            exploration: None,
            record_wall_clock: false,
        }
    }

    pub fn exploration(&self) -> Exploration {
        self.exploration.unwrap_or(match self.backend {
            Backend::RouteActorCritic => Exploration::route_default(),
            Backend::GraphVdn => Exploration::graph_default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("episodes", self.episodes),
            ("steps_per_episode", self.steps_per_episode),
            ("batch", self.batch),
            ("buffer_capacity", self.buffer_capacity),
            ("eval_every", self.eval_every),
            ("eval_rollouts", self.eval_rollouts),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(BiclError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(BiclError::Config(format!("gamma {} must lie in (0, 1]", self.gamma)));
        }
        let l = &self.learner;
        for (name, v) in [("actor_lr", l.actor_lr), ("critic_lr", l.critic_lr), ("il_lr", l.il_lr), ("tau", l.tau)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(BiclError::Config(format!("{name} {v} must be positive")));
            }
        }
        if l.hidden.iter().any(|&h| h == 0) {
            return Err(BiclError::Config("hidden layer widths must be positive".into()));
        }
        let e = self.exploration();
        if !(e.start >= 0.0 && e.end >= 0.0 && e.decay_fraction > 0.0) {
            return Err(BiclError::Config(format!("invalid exploration schedule {e:?}")));
        }
        self.schedule.validate()
    }

    /// Fails unless the backend fits the environment's move space.
    pub fn check_env<E: CoordinationEnv + ?Sized>(&self, env: &E) -> Result<()> {
        self.validate()?;
        let expected = Backend::for_env(env);
        if expected != self.backend {
            return Err(BiclError::Config(format!(
                "backend {} does not fit this environment, which needs {}",
                self.backend.name(),
                expected.name()
            )));
        }
        Ok(())
    }
}
