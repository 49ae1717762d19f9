use serde::{Deserialize, Serialize};

use crate::env::{CoordinationEnv, MoveSpace};
use crate::error::Result;
use crate::topology::{global_features, observe, ObservationScale, ObservationTopology};
use crate::types::{JointState, MoveVector};

/// Encodes states and moves into network inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub topology: ObservationTopology,
    pub scale: ObservationScale,
    /// Divisor applied to a move before it enters a network (`v_max` or node count).
    pub move_scale: f64,
}

impl FeatureMap {
    pub fn new<E: CoordinationEnv + ?Sized>(env: &E, topology: ObservationTopology) -> Self {
        let move_scale = match env.move_space() {
            MoveSpace::Continuous { v_max } => v_max,
            MoveSpace::Discrete { nodes } => nodes as f64,
        };
        Self {
            topology,
            scale: env.observation_scale(),
            move_scale,
        }
    }

    pub fn robots(&self) -> usize {
        self.topology.robots()
    }

    pub fn observation_len(&self) -> usize {
        self.topology.observation_len()
    }

    pub fn observation(&self, state: &JointState, i: usize) -> Result<Vec<f64>> {
        observe(&self.topology, state, i, &self.scale)
    }

    /// Local observation followed by the robot's own scaled move.
    pub fn guard_input(&self, state: &JointState, moves: &MoveVector, i: usize) -> Result<Vec<f64>> {
        let mut v = self.observation(state, i)?;
        v.push(moves.moves[i] / self.move_scale);
        Ok(v)
    }

    pub fn guard_input_len(&self) -> usize {
        self.observation_len() + 1
    }

    pub fn global_len(&self) -> usize {
        2 * self.robots() + 1
    }

    /// Global state features followed by every scaled move.
    pub fn critic_input(&self, state: &JointState, moves: &MoveVector) -> Vec<f64> {
        let mut v = global_features(state, &self.scale);
        v.extend(moves.moves.iter().map(|m| m / self.move_scale));
        v
    }

    pub fn critic_input_len(&self) -> usize {
        self.global_len() + self.robots()
    }
}
