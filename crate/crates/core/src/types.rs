//! Joint state and decomposed action types shared by both environments.
//!
//! Positions and moves are stored as `f64` for both environments: the route
//! environment uses them as continuous positions and velocities, the graph
//! environment stores exact integer node indices.

use serde::{Deserialize, Serialize};

/// Global snapshot of every robot at one step of an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub positions: Vec<f64>,
    pub step_index: usize,
    pub arrived: Vec<bool>,
}

impl JointState {
    pub fn new(positions: Vec<f64>) -> Self {
        let n = positions.len();
        Self {
            positions,
            step_index: 0,
            arrived: vec![false; n],
        }
    }

    pub fn robots(&self) -> usize {
        self.positions.len()
    }

    pub fn all_arrived(&self) -> bool {
        self.arrived.iter().all(|&a| a)
    }

    /// Node index of robot `i` (graph environment).
    pub fn node(&self, i: usize) -> usize {
        self.positions[i] as usize
    }
}

/// The transition-driving half of a joint action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveVector {
    pub moves: Vec<f64>,
}

impl MoveVector {
    pub fn new(moves: Vec<f64>) -> Self {
        Self { moves }
    }

    pub fn from_nodes(nodes: &[usize]) -> Self {
        Self {
            moves: nodes.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn node(&self, i: usize) -> usize {
        self.moves[i] as usize
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }
}

/// A single robot's guard action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardAction {
    None,
    /// Guard against route adversary `j`.
    Adversary(usize),
    /// Guard the ordered graph edge `(from, to)`.
    Edge(usize, usize),
}

/// The reward-only half of a joint action.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardVector {
    pub guards: Vec<GuardAction>,
}

impl GuardVector {
    pub fn new(guards: Vec<GuardAction>) -> Self {
        Self { guards }
    }

    pub fn none(n: usize) -> Self {
        Self {
            guards: vec![GuardAction::None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.guards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.guards.is_empty()
    }
}
