//! Static observation topologies and local observation encoding.

use serde::{Deserialize, Serialize};

use crate::error::{BiclError, Result};
use crate::types::JointState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyMode {
    /// `k` consecutive indices centered on the robot, shifted to stay in range.
    Window,
    /// `k` nearest robots by circular index distance.
    Ring,
}

/// For each robot the ordered set of robots whose state it can read.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationTopology {
    pub mode: TopologyMode,
    pub neighbor_sets: Vec<Vec<usize>>,
}

impl ObservationTopology {
    pub fn robots(&self) -> usize {
        self.neighbor_sets.len()
    }

    /// Neighborhood size, identical for every robot.
    pub fn k(&self) -> usize {
        self.neighbor_sets.first().map_or(0, Vec::len)
    }

    /// Length of every observation vector produced under this topology.
    pub fn observation_len(&self) -> usize {
        self.k() + 2
    }
}

pub fn build_topology(n: usize, mode: TopologyMode, k: usize) -> Result<ObservationTopology> {
    if k < 1 || k > n {
        return Err(BiclError::InvalidTopology(format!(
            "neighbor count {k} must lie in 1..={n}"
        )));
    }
    let neighbor_sets = (0..n)
        .map(|i| match mode {
            TopologyMode::Window => {
                let start = i.saturating_sub((k - 1) / 2).min(n - k);
                (start..start + k).collect()
            }
            TopologyMode::Ring => {
                let back = (k - 1) / 2;
                let mut set: Vec<usize> = (0..k).map(|o| (i + n + o - back) % n).collect();
                set.sort_unstable();
                set
            }
        })
        .collect();
    Ok(ObservationTopology {
        mode,
        neighbor_sets,
    })
}

/// Normalization constants for observations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationScale {
    /// Route length or node count.
    pub position: f64,
    pub horizon: usize,
}

impl ObservationScale {
    pub fn step_fraction(&self, step: usize) -> f64 {
        if self.horizon == 0 {
            0.0
        } else {
            step as f64 / self.horizon as f64
        }
    }
}

/// Local observation of robot `i`: scaled neighbor positions in index order,
/// then the robot's own arrived flag and the normalized step index.
pub fn observe(
    topology: &ObservationTopology,
    state: &JointState,
    i: usize,
    scale: &ObservationScale,
) -> Result<Vec<f64>> {
    let n = state.robots();
    if i >= n || i >= topology.robots() {
        return Err(BiclError::RobotIndex { index: i, robots: n });
    }
    let mut out = Vec::with_capacity(topology.observation_len());
    for &j in &topology.neighbor_sets[i] {
        let p = *state
            .positions
            .get(j)
            .ok_or(BiclError::RobotIndex { index: j, robots: n })?;
        out.push(p / scale.position);
    }
    out.push(if state.arrived[i] { 1.0 } else { 0.0 });
    out.push(scale.step_fraction(state.step_index));
    Ok(out)
}

/// Global feature vector used by centralized critics: every scaled position,
/// every arrived flag, then the step fraction.
pub fn global_features(state: &JointState, scale: &ObservationScale) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * state.robots() + 1);
    out.extend(state.positions.iter().map(|p| p / scale.position));
    out.extend(state.arrived.iter().map(|&a| if a { 1.0 } else { 0.0 }));
    out.push(scale.step_fraction(state.step_index));
    out
}
