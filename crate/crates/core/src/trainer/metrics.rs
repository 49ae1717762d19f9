use serde::{Deserialize, Serialize};

/// One evaluation point of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Episodes completed when the record was taken.
    pub episode: usize,
    pub c_k: f64,
    /// Mean training return over the episodes since the previous record.
    pub train_return: f64,
    pub rl_reward: f64,
    pub t_reward: f64,
    pub r_gap: f64,
    /// Mean imitation loss since the previous record; 0 before any update.
    pub il_loss: f64,
    /// Mean critic or VDN loss since the previous record; 0 before any update.
    pub value_loss: f64,
    pub wall_ms: u64,
}

pub fn r_gap(rl: f64, t: f64) -> f64 {
    rl - t
}

/// Consecutive evaluations that must stay within the relative tolerance.
pub const CONVERGENCE_WINDOW: usize = 10;
pub const CONVERGENCE_TOLERANCE: f64 = 0.01;

/// First evaluation index `e` such that each of the `CONVERGENCE_WINDOW`
/// successive changes ending at `e` is at most 1% of the earlier value
/// (absolute 0.01 when that value is below 1 in magnitude).
pub fn convergence_episode(returns: &[f64]) -> Option<usize> {
    let mut run = 0;
    for e in 1..returns.len() {
        let prev = returns[e - 1];
        if (returns[e] - prev).abs() <= CONVERGENCE_TOLERANCE * prev.abs().max(1.0) {
            run += 1;
            if run >= CONVERGENCE_WINDOW {
                return Some(e);
            }
        } else {
            run = 0;
        }
    }
    None
}
