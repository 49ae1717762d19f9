use serde::{Deserialize, Serialize};

use crate::env::CoordinationEnv;
use crate::error::{BiclError, Result};
use crate::learners::PolicyBundle;
use crate::lower::solve_with_env;
use crate::seed::derive_seed;
use crate::types::{GuardVector, JointState, MoveVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Guards from the decentralized imitation policies.
    TReward,
    /// Guards from the centralized lower-level solver.
    RlReward,
}

/// Return of one episode from `reset(seed)` until done or the horizon.
pub fn rollout_return<E, F>(env: &E, seed: u64, mut act: F) -> Result<f64>
where
    E: CoordinationEnv + ?Sized,
    F: FnMut(&JointState) -> Result<(MoveVector, GuardVector)>,
{
    let mut state = env.reset(seed);
    let mut total = 0.0;
    for _ in 0..env.horizon() {
        let (moves, guards) = act(&state)?;
        let out = env.step(&state, &moves, &guards)?;
        total += out.reward;
        state = out.state;
        if out.done {
            break;
        }
    }
    Ok(total)
}

/// Noise-free joint action of a bi-level bundle.
pub fn bundle_action<E: CoordinationEnv + ?Sized>(
    bundle: &PolicyBundle,
    env: &E,
    state: &JointState,
    mode: EvalMode,
    c_k: f64,
) -> Result<(MoveVector, GuardVector)> {
    let moves = bundle.greedy_moves(env, state)?;
    let guards = match mode {
        EvalMode::TReward => GuardVector::new(
            (0..bundle.robots())
                .map(|i| bundle.greedy_guard(env, state, &moves, i))
                .collect::<Result<Vec<_>>>()?,
        ),
        EvalMode::RlReward => {
            let policies = (0..bundle.robots())
                .map(|i| Ok(bundle.guard_distribution(env, state, &moves, i)?.1))
                .collect::<Result<Vec<_>>>()?;
            solve_with_env(env, state, &moves, &policies, c_k)?.guards
        }
    };
    Ok((moves, guards))
}

/// Per-rollout returns; rollout `r` starts from `reset(derive_seed(seed, r))`.
pub fn rollout_returns<E: CoordinationEnv + ?Sized>(
    bundle: &PolicyBundle,
    env: &E,
    rollouts: usize,
    mode: EvalMode,
    seed: u64,
    c_k: f64,
) -> Result<Vec<f64>> {
    if rollouts == 0 {
        return Err(BiclError::Config("evaluation needs at least one rollout".into()));
    }
    (0..rollouts as u64)
        .map(|r| rollout_return(env, derive_seed(seed, r), |s| bundle_action(bundle, env, s, mode, c_k)))
        .collect()
}

/// Mean noise-free episode return under `mode`.
pub fn evaluate<E: CoordinationEnv + ?Sized>(
    bundle: &PolicyBundle,
    env: &E,
    rollouts: usize,
    mode: EvalMode,
    seed: u64,
    c_k: f64,
) -> Result<f64> {
    let returns = rollout_returns(bundle, env, rollouts, mode, seed, c_k)?;
    Ok(returns.iter().sum::<f64>() / returns.len() as f64)
}
