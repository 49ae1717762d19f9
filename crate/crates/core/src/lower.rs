//! Centralized lower-level guard assignment.
//!
//! Given the global state and the joint move, the solver enumerates every
//! joint guard assignment and maximizes the team reward minus an alignment
//! penalty that charges each robot for choosing a guard its local imitation
//! policy would not produce.

use crate::env::{CoordinationEnv, GuardOption};
use crate::error::{BiclError, Result};
use crate::types::{GuardVector, JointState, MoveVector};

/// Per-robot legal guard options, in slot order.
#[derive(Clone, Debug, PartialEq)]
pub struct GuardCandidateSpace {
    pub options: Vec<Vec<GuardOption>>,
}

impl GuardCandidateSpace {
    pub fn from_env<E: CoordinationEnv + ?Sized>(env: &E, state: &JointState, moves: &MoveVector) -> Self {
        Self {
            options: (0..env.robots())
                .map(|i| env.guard_options(state, moves, i))
                .collect(),
        }
    }

    /// Number of joint candidates, `prod_i |options_i|`.
    pub fn size(&self) -> usize {
        self.options.iter().map(Vec::len).product()
    }

    pub fn robots(&self) -> usize {
        self.options.len()
    }

    /// Joint guard vector for per-robot option indices.
    pub fn guards(&self, choice: &[usize]) -> GuardVector {
        GuardVector::new(
            choice
                .iter()
                .zip(&self.options)
                .map(|(&c, opts)| opts[c].guard)
                .collect(),
        )
    }

    /// Restrict a fixed-width head distribution to the legal options of robot `i`.
    pub fn option_probs(&self, i: usize, slot_probs: &[f64]) -> Vec<f64> {
        self.options[i].iter().map(|o| slot_probs[o.slot]).collect()
    }
}

/// Squared distance between the one-hot encoding of option `candidate` and a
/// policy distribution over the same legal options.
pub fn mismatch_penalty(candidate: usize, policy_probs: &[f64]) -> Result<f64> {
    if candidate >= policy_probs.len() {
        return Err(BiclError::Contract(format!(
            "candidate {candidate} is not one of {} legal options",
            policy_probs.len()
        )));
    }
    let total: f64 = policy_probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(BiclError::Contract(format!(
            "policy probabilities sum to {total}, expected 1"
        )));
    }
    Ok(policy_probs
        .iter()
        .enumerate()
        .map(|(o, &p)| {
            let d = if o == candidate { 1.0 - p } else { p };
            d * d
        })
        .sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerSolution {
    pub guards: GuardVector,
    /// Option index chosen for each robot.
    pub choice: Vec<usize>,
    /// `U - c_k * sum_i H_i` at the optimum.
    pub objective: f64,
    /// `U` alone at the optimum.
    pub reward: f64,
    /// Number of joint candidates evaluated.
    pub evaluations: usize,
}

/// Exhaustive argmax of `U(y) - c_k * sum_i H_i(y_i)` over the joint candidate
/// space. Ties go to the lexicographically smallest option-index tuple.
pub fn solve_y_star<F>(
    space: &GuardCandidateSpace,
    policies: &[Vec<f64>],
    c_k: f64,
    mut reward_fn: F,
) -> Result<LowerSolution>
where
    F: FnMut(&GuardVector) -> Result<f64>,
{
    let n = space.robots();
    if policies.len() != n {
        return Err(BiclError::Contract(format!(
            "{} guard policies for {n} robots",
            policies.len()
        )));
    }
    if !(c_k >= 0.0 && c_k.is_finite()) {
        return Err(BiclError::Contract(format!("penalty weight {c_k} must be finite and >= 0")));
    }
    let mut penalties = Vec::with_capacity(n);
    for (i, opts) in space.options.iter().enumerate() {
        if opts.is_empty() {
            return Err(BiclError::Contract(format!("robot {i} has no guard options")));
        }
        if policies[i].len() != opts.len() {
            return Err(BiclError::Contract(format!(
                "robot {i} policy has {} entries for {} options",
                policies[i].len(),
                opts.len()
            )));
        }
        let h = if c_k == 0.0 {
            vec![0.0; opts.len()]
        } else {
            (0..opts.len())
                .map(|o| mismatch_penalty(o, &policies[i]))
                .collect::<Result<Vec<_>>>()?
        };
        penalties.push(h);
    }

    let mut choice = vec![0usize; n];
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    let mut evaluations = 0;
    loop {
        let guards = space.guards(&choice);
        let u = reward_fn(&guards)?;
        evaluations += 1;
        if !u.is_finite() {
            return Err(BiclError::Numerical(format!(
                "team reward {u} for guard candidate {:?}",
                guards.guards
            )));
        }
        let penalty: f64 = choice.iter().enumerate().map(|(i, &c)| penalties[i][c]).sum();
        let objective = u - c_k * penalty;
        if best.as_ref().map_or(true, |(b, _, _)| objective > *b) {
            best = Some((objective, u, choice.clone()));
        }
        // odometer: the last robot's option advances fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                let (objective, reward, choice) = best.expect("at least one candidate evaluated");
                return Ok(LowerSolution {
                    guards: space.guards(&choice),
                    choice,
                    objective,
                    reward,
                    evaluations,
                });
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < space.options[pos].len() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// Convenience wrapper evaluating `U` through an environment.
pub fn solve_with_env<E: CoordinationEnv + ?Sized>(
    env: &E,
    state: &JointState,
    moves: &MoveVector,
    policies: &[Vec<f64>],
    c_k: f64,
) -> Result<LowerSolution> {
    let space = GuardCandidateSpace::from_env(env, state, moves);
    solve_y_star(&space, policies, c_k, |y| env.reward(state, moves, y))
}
