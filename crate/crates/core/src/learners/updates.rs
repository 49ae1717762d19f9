//! Per-step gradient updates. Each function consumes one minibatch and
//! performs a single Adam step on the networks it owns.

use super::buffer::Transition;
use super::bundle::{best_legal, ActorCritic, MoveLearner, PolicyBundle, Vdn};
use crate::env::CoordinationEnv;
use crate::error::{BiclError, Result};
use crate::types::MoveVector;

fn actor_critic(bundle: &mut PolicyBundle) -> Result<(&super::FeatureMap, &mut ActorCritic)> {
    match &mut bundle.movers {
        MoveLearner::ActorCritic(ac) => Ok((&bundle.features, ac)),
        MoveLearner::Vdn(_) => Err(BiclError::Config("update requires the route actor-critic backend".into())),
    }
}

fn vdn(bundle: &mut PolicyBundle) -> Result<(&super::FeatureMap, &mut Vdn)> {
    match &mut bundle.movers {
        MoveLearner::Vdn(v) => Ok((&bundle.features, v)),
        MoveLearner::ActorCritic(_) => Err(BiclError::Config("update requires the graph VDN backend".into())),
    }
}

fn finite(loss: f64, what: &str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(BiclError::Numerical(format!("{what} loss is {loss}")))
    }
}

/// Mean squared TD error of the centralized critic against
/// `r + gamma * (1 - done) * Q'(s', pi'(s'))`, followed by one Adam step and
/// a soft update of the target critic.
pub fn critic_update(bundle: &mut PolicyBundle, batch: &[&Transition], gamma: f64, tau: f64) -> Result<f64> {
    let (features, ac) = actor_critic(bundle)?;
    if batch.is_empty() {
        return Ok(0.0);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = ac.critic.zero_grads();
    let mut loss = 0.0;
    for t in batch {
        let mut target = t.reward;
        if !t.done && gamma != 0.0 {
            let mut next = Vec::with_capacity(features.robots());
            for (i, actor) in ac.target_actors.iter().enumerate() {
                next.push(ac.v_max * actor.forward(&features.observation(&t.s_next, i)?)?[0]);
            }
            let input = features.critic_input(&t.s_next, &MoveVector::new(next));
            target += gamma * ac.target_critic.forward(&input)?[0];
        }
        let trace = ac.critic.trace(&features.critic_input(&t.s, &t.x), None)?;
        let err = trace.output[0] - target;
        loss += err * err;
        ac.critic.backward(&trace, &[2.0 * err * scale], &mut grads)?;
    }
    let loss = finite(loss * scale, "critic")?;
    ac.critic_opt.apply_update(&mut ac.critic, &grads)?;
    ac.target_critic.soft_update(&ac.critic, tau);
    Ok(loss)
}

/// Deterministic policy-gradient step for robot `i`: ascend the critic's
/// value, less `action_l2 * a^2`, with robot `i`'s move replaced by its actor
/// output and the other robots' moves taken from the batch. Returns the
/// gradient norm.
pub fn actor_update(bundle: &mut PolicyBundle, i: usize, batch: &[&Transition], tau: f64) -> Result<f64> {
    let (features, ac) = actor_critic(bundle)?;
    if i >= ac.actors.len() {
        return Err(BiclError::RobotIndex { index: i, robots: ac.actors.len() });
    }
    if batch.is_empty() {
        return Ok(0.0);
    }
    let slot = features.global_len() + i;
    let scale = 1.0 / batch.len() as f64;
    let mut grads = ac.actors[i].zero_grads();
    for t in batch {
        let atrace = ac.actors[i].trace(&features.observation(&t.s, i)?, None)?;
        let mut input = features.critic_input(&t.s, &t.x);
        input[slot] = atrace.output[0];
        let ctrace = ac.critic.trace(&input, None)?;
        let dq = ac.critic.input_gradient(&ctrace, &[1.0])?[slot];
        let a = atrace.output[0];
        ac.actors[i].backward(&atrace, &[(2.0 * ac.action_l2 * a - dq) * scale], &mut grads)?;
    }
    let norm = grads.norm();
    if !norm.is_finite() {
        return Err(BiclError::Numerical(format!("actor {i} gradient norm is {norm}")));
    }
    ac.actor_opts[i].apply_update(&mut ac.actors[i], &grads)?;
    ac.target_actors[i].soft_update(&ac.actors[i], tau);
    Ok(norm)
}

/// Per-sample squared distance between the one-hot oracle guard and the
/// masked imitation distribution, plus the gradient w.r.t. the probabilities.
fn il_terms<E: CoordinationEnv + ?Sized>(
    bundle: &PolicyBundle,
    env: &E,
    i: usize,
    t: &Transition,
) -> Result<(crate::nn::Trace, Vec<f64>, f64)> {
    let options = env.guard_options(&t.s, &t.x, i);
    let target = t.y_star.guards.get(i).copied();
    let slot = options
        .iter()
        .find(|o| Some(o.guard) == target)
        .map(|o| o.slot)
        .ok_or_else(|| {
            BiclError::Contract(format!("oracle guard {target:?} of robot {i} is not a legal option"))
        })?;
    let mut mask = vec![false; bundle.guard_slots];
    for o in &options {
        mask[o.slot] = true;
    }
    let input = bundle.features.guard_input(&t.s, &t.x, i)?;
    let trace = bundle.guards[i].net.trace(&input, Some(&mask))?;
    let mut diff = trace.output.clone();
    diff[slot] -= 1.0;
    let loss = diff.iter().map(|d| d * d).sum();
    Ok((trace, diff, loss))
}

/// Batch-mean imitation loss of robot `i` without updating anything.
pub fn il_loss<E: CoordinationEnv + ?Sized>(
    bundle: &PolicyBundle,
    env: &E,
    i: usize,
    batch: &[&Transition],
) -> Result<f64> {
    if i >= bundle.robots() {
        return Err(BiclError::RobotIndex { index: i, robots: bundle.robots() });
    }
    let mut total = 0.0;
    for t in batch {
        total += il_terms(bundle, env, i, t)?.2;
    }
    Ok(total / batch.len().max(1) as f64)
}

/// One Adam step on robot `i`'s imitation policy minimizing the mean
/// squared distance to the oracle guards. Returns the pre-update loss.
pub fn il_update<E: CoordinationEnv + ?Sized>(
    bundle: &mut PolicyBundle,
    env: &E,
    i: usize,
    batch: &[&Transition],
) -> Result<f64> {
    if i >= bundle.robots() {
        return Err(BiclError::RobotIndex { index: i, robots: bundle.robots() });
    }
    if batch.is_empty() {
        return Ok(0.0);
    }
    let scale = 1.0 / batch.len() as f64;
    let net = &bundle.guards[i].net;
    let mut grads = net.zero_grads();
    let mut loss = 0.0;
    for t in batch {
        let (trace, diff, l) = il_terms(bundle, env, i, t)?;
        loss += l;
        let upstream: Vec<f64> = diff.iter().map(|d| 2.0 * d * scale).collect();
        net.backward(&trace, &upstream, &mut grads)?;
    }
    let loss = finite(loss * scale, "imitation")?;
    let policy = &mut bundle.guards[i];
    policy.opt.apply_update(&mut policy.net, &grads)?;
    Ok(loss)
}

/// TD step on the additive value `sum_i Q_i(o_i, x_i)` toward
/// `r + gamma * (1 - done) * sum_i max_{x'} Q'_i(o'_i, x')` over legal moves.
pub fn vdn_update<E: CoordinationEnv + ?Sized>(
    bundle: &mut PolicyBundle,
    env: &E,
    batch: &[&Transition],
    gamma: f64,
    tau: f64,
) -> Result<f64> {
    let (features, v) = vdn(bundle)?;
    if batch.is_empty() {
        return Ok(0.0);
    }
    let n = v.q.len();
    let scale = 1.0 / batch.len() as f64;
    let mut grads: Vec<_> = v.q.iter().map(|q| q.zero_grads()).collect();
    let mut loss = 0.0;
    for t in batch {
        let mut target = t.reward;
        if !t.done && gamma != 0.0 {
            let mut next = 0.0;
            for i in 0..n {
                let q = v.target_q[i].forward(&features.observation(&t.s_next, i)?)?;
                next += q[best_legal(&q, &env.legal_moves(&t.s_next, i))];
            }
            target += gamma * next;
        }
        let mut traces = Vec::with_capacity(n);
        let mut total = 0.0;
        for i in 0..n {
            let x = t.x.node(i);
            if x >= v.nodes {
                return Err(BiclError::Contract(format!("robot {i} move {x} outside the node set")));
            }
            let trace = v.q[i].trace(&features.observation(&t.s, i)?, None)?;
            total += trace.output[x];
            traces.push(trace);
        }
        let err = total - target;
        loss += err * err;
        for (i, trace) in traces.iter().enumerate() {
            let mut up = vec![0.0; v.nodes];
            up[t.x.node(i)] = 2.0 * err * scale;
            v.q[i].backward(trace, &up, &mut grads[i])?;
        }
    }
    let loss = finite(loss * scale, "vdn")?;
    for i in 0..n {
        v.opts[i].apply_update(&mut v.q[i], &grads[i])?;
        v.target_q[i].soft_update(&v.q[i], tau);
    }
    Ok(loss)
}
