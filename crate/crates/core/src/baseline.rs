//! Full-action-space comparison learner. Each robot's policy outputs its move
//! and its guard jointly; there is no lower-level solver and no imitation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::env::{CoordinationEnv, MoveSpace};
use crate::error::{BiclError, Result};
use std::path::Path;

use crate::env::EnvSpec;
use crate::learners::{save_networks, ACTOR_OUTPUT_BOUND, FeatureMap, FullActionManifest, LearnerSettings, ReplayBuffer, Transition};
use crate::nn::{Adam, Mlp, OutputActivation};
use crate::topology::ObservationTopology;
use crate::trainer::{finish, rollout_return, Backend, Recorder, Seeds, TrainConfig, TrainResult};
use crate::types::{GuardAction, GuardVector, JointState, MoveVector};

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

/// Route learner: a velocity head and a guard softmax head per robot, with a
/// centralized critic over `(s, x, y)`.
#[derive(Clone, Debug)]
pub struct RouteFull {
    pub v_max: f64,
    pub movers: Vec<Mlp>,
    pub guard_heads: Vec<Mlp>,
    pub target_movers: Vec<Mlp>,
    pub target_guard_heads: Vec<Mlp>,
    pub mover_opts: Vec<Adam>,
    pub guard_opts: Vec<Adam>,
    pub critic: Mlp,
    pub target_critic: Mlp,
    pub critic_opt: Adam,
}

/// Graph learner: additive per-robot Q over `(move, guard slot)` pairs.
#[derive(Clone, Debug)]
pub struct GraphFull {
    pub nodes: usize,
    pub q: Vec<Mlp>,
    pub target_q: Vec<Mlp>,
    pub opts: Vec<Adam>,
}

#[derive(Clone, Debug)]
pub enum FullActionLearner {
    Route(RouteFull),
    Graph(GraphFull),
}

#[derive(Clone, Debug)]
pub struct FullActionBundle {
    pub features: FeatureMap,
    pub guard_slots: usize,
    pub learner: FullActionLearner,
}

/// Legal guard slots of robot `i` under `moves`, with their guards.
fn legal_slots<E: CoordinationEnv + ?Sized>(env: &E, state: &JointState, moves: &MoveVector, i: usize) -> Vec<(usize, GuardAction)> {
    env.guard_options(state, moves, i).into_iter().map(|o| (o.slot, o.guard)).collect()
}

fn slot_of<E: CoordinationEnv + ?Sized>(env: &E, state: &JointState, moves: &MoveVector, i: usize, guard: GuardAction) -> Result<usize> {
    legal_slots(env, state, moves, i)
        .into_iter()
        .find(|(_, g)| *g == guard)
        .map(|(s, _)| s)
        .ok_or_else(|| BiclError::Contract(format!("guard {guard:?} of robot {i} is not legal")))
}

fn mask_of(slots: &[(usize, GuardAction)], width: usize) -> Vec<bool> {
    let mut mask = vec![false; width];
    for (s, _) in slots {
        mask[*s] = true;
    }
    mask
}

fn guard_at(slots: &[(usize, GuardAction)], slot: usize) -> GuardAction {
    slots.iter().find(|(s, _)| *s == slot).map_or(GuardAction::None, |(_, g)| *g)
}

/// Moves with robot `i` set to `node`; other entries are placeholders.
fn probe_moves(n: usize, i: usize, node: usize) -> MoveVector {
    let mut m = vec![0.0; n];
    m[i] = node as f64;
    MoveVector::new(m)
}

impl FullActionBundle {
    pub fn new<E: CoordinationEnv + ?Sized>(env: &E, topology: ObservationTopology, settings: &LearnerSettings, seed: u64) -> Result<Self> {
        if topology.robots() != env.robots() {
            return Err(BiclError::Config(format!(
                "topology covers {} robots, environment has {}",
                topology.robots(),
                env.robots()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = FeatureMap::new(env, topology);
        let n = env.robots();
        let obs = features.observation_len();
        let slots = env.guard_slots();
        let h = &settings.hidden;
        let learner = match env.move_space() {
            MoveSpace::Continuous { v_max } => {
                let movers = (0..n)
                    .map(|_| Mlp::with_output_bound(&sizes(obs, h, 1), OutputActivation::Tanh, ACTOR_OUTPUT_BOUND, &mut rng))
                    .collect::<Result<Vec<_>>>()?;
                let guard_heads = (0..n)
                    .map(|_| Mlp::new(&sizes(obs, h, slots), OutputActivation::Softmax, &mut rng))
                    .collect::<Result<Vec<_>>>()?;
                let critic = Mlp::new(
                    &sizes(features.critic_input_len() + n * slots, h, 1),
                    OutputActivation::Identity,
                    &mut rng,
                )?;
                FullActionLearner::Route(RouteFull {
                    v_max,
                    mover_opts: movers.iter().map(|m| Adam::new(m, settings.actor_lr)).collect(),
                    guard_opts: guard_heads.iter().map(|m| Adam::new(m, settings.actor_lr)).collect(),
                    target_movers: movers.clone(),
                    target_guard_heads: guard_heads.clone(),
                    movers,
                    guard_heads,
                    critic_opt: Adam::new(&critic, settings.critic_lr),
                    target_critic: critic.clone(),
                    critic,
                })
            }
            MoveSpace::Discrete { nodes } => {
                let q = (0..n)
                    .map(|_| Mlp::new(&sizes(obs, h, nodes * slots), OutputActivation::Identity, &mut rng))
                    .collect::<Result<Vec<_>>>()?;
                FullActionLearner::Graph(GraphFull {
                    nodes,
                    opts: q.iter().map(|m| Adam::new(m, settings.critic_lr)).collect(),
                    target_q: q.clone(),
                    q,
                })
            }
        };
        Ok(Self {
            features,
            guard_slots: slots,
            learner,
        })
    }

    pub fn robots(&self) -> usize {
        self.features.robots()
    }

    /// Output width of one robot's joint move-and-guard policy.
    pub fn action_dim(&self) -> usize {
        match &self.learner {
            FullActionLearner::Route(r) => r.movers[0].output_len() + r.guard_heads[0].output_len(),
            FullActionLearner::Graph(g) => g.q[0].output_len(),
        }
    }

    /// Legal `(move, guard slot, guard)` triples of robot `i` in a graph env.
    fn legal_pairs<E: CoordinationEnv + ?Sized>(&self, env: &E, state: &JointState, i: usize) -> Vec<(usize, usize, GuardAction)> {
        let n = self.robots();
        let mut pairs = Vec::new();
        for m in env.legal_moves(state, i) {
            for (s, g) in legal_slots(env, state, &probe_moves(n, i, m), i) {
                pairs.push((m, s, g));
            }
        }
        pairs
    }

    fn best_pair(q: &[f64], pairs: &[(usize, usize, GuardAction)], slots: usize) -> (usize, usize, GuardAction) {
        let mut best = pairs[0];
        for &p in pairs {
            if q[p.0 * slots + p.1] > q[best.0 * slots + best.1] {
                best = p;
            }
        }
        best
    }

    /// Joint action; `noise` is the Gaussian scale (route) or epsilon (graph)
    /// and route guards are sampled from the head when exploring.
    pub fn act<E: CoordinationEnv + ?Sized, R: Rng + ?Sized>(
        &self,
        env: &E,
        state: &JointState,
        explore: Option<(f64, &mut R)>,
    ) -> Result<(MoveVector, GuardVector)> {
        let n = self.robots();
        let mut moves = Vec::with_capacity(n);
        let mut guards = Vec::with_capacity(n);
        match &self.learner {
            FullActionLearner::Route(r) => {
                let mut explore = explore;
                let normal = match &explore {
                    Some((noise, _)) => Some(
                        Normal::new(0.0, noise.max(0.0)).map_err(|e| BiclError::Config(format!("exploration noise: {e}")))?,
                    ),
                    None => None,
                };
                let mut obs_all = Vec::with_capacity(n);
                for i in 0..n {
                    let obs = self.features.observation(state, i)?;
                    let mut a = r.movers[i].forward(&obs)?[0];
                    if let (Some(normal), Some((_, rng))) = (&normal, explore.as_mut()) {
                        a = (a + normal.sample(&mut **rng)).clamp(-1.0, 1.0);
                    }
                    moves.push(r.v_max * a);
                    obs_all.push(obs);
                }
                let moves_v = MoveVector::new(moves.clone());
                for (i, obs) in obs_all.iter().enumerate() {
                    let slots = legal_slots(env, state, &moves_v, i);
                    let probs = r.guard_heads[i].forward_masked(obs, &mask_of(&slots, self.guard_slots))?;
                    let slot = match explore.as_mut() {
                        Some((_, rng)) => {
                            let u: f64 = rng.random();
                            let mut acc = 0.0;
                            let mut pick = slots[0].0;
                            for (s, _) in &slots {
                                acc += probs[*s];
                                pick = *s;
                                if u < acc {
                                    break;
                                }
                            }
                            pick
                        }
                        None => {
                            let mut best = slots[0].0;
                            for (s, _) in &slots {
                                if probs[*s] > probs[best] {
                                    best = *s;
                                }
                            }
                            best
                        }
                    };
                    guards.push(guard_at(&slots, slot));
                }
            }
            FullActionLearner::Graph(g) => {
                let mut explore = explore;
                for i in 0..n {
                    let pairs = self.legal_pairs(env, state, i);
                    let random = match explore.as_mut() {
                        Some((eps, rng)) => rng.random_bool(eps.clamp(0.0, 1.0)).then(|| pairs[rng.random_range(0..pairs.len())]),
                        None => None,
                    };
                    let (m, _, guard) = match random {
                        Some(p) => p,
                        None => {
                            let q = g.q[i].forward(&self.features.observation(state, i)?)?;
                            Self::best_pair(&q, &pairs, self.guard_slots)
                        }
                    };
                    moves.push(m as f64);
                    guards.push(guard);
                }
            }
        }
        Ok((MoveVector::new(moves), GuardVector::new(guards)))
    }

    /// Critic input with taken guards one-hot encoded per robot.
    fn critic_input_onehot<E: CoordinationEnv + ?Sized>(&self, env: &E, s: &JointState, x: &MoveVector, y: &GuardVector) -> Result<Vec<f64>> {
        let mut v = self.features.critic_input(s, x);
        for i in 0..self.robots() {
            let mut block = vec![0.0; self.guard_slots];
            block[slot_of(env, s, x, i, y.guards[i])?] = 1.0;
            v.extend(block);
        }
        Ok(v)
    }
}

fn route_critic_update<E: CoordinationEnv + ?Sized>(b: &mut FullActionBundle, env: &E, batch: &[&Transition], gamma: f64, tau: f64) -> Result<f64> {
    let mut inputs = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    {
        let FullActionLearner::Route(r) = &b.learner else { unreachable!() };
        for t in batch {
            inputs.push(b.critic_input_onehot(env, &t.s, &t.x, &t.y_star)?);
            let mut target = t.reward;
            if !t.done {
                let n = b.robots();
                let mut next_moves = Vec::with_capacity(n);
                let mut obs = Vec::with_capacity(n);
                for i in 0..n {
                    let o = b.features.observation(&t.s_next, i)?;
                    next_moves.push(r.v_max * r.target_movers[i].forward(&o)?[0]);
                    obs.push(o);
                }
                let nm = MoveVector::new(next_moves);
                let mut input = b.features.critic_input(&t.s_next, &nm);
                for (i, o) in obs.iter().enumerate() {
                    let mask = mask_of(&legal_slots(env, &t.s_next, &nm, i), b.guard_slots);
                    input.extend(r.target_guard_heads[i].forward_masked(o, &mask)?);
                }
                target += gamma * r.target_critic.forward(&input)?[0];
            }
            targets.push(target);
        }
    }
    let FullActionLearner::Route(r) = &mut b.learner else { unreachable!() };
    let scale = 1.0 / batch.len() as f64;
    let mut grads = r.critic.zero_grads();
    let mut loss = 0.0;
    for (input, target) in inputs.iter().zip(&targets) {
        let trace = r.critic.trace(input, None)?;
        let err = trace.output[0] - target;
        loss += err * err;
        r.critic.backward(&trace, &[2.0 * err * scale], &mut grads)?;
    }
    r.critic_opt.apply_update(&mut r.critic, &grads)?;
    r.target_critic.soft_update(&r.critic, tau);
    Ok(loss * scale)
}

fn route_actor_update<E: CoordinationEnv + ?Sized>(b: &mut FullActionBundle, env: &E, i: usize, batch: &[&Transition], tau: f64) -> Result<()> {
    let slots_w = b.guard_slots;
    let global = b.features.global_len();
    let n = b.robots();
    let mut prepared = Vec::with_capacity(batch.len());
    for t in batch {
        let input = b.critic_input_onehot(env, &t.s, &t.x, &t.y_star)?;
        let obs = b.features.observation(&t.s, i)?;
        let mask = mask_of(&legal_slots(env, &t.s, &t.x, i), slots_w);
        prepared.push((input, obs, mask));
    }
    let FullActionLearner::Route(r) = &mut b.learner else { unreachable!() };
    let move_slot = global + i;
    let block = global + n + i * slots_w;
    let scale = 1.0 / batch.len() as f64;
    let mut mg = r.movers[i].zero_grads();
    let mut gg = r.guard_heads[i].zero_grads();
    for (mut input, obs, mask) in prepared {
        let mtrace = r.movers[i].trace(&obs, None)?;
        let gtrace = r.guard_heads[i].trace(&obs, Some(&mask))?;
        input[move_slot] = mtrace.output[0];
        input[block..block + slots_w].copy_from_slice(&gtrace.output);
        let ctrace = r.critic.trace(&input, None)?;
        let dq = r.critic.input_gradient(&ctrace, &[1.0])?;
        r.movers[i].backward(&mtrace, &[-dq[move_slot] * scale], &mut mg)?;
        let up: Vec<f64> = dq[block..block + slots_w].iter().map(|d| -d * scale).collect();
        r.guard_heads[i].backward(&gtrace, &up, &mut gg)?;
    }
    if !(mg.is_finite() && gg.is_finite()) {
        return Err(BiclError::Numerical(format!("baseline actor {i} gradient is not finite")));
    }
    r.mover_opts[i].apply_update(&mut r.movers[i], &mg)?;
    r.guard_opts[i].apply_update(&mut r.guard_heads[i], &gg)?;
    r.target_movers[i].soft_update(&r.movers[i], tau);
    r.target_guard_heads[i].soft_update(&r.guard_heads[i], tau);
    Ok(())
}

fn graph_update<E: CoordinationEnv + ?Sized>(b: &mut FullActionBundle, env: &E, batch: &[&Transition], gamma: f64, tau: f64) -> Result<f64> {
    let n = b.robots();
    let slots_w = b.guard_slots;
    let mut prepared = Vec::with_capacity(batch.len());
    {
        let FullActionLearner::Graph(g) = &b.learner else { unreachable!() };
        for t in batch {
            let mut target = t.reward;
            if !t.done {
                for i in 0..n {
                    let q = g.target_q[i].forward(&b.features.observation(&t.s_next, i)?)?;
                    let p = FullActionBundle::best_pair(&q, &b.legal_pairs(env, &t.s_next, i), slots_w);
                    target += gamma * q[p.0 * slots_w + p.1];
                }
            }
            let mut idx = Vec::with_capacity(n);
            let mut obs = Vec::with_capacity(n);
            for i in 0..n {
                idx.push(t.x.node(i) * slots_w + slot_of(env, &t.s, &t.x, i, t.y_star.guards[i])?);
                obs.push(b.features.observation(&t.s, i)?);
            }
            prepared.push((obs, idx, target));
        }
    }
    let FullActionLearner::Graph(g) = &mut b.learner else { unreachable!() };
    let scale = 1.0 / batch.len() as f64;
    let mut grads: Vec<_> = g.q.iter().map(Mlp::zero_grads).collect();
    let mut loss = 0.0;
    for (obs, idx, target) in prepared {
        let traces = (0..n).map(|i| g.q[i].trace(&obs[i], None)).collect::<Result<Vec<_>>>()?;
        let total: f64 = traces.iter().zip(&idx).map(|(tr, &j)| tr.output[j]).sum();
        let err = total - target;
        loss += err * err;
        for i in 0..n {
            let mut up = vec![0.0; g.q[i].output_len()];
            up[idx[i]] = 2.0 * err * scale;
            g.q[i].backward(&traces[i], &up, &mut grads[i])?;
        }
    }
    for i in 0..n {
        g.opts[i].apply_update(&mut g.q[i], &grads[i])?;
        g.target_q[i].soft_update(&g.q[i], tau);
    }
    Ok(loss * scale)
}

/// Writes every network of a full-action bundle plus `manifest.json` into `dir`.
pub fn save_full_action(bundle: &FullActionBundle, env: &EnvSpec, settings: &LearnerSettings, dir: &Path) -> Result<()> {
    let mut nets: Vec<(&str, Option<usize>, &Mlp)> = Vec::new();
    let backend = match &bundle.learner {
        FullActionLearner::Route(r) => {
            for i in 0..bundle.robots() {
                nets.push(("mover", Some(i), &r.movers[i]));
                nets.push(("guard_head", Some(i), &r.guard_heads[i]));
            }
            nets.push(("critic", None, &r.critic));
            "route-full-action"
        }
        FullActionLearner::Graph(g) => {
            for (i, q) in g.q.iter().enumerate() {
                nets.push(("q", Some(i), q));
            }
            "graph-full-action"
        }
    };
    save_networks(dir, &nets, |networks| FullActionManifest {
        backend: backend.to_string(),
        env: env.clone(),
        features: bundle.features.clone(),
        guard_slots: bundle.guard_slots,
        settings: settings.clone(),
        networks,
    })
}

/// Mean greedy return of a full-action bundle over `rollouts` seeded resets.
pub fn evaluate_full_action<E: CoordinationEnv + ?Sized>(bundle: &FullActionBundle, env: &E, rollouts: usize, seed: u64) -> Result<f64> {
    if rollouts == 0 {
        return Err(BiclError::Config("evaluation needs at least one rollout".into()));
    }
    let mut total = 0.0;
    for r in 0..rollouts as u64 {
        total += rollout_return(env, crate::seed::derive_seed(seed, r), |s| {
            bundle.act::<E, ChaCha8Rng>(env, s, None)
        })?;
    }
    Ok(total / rollouts as f64)
}

/// Same loop skeleton as the bi-level trainer, with guards taken from each
/// robot's own guard head and no lower-level solve or imitation step.
pub fn train_full_action<E: CoordinationEnv + ?Sized>(env: &E, config: &TrainConfig) -> Result<TrainResult<FullActionBundle>> {
    config.check_env(env)?;
    let seeds = Seeds::new(config.seed);
    let topology = config.topology.build(env.robots())?;
    let mut bundle = FullActionBundle::new(env, topology, &config.learner, seeds.init)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.rng);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let exploration = config.exploration();
    let tau = config.learner.tau;
    let mut recorder = Recorder::new(config.record_wall_clock);
    let mut metrics = Vec::new();
    let mut update_rounds = 0;
    let mut c_k = config.schedule.ck_at(0);

    for k in 0..config.episodes {
        c_k = config.schedule.ck_at(k as u64);
        let noise = exploration.at(k, config.episodes);
        let mut state = env.reset(seeds.episode(k));
        let mut episode_return = 0.0;
        for _ in 0..config.steps_per_episode {
            let (moves, guards) = bundle.act(env, &state, Some((noise, &mut rng)))?;
            let out = env.step(&state, &moves, &guards)?;
            episode_return += out.reward;
            buffer.push(Transition {
                s: state,
                x: moves,
                y_star: guards,
                reward: out.reward,
                s_next: out.state.clone(),
                done: out.done,
            });
            state = out.state;
            if buffer.len() >= config.warmup.max(config.batch) {
                let batch = buffer.sample(config.batch, &mut rng)?;
                let value = match config.backend {
                    Backend::RouteActorCritic => {
                        let l = route_critic_update(&mut bundle, env, &batch, config.gamma, tau)?;
                        for i in 0..env.robots() {
                            route_actor_update(&mut bundle, env, i, &batch, tau)?;
                        }
                        l
                    }
                    Backend::GraphVdn => graph_update(&mut bundle, env, &batch, config.gamma, tau)?,
                };
                if !value.is_finite() {
                    return Err(BiclError::Numerical(format!("baseline value loss is {value}")));
                }
                recorder.value_loss(value);
                update_rounds += 1;
            }
            if out.done {
                break;
            }
        }
        recorder.episode_return(episode_return);
        let done_episodes = k + 1;
        if recorder.due(done_episodes, config) {
            let t = evaluate_full_action(&bundle, env, config.eval_rollouts, seeds.eval)?;
            metrics.push(recorder.record(done_episodes, c_k, t, t));
        }
    }
    Ok(finish(bundle, metrics, recorder.first_trained(), c_k, buffer.len(), update_rounds))
}
