use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::FeatureMap;
use crate::env::{CoordinationEnv, GuardOption, MoveSpace};
use crate::error::{BiclError, Result};
use crate::nn::{Adam, Mlp, OutputActivation};
use crate::topology::ObservationTopology;
use crate::types::{GuardAction, JointState, MoveVector};

/// Network widths and optimizer settings shared by every learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSettings {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub il_lr: f64,
    /// Polyak coefficient for target networks.
    pub tau: f64,
    /// Weight of the squared-action penalty in the actor loss.
    #[serde(default)]
    pub action_l2: f64,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            il_lr: 1e-4,
            tau: 0.01,
            action_l2: 0.0,
        }
    }
}

/// Output-layer init range of move policies, keeping initial moves near zero.
pub(crate) const ACTOR_OUTPUT_BOUND: f64 = 3e-3;

pub(crate) fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

/// Imitation policy mapping a local observation and own move to guard slots.
#[derive(Clone, Debug)]
pub struct GuardPolicy {
    pub net: Mlp,
    pub opt: Adam,
}

#[derive(Clone, Debug)]
pub struct ActorCritic {
    pub v_max: f64,
    pub action_l2: f64,
    pub actors: Vec<Mlp>,
    pub target_actors: Vec<Mlp>,
    pub actor_opts: Vec<Adam>,
    pub critic: Mlp,
    pub target_critic: Mlp,
    pub critic_opt: Adam,
}

/// Additive per-robot Q decomposition over discrete moves.
#[derive(Clone, Debug)]
pub struct Vdn {
    pub nodes: usize,
    pub q: Vec<Mlp>,
    pub target_q: Vec<Mlp>,
    pub opts: Vec<Adam>,
}

#[derive(Clone, Debug)]
pub enum MoveLearner {
    ActorCritic(ActorCritic),
    Vdn(Vdn),
}

/// Every network trained by the bi-level scheme.
#[derive(Clone, Debug)]
pub struct PolicyBundle {
    pub features: FeatureMap,
    pub guard_slots: usize,
    pub guards: Vec<GuardPolicy>,
    pub movers: MoveLearner,
}

impl PolicyBundle {
    pub fn new<E: CoordinationEnv + ?Sized>(
        env: &E,
        topology: ObservationTopology,
        settings: &LearnerSettings,
        seed: u64,
    ) -> Result<Self> {
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
        let guard_slots = env.guard_slots();
        let guards = (0..n)
            .map(|_| {
                let net = Mlp::new(
                    &layer_sizes(features.guard_input_len(), &settings.hidden, guard_slots),
                    OutputActivation::Softmax,
                    &mut rng,
                )?;
                let opt = Adam::new(&net, settings.il_lr);
                Ok(GuardPolicy { net, opt })
            })
            .collect::<Result<Vec<_>>>()?;
        let movers = match env.move_space() {
            MoveSpace::Continuous { v_max } => {
                let actors = (0..n)
                    .map(|_| {
                        Mlp::with_output_bound(
                            &layer_sizes(obs, &settings.hidden, 1),
                            OutputActivation::Tanh,
                            ACTOR_OUTPUT_BOUND,
                            &mut rng,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let critic = Mlp::new(
                    &layer_sizes(features.critic_input_len(), &settings.hidden, 1),
                    OutputActivation::Identity,
                    &mut rng,
                )?;
                MoveLearner::ActorCritic(ActorCritic {
                    v_max,
                    action_l2: settings.action_l2,
                    actor_opts: actors.iter().map(|a| Adam::new(a, settings.actor_lr)).collect(),
                    target_actors: actors.clone(),
                    actors,
                    critic_opt: Adam::new(&critic, settings.critic_lr),
                    target_critic: critic.clone(),
                    critic,
                })
            }
            MoveSpace::Discrete { nodes } => {
                let q = (0..n)
                    .map(|_| Mlp::new(&layer_sizes(obs, &settings.hidden, nodes), OutputActivation::Identity, &mut rng))
                    .collect::<Result<Vec<_>>>()?;
                MoveLearner::Vdn(Vdn {
                    nodes,
                    opts: q.iter().map(|m| Adam::new(m, settings.critic_lr)).collect(),
                    target_q: q.clone(),
                    q,
                })
            }
        };
        Ok(Self {
            features,
            guard_slots,
            guards,
            movers,
        })
    }

    pub fn robots(&self) -> usize {
        self.guards.len()
    }

    /// Output width of one robot's reinforcement-learning policy.
    pub fn move_action_dim(&self) -> usize {
        match &self.movers {
            MoveLearner::ActorCritic(ac) => ac.actors[0].output_len(),
            MoveLearner::Vdn(v) => v.nodes,
        }
    }

    pub fn backend_name(&self) -> &'static str {
        match self.movers {
            MoveLearner::ActorCritic(_) => "route-actor-critic",
            MoveLearner::Vdn(_) => "graph-vdn",
        }
    }

    /// Legal guard options of robot `i` and the imitation policy's probability of each.
    pub fn guard_distribution<E: CoordinationEnv + ?Sized>(
        &self,
        env: &E,
        state: &JointState,
        moves: &MoveVector,
        i: usize,
    ) -> Result<(Vec<GuardOption>, Vec<f64>)> {
        let options = env.guard_options(state, moves, i);
        let mut mask = vec![false; self.guard_slots];
        for o in &options {
            mask[o.slot] = true;
        }
        let input = self.features.guard_input(state, moves, i)?;
        let probs = self.guards[i].net.forward_masked(&input, &mask)?;
        let aligned = options.iter().map(|o| probs[o.slot]).collect();
        Ok((options, aligned))
    }

    /// Most probable legal guard of robot `i`; ties go to the lowest slot.
    pub fn greedy_guard<E: CoordinationEnv + ?Sized>(
        &self,
        env: &E,
        state: &JointState,
        moves: &MoveVector,
        i: usize,
    ) -> Result<GuardAction> {
        let (options, probs) = self.guard_distribution(env, state, moves, i)?;
        Ok(options[argmax(&probs)].guard)
    }

    /// Noise-free moves from the decentralized policies.
    pub fn greedy_moves<E: CoordinationEnv + ?Sized>(&self, env: &E, state: &JointState) -> Result<MoveVector> {
        let n = self.robots();
        let mut moves = Vec::with_capacity(n);
        for i in 0..n {
            let obs = self.features.observation(state, i)?;
            moves.push(match &self.movers {
                MoveLearner::ActorCritic(ac) => ac.v_max * ac.actors[i].forward(&obs)?[0],
                MoveLearner::Vdn(v) => {
                    let q = v.q[i].forward(&obs)?;
                    best_legal(&q, &env.legal_moves(state, i)) as f64
                }
            });
        }
        Ok(MoveVector::new(moves))
    }

    /// Exploratory moves: Gaussian noise with standard deviation `noise`
    /// (in units of `v_max`) for continuous moves, `noise`-greedy for discrete.
    pub fn explore_moves<E: CoordinationEnv + ?Sized, R: Rng + ?Sized>(
        &self,
        env: &E,
        state: &JointState,
        noise: f64,
        rng: &mut R,
    ) -> Result<MoveVector> {
        let mut moves = self.greedy_moves(env, state)?;
        match &self.movers {
            MoveLearner::ActorCritic(ac) => {
                let normal = Normal::new(0.0, noise.max(0.0))
                    .map_err(|e| BiclError::Config(format!("exploration noise: {e}")))?;
                for m in &mut moves.moves {
                    let a = *m / ac.v_max + normal.sample(rng);
                    *m = ac.v_max * a.clamp(-1.0, 1.0);
                }
            }
            MoveLearner::Vdn(_) => {
                for (i, m) in moves.moves.iter_mut().enumerate() {
                    if rng.random_bool(noise.clamp(0.0, 1.0)) {
                        let legal = env.legal_moves(state, i);
                        *m = legal[rng.random_range(0..legal.len())] as f64;
                    }
                }
            }
        }
        Ok(moves)
    }
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// Legal entry of `values` with the largest value (smallest index on ties).
pub(crate) fn best_legal(values: &[f64], legal: &[usize]) -> usize {
    let mut best = legal[0];
    for &j in legal {
        if values[j] > values[best] || (values[j] == values[best] && j < best) {
            best = j;
        }
    }
    best
}
