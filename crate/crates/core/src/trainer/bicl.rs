use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Backend, TrainConfig};
use super::eval::{evaluate, EvalMode};
use super::metrics::{convergence_episode, r_gap, MetricsRecord};
use crate::env::CoordinationEnv;
use crate::error::Result;
use crate::learners::{actor_update, critic_update, il_update, vdn_update, PolicyBundle, ReplayBuffer, Transition};
use crate::lower::solve_with_env;
use crate::seed::derive_seed;

/// Outcome of a training run.
#[derive(Clone, Debug)]
pub struct TrainResult<B = PolicyBundle> {
    pub bundle: B,
    pub metrics: Vec<MetricsRecord>,
    /// Index into `metrics` where T-Reward first met the convergence rule.
    pub convergence_eval: Option<usize>,
    /// Episode count of that record.
    pub convergence_episode: Option<usize>,
    pub final_c_k: f64,
    /// Transitions held by the replay buffer at the end.
    pub buffered: usize,
    /// Environment steps that triggered a round of updates.
    pub update_rounds: usize,
}

impl<B> TrainResult<B> {
    pub fn final_record(&self) -> Option<&MetricsRecord> {
        self.metrics.last()
    }
}

/// Seed streams shared by both trainers so runs differ only in the learner.
pub(crate) struct Seeds {
    pub init: u64,
    pub rng: u64,
    episodes: u64,
    pub eval: u64,
}

impl Seeds {
    pub fn new(seed: u64) -> Self {
        Self {
            init: derive_seed(seed, 0),
            rng: derive_seed(seed, 1),
            episodes: derive_seed(seed, 2),
            eval: derive_seed(seed, 3),
        }
    }

    pub fn episode(&self, k: usize) -> u64 {
        derive_seed(self.episodes, k as u64)
    }
}

/// Running means between evaluation points.
pub(crate) struct Recorder {
    returns: Vec<f64>,
    il: (f64, usize),
    value: (f64, usize),
    start: Instant,
    wall: bool,
    trained: bool,
    records: usize,
    first_trained: Option<usize>,
}

impl Recorder {
    pub fn new(wall: bool) -> Self {
        Self {
            returns: Vec::new(),
            il: (0.0, 0),
            value: (0.0, 0),
            start: Instant::now(),
            wall,
            trained: false,
            records: 0,
            first_trained: None,
        }
    }

    pub fn episode_return(&mut self, r: f64) {
        self.returns.push(r);
    }

    pub fn il_loss(&mut self, l: f64) {
        self.il.0 += l;
        self.il.1 += 1;
    }

    pub fn value_loss(&mut self, l: f64) {
        self.trained = true;
        self.value.0 += l;
        self.value.1 += 1;
    }

    pub fn due(&self, episode: usize, config: &TrainConfig) -> bool {
        episode % config.eval_every == 0 || episode == config.episodes
    }

    pub fn record(&mut self, episode: usize, c_k: f64, rl_reward: f64, t_reward: f64) -> MetricsRecord {
        let mean = |(s, n): (f64, usize)| if n == 0 { 0.0 } else { s / n as f64 };
        let rec = MetricsRecord {
            episode,
            c_k,
            train_return: mean((self.returns.iter().sum(), self.returns.len())),
            rl_reward,
            t_reward,
            r_gap: r_gap(rl_reward, t_reward),
            il_loss: mean(self.il),
            value_loss: mean(self.value),
            wall_ms: if self.wall { self.start.elapsed().as_millis() as u64 } else { 0 },
        };
        self.returns.clear();
        self.il = (0.0, 0);
        self.value = (0.0, 0);
        if self.trained && self.first_trained.is_none() {
            self.first_trained = Some(self.records);
        }
        self.records += 1;
        rec
    }

    /// Index of the first record taken after at least one update.
    pub fn first_trained(&self) -> Option<usize> {
        self.first_trained
    }
}

/// Packs a finished run. Convergence is searched only over records taken
/// after the first update, so an untrained plateau never counts.
pub(crate) fn finish<B>(
    bundle: B,
    metrics: Vec<MetricsRecord>,
    first_trained: Option<usize>,
    final_c_k: f64,
    buffered: usize,
    update_rounds: usize,
) -> TrainResult<B> {
    let convergence_eval = first_trained.and_then(|start| {
        let series: Vec<f64> = metrics[start..].iter().map(|m| m.t_reward).collect();
        convergence_episode(&series).map(|e| start + e)
    });
    TrainResult {
        convergence_episode: convergence_eval.map(|e| metrics[e].episode),
        convergence_eval,
        bundle,
        metrics,
        final_c_k,
        buffered,
        update_rounds,
    }
}

/// Bi-level training: per step, perturbed policy moves, imitation-policy guard
/// distributions, the lower-level solve at the current penalty weight, the
/// environment step under the oracle guards, then (after warm-up) one value
/// update, one imitation update per robot and one actor update per robot.
pub fn train_bicl<E: CoordinationEnv + ?Sized>(env: &E, config: &TrainConfig) -> Result<TrainResult> {
    config.check_env(env)?;
    let seeds = Seeds::new(config.seed);
    let topology = config.topology.build(env.robots())?;
    let mut bundle = PolicyBundle::new(env, topology, &config.learner, seeds.init)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.rng);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let exploration = config.exploration();
    let n = env.robots();
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
            let moves = bundle.explore_moves(env, &state, noise, &mut rng)?;
            let policies = (0..n)
                .map(|i| Ok(bundle.guard_distribution(env, &state, &moves, i)?.1))
                .collect::<Result<Vec<_>>>()?;
            let y_star = solve_with_env(env, &state, &moves, &policies, c_k)?.guards;
            let out = env.step(&state, &moves, &y_star)?;
            episode_return += out.reward;
            buffer.push(Transition {
                s: state,
                x: moves,
                y_star,
                reward: out.reward,
                s_next: out.state.clone(),
                done: out.done,
            });
            state = out.state;

            if buffer.len() >= config.warmup.max(config.batch) {
                let batch = buffer.sample(config.batch, &mut rng)?;
                let value = match config.backend {
                    Backend::RouteActorCritic => critic_update(&mut bundle, &batch, config.gamma, tau)?,
                    Backend::GraphVdn => vdn_update(&mut bundle, env, &batch, config.gamma, tau)?,
                };
                recorder.value_loss(value);
                let mut il = 0.0;
                for i in 0..n {
                    il += il_update(&mut bundle, env, i, &batch)?;
                }
                recorder.il_loss(il / n as f64);
                if config.backend == Backend::RouteActorCritic {
                    for i in 0..n {
                        actor_update(&mut bundle, i, &batch, tau)?;
                    }
                }
                update_rounds += 1;
            }
            if out.done {
                break;
            }
        }
        recorder.episode_return(episode_return);

        let done_episodes = k + 1;
        if recorder.due(done_episodes, config) {
            let rl = evaluate(&bundle, env, config.eval_rollouts, EvalMode::RlReward, seeds.eval, c_k)?;
            let t = evaluate(&bundle, env, config.eval_rollouts, EvalMode::TReward, seeds.eval, c_k)?;
            metrics.push(recorder.record(done_episodes, c_k, rl, t));
        }
    }
    Ok(finish(bundle, metrics, recorder.first_trained(), c_k, buffer.len(), update_rounds))
}
