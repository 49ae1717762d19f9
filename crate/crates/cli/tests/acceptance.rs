//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! `ACCEPTANCE_ONLY=1,3,8` restricts the run to the listed criteria.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bicl::ExperimentConfig;
use bicl_core::env::generate::{generate_graph, Density};
use bicl_core::env::route::{base_cost, guard_discount, Adversary, RouteEnvConfig};
use bicl_core::env::graph::EdgeCost;
use bicl_core::env::GraphEnvConfig;
use bicl_core::learners::{il_update, LearnerSettings, Transition};
use bicl_core::lower::GuardCandidateSpace;
use bicl_core::nn::{gradient_check, LossTag, Mlp, OutputActivation};
use bicl_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(label: &str, elapsed: Duration, budget: Duration) -> std::result::Result<(), String> {
    ensure(elapsed <= budget, || {
        format!("{label} took {:.1}s, budget {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64())
    })
}

// ---------------------------------------------------------------- helpers

/// Every per-robot option-index tuple in lexicographic order.
fn all_choices(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &m in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..m).map(move |o| {
                    let mut v = prefix.clone();
                    v.push(o);
                    v
                })
            })
            .collect();
    }
    out
}

fn squared_mismatch(candidate: usize, probs: &[f64]) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(o, &p)| {
            let target = if o == candidate { 1.0 } else { 0.0 };
            (target - p) * (target - p)
        })
        .sum()
}

/// Brute-force lower level: scan all tuples, keep the first strict maximum.
fn brute_force<E: CoordinationEnv>(
    env: &E,
    s: &JointState,
    x: &MoveVector,
    policies: &[Vec<f64>],
    c_k: f64,
) -> (Vec<usize>, f64) {
    let options: Vec<_> = (0..env.robots()).map(|i| env.guard_options(s, x, i)).collect();
    let sizes: Vec<usize> = options.iter().map(Vec::len).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for choice in all_choices(&sizes) {
        let y = GuardVector::new(choice.iter().zip(&options).map(|(&c, o)| o[c].guard).collect());
        let u = env.reward(s, x, &y).unwrap();
        let penalty: f64 = choice.iter().zip(policies).map(|(&c, p)| squared_mismatch(c, p)).sum();
        let objective = u - c_k * penalty;
        if best.as_ref().map_or(true, |(_, b)| objective > *b) {
            best = Some((choice, objective));
        }
    }
    best.unwrap()
}

fn random_distribution(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    // occasionally deterministic, so the penalty term can dominate
    if rng.random_bool(0.2) {
        let hot = rng.random_range(0..m);
        return (0..m).map(|o| if o == hot { 1.0 } else { 0.0 }).collect();
    }
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| r / total).collect()
}

fn random_guards<E: CoordinationEnv>(env: &E, s: &JointState, x: &MoveVector, rng: &mut ChaCha8Rng) -> GuardVector {
    GuardVector::new(
        (0..env.robots())
            .map(|i| {
                let opts = env.guard_options(s, x, i);
                opts[rng.random_range(0..opts.len())].guard
            })
            .collect(),
    )
}

fn random_route(rng: &mut ChaCha8Rng, max_robots: usize) -> RouteEnv {
    let n = rng.random_range(1..=max_robots);
    let m = rng.random_range(0..=3);
    let length = rng.random_range(10.0..60.0);
    let adversaries = (0..m)
        .map(|_| Adversary {
            center: rng.random_range(0.0..length),
            radius: rng.random_range(1.0..length / 2.0),
            intensity: rng.random_range(0.1..5.0),
        })
        .collect();
    let mut c = RouteEnvConfig::with_adversaries(n, adversaries);
    c.route_length = length;
    c.target_position = length;
    c.guard_beta = rng.random_range(0.05..=1.0);
    c.v_max = rng.random_range(0.5..5.0);
    RouteEnv::new(c).unwrap()
}

fn random_route_state(env: &RouteEnv, rng: &mut ChaCha8Rng) -> (JointState, MoveVector) {
    let c = env.config();
    let mut s = JointState::new((0..c.n).map(|_| rng.random_range(0.0..c.target_position)).collect());
    for i in 0..c.n {
        if rng.random_bool(0.15) {
            s.positions[i] = c.target_position;
            s.arrived[i] = true;
        }
    }
    let x = MoveVector::new((0..c.n).map(|_| rng.random_range(-c.v_max..=c.v_max)).collect());
    (s, x)
}

fn random_graph(rng: &mut ChaCha8Rng, max_robots: usize) -> GraphEnv {
    let nodes = rng.random_range(3..=7);
    let robots = rng.random_range(1..=max_robots);
    let density = if rng.random_bool(0.5) { Density::Sparse } else { Density::Dense };
    let mut c = generate_graph(nodes, robots, density, rng.random()).unwrap();
    c.alpha_star = rng.random_range(0.0..=1.0);
    GraphEnv::new(c).unwrap()
}

fn random_graph_state(env: &GraphEnv, rng: &mut ChaCha8Rng) -> (JointState, MoveVector) {
    let c = env.config();
    let s = JointState::new((0..c.n).map(|_| rng.random_range(0..c.nodes()) as f64).collect());
    let x = MoveVector::from_nodes(
        &(0..c.n)
            .map(|i| {
                let legal = env.legal_moves(&s, i);
                legal[rng.random_range(0..legal.len())]
            })
            .collect::<Vec<_>>(),
    );
    (s, x)
}

// ---------------------------------------------------------------- criterion 1

fn lower_matches<E: CoordinationEnv>(
    env: &E,
    s: &JointState,
    x: &MoveVector,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(), String> {
    let space = GuardCandidateSpace::from_env(env, s, x);
    let policies: Vec<Vec<f64>> = space.options.iter().map(|o| random_distribution(rng, o.len())).collect();
    let c_k = [0.0, 1.0, 10.0][rng.random_range(0..3)];
    let got = solve_y_star(&space, &policies, c_k, |y| env.reward(s, x, y)).map_err(|e| e.to_string())?;
    let (choice, objective) = brute_force(env, s, x, &policies, c_k);
    ensure(got.choice == choice && got.objective == objective, || {
        format!(
            "solver {:?} ({}) vs enumeration {:?} ({}) at c_k {c_k}",
            got.choice, got.objective, choice, objective
        )
    })
}

fn criterion_lower_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x10e1);
    let mut candidates = 0;
    for _ in 0..200 {
        let env = random_route(&mut rng, 3);
        let (s, x) = random_route_state(&env, &mut rng);
        candidates += GuardCandidateSpace::from_env(&env, &s, &x).size();
        lower_matches(&env, &s, &x, &mut rng)?;
    }
    let mut graphs = 0;
    while graphs < 200 {
        let env = random_graph(&mut rng, 3);
        let (s, x) = random_graph_state(&env, &mut rng);
        if (0..env.robots()).any(|i| env.guard_options(&s, &x, i).len() > 4) {
            continue;
        }
        candidates += GuardCandidateSpace::from_env(&env, &s, &x).size();
        lower_matches(&env, &s, &x, &mut rng)?;
        graphs += 1;
    }
    within_budget("lower-level check", start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "400 instances ({candidates} joint candidates) identical to enumeration in {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- criterion 2

fn criterion_gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (h, head) in [OutputActivation::Identity, OutputActivation::Tanh, OutputActivation::Softmax]
        .into_iter()
        .enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6ad + h as u64);
        for _ in 0..50 {
            let depth = rng.random_range(1..=3);
            let mut sizes = vec![rng.random_range(1..=8)];
            for _ in 0..depth {
                sizes.push(rng.random_range(2..=16));
            }
            sizes.push(rng.random_range(2..=6));
            let net = Mlp::new(&sizes, head, &mut rng).unwrap();
            let input: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tag = match head {
                OutputActivation::Softmax => LossTag::SoftmaxCrossEntropy {
                    label: rng.random_range(0..net.output_len()),
                },
                _ => LossTag::Quadratic {
                    target: (0..net.output_len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
                },
            };
            let err = gradient_check(&net, &input, &tag).map_err(|e| e.to_string())?;
            ensure(err < 1e-4, || format!("{head:?} net {sizes:?}: relative error {err:e}"))?;
            worst = worst.max(err);
        }
    }
    within_budget("gradient check", start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("150 nets, max relative error {worst:.2e}"))
}

// ---------------------------------------------------------------- criterion 3

fn criterion_schedule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5c4e);
    for _ in 0..20 {
        let c = rng.random_range(0.0..100.0);
        let beta = rng.random_range(1e-5..1e-2);
        let h = rng.random_range(0..10_000u64);
        let s = PenaltySchedule::new(c, beta, h).map_err(|e| e.to_string())?;
        ensure(s.ck_at(h) == c / 2.0, || format!("ck_at(h) = {} for c = {c}", s.ck_at(h)))?;
        let mut prev = s.ck_at(0);
        for k in 1..=10_000u64 {
            let v = s.ck_at(k);
            ensure(v >= prev && v <= c, || format!("not monotone at k = {k}: {prev} -> {v} (c {c}, beta {beta}, h {h})"))?;
            prev = v;
        }
    }
    let s = PenaltySchedule::new(10.0, 2e-3, 3000).map_err(|e| e.to_string())?;
    let expected = 10.0 / (1.0 + 6f64.exp());
    let got = s.ck_at(0);
    ensure((got - expected).abs() < 1e-12, || format!("c_0 = {got}, expected {expected}"))?;
    Ok(format!("20 random schedules monotone on [0, 10000]; c_0 = {got:.6e}"))
}

// ---------------------------------------------------------------- criterion 4 and 5

const DESK_EPISODES: usize = 1500;
const DESK_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// Three robots crossing three overlapping adversaries on a short route.
fn desk_route() -> RouteEnv {
    let adversaries = [3.0, 6.0, 9.0]
        .iter()
        .map(|&center| Adversary {
            center,
            radius: 3.0,
            intensity: 2.0,
        })
        .collect();
    let mut c = RouteEnvConfig::with_adversaries(3, adversaries);
    c.route_length = 12.0;
    c.target_position = 12.0;
    c.horizon = 20;
    c.guard_beta = 0.6;
    c.time_penalty = 0.5;
    c.start_positions = vec![6.0; 3];
    c.start_jitter = 6.0;
    RouteEnv::new(c).unwrap()
}

fn desk_route_config(c: f64, seed: u64) -> TrainConfig {
    let mut t = TrainConfig::new(Backend::RouteActorCritic);
    t.episodes = DESK_EPISODES;
    t.batch = 32;
    t.eval_every = 25;
    t.seed = seed;
    t.learner.action_l2 = 1.0;
    t.topology.k = Some(1);
    t.schedule = schedule(c, DESK_EPISODES);
    t
}

/// The reference schedule (beta 2e-3, h 3000 over 5000 episodes) compressed to `episodes`.
fn schedule(c: f64, episodes: usize) -> PenaltySchedule {
    PenaltySchedule::new(c, 2e-3 * 5000.0 / episodes as f64, (episodes * 3 / 5) as u64).unwrap()
}

const GRAPH_EPISODES: usize = 300;
const GRAPH_SEEDS: [u64; 3] = [1, 2, 3];

fn sparse_graph(seed: u64) -> GraphEnv {
    let mut c = generate_graph(5, 3, Density::Sparse, seed).unwrap();
    c.horizon = 15;
    GraphEnv::new(c).unwrap()
}

fn graph_config(seed: u64) -> TrainConfig {
    let mut t = TrainConfig::new(Backend::GraphVdn);
    t.episodes = GRAPH_EPISODES;
    t.batch = 32;
    t.warmup = 200;
    t.eval_every = 5;
    t.steps_per_episode = 15;
    t.seed = seed;
    t.topology.k = Some(1);
    t.schedule = schedule(10.0, GRAPH_EPISODES);
    t
}

struct RunSummary {
    mean_abs_gap: f64,
    mean_t: f64,
    final_t: f64,
    final_gap: f64,
    convergence: Option<usize>,
}

fn summarize(metrics: &[MetricsRecord], convergence: Option<usize>) -> RunSummary {
    let n = metrics.len() as f64;
    let last = metrics.last().expect("at least one record");
    RunSummary {
        mean_abs_gap: metrics.iter().map(|m| m.r_gap.abs()).sum::<f64>() / n,
        mean_t: metrics.iter().map(|m| m.t_reward).sum::<f64>() / n,
        final_t: last.t_reward,
        final_gap: last.r_gap,
        convergence,
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Bi-CL desk-route runs at `c`, one per seed.
fn desk_runs(c: f64) -> std::result::Result<Vec<RunSummary>, String> {
    let env = desk_route();
    DESK_SEEDS
        .iter()
        .map(|&seed| {
            let r = train_bicl(&env, &desk_route_config(c, seed)).map_err(|e| e.to_string())?;
            Ok(summarize(&r.metrics, r.convergence_episode))
        })
        .collect()
}

fn criterion_penalty_trend(c0: &[RunSummary], c10: &[RunSummary]) -> Outcome {
    let gap0 = mean(c0.iter().map(|r| r.mean_abs_gap));
    let gap10 = mean(c10.iter().map(|r| r.mean_abs_gap));
    let t0 = mean(c0.iter().map(|r| r.mean_t));
    let t10 = mean(c10.iter().map(|r| r.mean_t));
    let detail = format!(
        "mean |R-Gap| c=0 {gap0:.4} vs c=10 {gap10:.4}; mean T-Reward c=0 {t0:.3} vs c=10 {t10:.3}; \
         final gap {:.4} vs {:.4}, final T {:.3} vs {:.3}",
        mean(c0.iter().map(|r| r.final_gap)),
        mean(c10.iter().map(|r| r.final_gap)),
        mean(c0.iter().map(|r| r.final_t)),
        mean(c10.iter().map(|r| r.final_t)),
    );
    ensure(gap10 < gap0 && t10 >= t0, || detail.clone())?;
    Ok(detail)
}

/// Wins of the bi-level learner: converged strictly earlier (never converging counts as last).
fn efficiency_line(
    name: &str,
    bicl: &[RunSummary],
    base: &[RunSummary],
) -> (bool, String) {
    let key = |c: Option<usize>| c.unwrap_or(usize::MAX);
    let wins = bicl
        .iter()
        .zip(base)
        .filter(|(b, f)| b.convergence.is_some() && key(b.convergence) < key(f.convergence))
        .count();
    let tb = mean(bicl.iter().map(|r| r.final_t));
    let tf = mean(base.iter().map(|r| r.final_t));
    let close = (tb - tf).abs() <= 0.1 * tb.abs().max(tf.abs());
    let conv: Vec<String> = bicl
        .iter()
        .zip(base)
        .map(|(b, f)| format!("{:?}/{:?}", b.convergence, f.convergence))
        .collect();
    (
        wins >= 4 && close,
        format!("{name}: earlier in {wins}/5 [{}], final T {tb:.2} vs {tf:.2}", conv.join(" ")),
    )
}

fn criterion_efficiency(desk_bicl: &[RunSummary]) -> Outcome {
    let route = desk_route();
    let base: Vec<RunSummary> = DESK_SEEDS
        .iter()
        .map(|&seed| {
            let r = train_full_action(&route, &desk_route_config(10.0, seed)).map_err(|e| e.to_string())?;
            Ok(summarize(&r.metrics, r.convergence_episode))
        })
        .collect::<std::result::Result<_, String>>()?;
    let mut lines = vec![efficiency_line("route", desk_bicl, &base)];
    for &g in &GRAPH_SEEDS {
        let env = sparse_graph(g);
        let mut bicl = Vec::new();
        let mut full = Vec::new();
        for seed in 1..=5u64 {
            let c = graph_config(seed);
            let r = train_bicl(&env, &c).map_err(|e| e.to_string())?;
            bicl.push(summarize(&r.metrics, r.convergence_episode));
            let r = train_full_action(&env, &c).map_err(|e| e.to_string())?;
            full.push(summarize(&r.metrics, r.convergence_episode));
        }
        lines.push(efficiency_line(&format!("graph {g}"), &bicl, &full));
    }
    let ok = lines.iter().all(|(ok, _)| *ok);
    let detail = lines.into_iter().map(|(_, l)| l).collect::<Vec<_>>().join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 6

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

fn route_examples() -> std::result::Result<(), String> {
    let adv = |center, radius, intensity| Adversary {
        center,
        radius,
        intensity,
    };
    let mut c = RouteEnvConfig::with_adversaries(3, vec![adv(10.0, 4.0, 2.0)]);
    c.start_positions = vec![1.0, 2.0, 3.0];
    let env = RouteEnv::new(c.clone()).unwrap();
    ensure(env.reset(5).positions == vec![1.0, 2.0, 3.0], || "reset without jitter".into())?;
    c.start_jitter = 1.0;
    let env = RouteEnv::new(c.clone()).unwrap();
    ensure(env.reset(5) == env.reset(5), || "jittered reset not deterministic".into())?;
    ensure(env.reset(5) != env.reset(6), || "jittered reset ignores the seed".into())?;

    let mut c = RouteEnvConfig::with_adversaries(1, vec![adv(10.0, 4.0, 2.0)]);
    c.v_max = 3.0;
    c.guard_beta = 0.6;
    let g = GuardAction::Adversary(0);
    ensure(close(guard_discount(3.0, g, 0, 10.0, &c), 1.0), || "discount at v_max".into())?;
    ensure(close(guard_discount(0.0, GuardAction::None, 0, 10.0, &c), 1.0), || "unguarded discount".into())?;
    ensure(close(guard_discount(0.0, g, 0, 10.0, &c), 0.4), || "discount 0.4 at rest".into())?;

    let a = adv(10.0, 4.0, 2.0);
    ensure(base_cost(10.0, &a) == 2.0, || "cost at the center".into())?;
    ensure(base_cost(14.0, &a) == 0.0 && base_cost(30.0, &a) == 0.0, || "cost outside".into())?;
    ensure(close(base_cost(12.0, &a), 1.0), || "cost at half radius".into())?;

    let mut c = RouteEnvConfig::with_adversaries(1, vec![adv(10.0, 4.0, 2.0)]);
    c.time_penalty = 0.1;
    let env = RouteEnv::new(c).unwrap();
    let out = env
        .step(&JointState::new(vec![30.0]), &MoveVector::new(vec![1.0]), &GuardVector::none(1))
        .unwrap();
    ensure(close(out.reward, -0.1) && !out.done, || format!("lone robot reward {}", out.reward))?;

    // both robots at distance 2 of an intensity-2 radius-4 adversary: base cost 1 each
    let mut c = RouteEnvConfig::with_adversaries(2, vec![adv(10.0, 4.0, 2.0)]);
    c.v_max = 3.0;
    c.guard_beta = 0.6;
    c.time_penalty = 0.1;
    let env = RouteEnv::new(c).unwrap();
    let s = JointState::new(vec![8.0, 12.0]);
    let y = GuardVector::new(vec![GuardAction::None, GuardAction::Adversary(0)]);
    let out = env.step(&s, &MoveVector::new(vec![0.0, 0.0]), &y).unwrap();
    ensure(close(out.reward, -0.8 - 0.1), || format!("guarded pair reward {}", out.reward))?;

    let mut c = RouteEnvConfig::with_adversaries(2, vec![]);
    c.time_penalty = 0.1;
    let env = RouteEnv::new(c).unwrap();
    let out = env
        .step(&JointState::new(vec![48.0, 49.0]), &MoveVector::new(vec![2.0, 1.0]), &GuardVector::none(2))
        .unwrap();
    ensure(out.done && close(out.reward, 100.0 - 0.1), || format!("arrival reward {}", out.reward))?;
    Ok(())
}

fn line_graph(robots: usize) -> GraphEnvConfig {
    GraphEnvConfig {
        n: robots,
        adjacency: vec![vec![1], vec![2], vec![3], vec![]],
        edge_cost: vec![
            EdgeCost { from: 0, to: 1, cost: 4.0 },
            EdgeCost { from: 1, to: 2, cost: 1.0 },
            EdgeCost { from: 2, to: 3, cost: 1.0 },
        ],
        guard_map: vec![vec![], vec![], vec![], vec![(0, 1)]],
        alpha_star: 0.5,
        time_penalty: 0.1,
        arrival_bonus: 100.0,
        horizon: 10,
        start_nodes: vec![0; robots],
        target_node: 3,
        random_start: false,
    }
}

fn graph_examples() -> std::result::Result<(), String> {
    let env = GraphEnv::new(line_graph(2)).unwrap();
    ensure(env.reset(3).positions == vec![0.0, 0.0], || "reset to start nodes".into())?;
    ensure(env.reset(3) == env.reset(3), || "reset not deterministic".into())?;
    let mut c = generate_graph(7, 3, Density::Sparse, 1).unwrap();
    c.random_start = true;
    let random = GraphEnv::new(c).unwrap();
    ensure((1..20).any(|k| random.reset(k) != random.reset(0)), || "random starts never differ".into())?;

    // legal moves: self loop only, a neighbor set, an absorbed robot
    let mut c = line_graph(1);
    c.adjacency = vec![vec![1], vec![2, 3], vec![3], vec![], vec![]];
    c.edge_cost.push(EdgeCost { from: 1, to: 3, cost: 1.0 });
    c.guard_map.push(vec![]);
    c.start_nodes = vec![0];
    let env = GraphEnv::new(c).unwrap();
    let sorted = |s: &JointState| {
        let mut v = env.legal_moves(s, 0);
        v.sort_unstable();
        v
    };
    ensure(sorted(&JointState::new(vec![4.0])) == vec![4], || "isolated node".into())?;
    ensure(sorted(&JointState::new(vec![1.0])) == vec![1, 2, 3], || "neighbor set".into())?;
    let mut arrived = JointState::new(vec![3.0]);
    arrived.arrived[0] = true;
    ensure(sorted(&arrived) == vec![3], || "arrived robot".into())?;

    let env = GraphEnv::new(line_graph(2)).unwrap();
    ensure(env.legal_guards(0) == vec![GuardAction::None], || "empty guard set".into())?;
    ensure(
        env.legal_guards(3) == vec![GuardAction::None, GuardAction::Edge(0, 1)],
        || "guard set of node 3".into(),
    )?;
    let mut bad = line_graph(1);
    bad.guard_map[3] = vec![(0, 2)];
    ensure(GraphEnv::new(bad).is_err(), || "guard of a missing edge accepted".into())?;

    let one = GraphEnv::new(line_graph(1)).unwrap();
    let r = one
        .reward(&JointState::new(vec![0.0]), &MoveVector::from_nodes(&[1]), &GuardVector::none(1))
        .unwrap();
    ensure(close(r, -4.1), || format!("single edge reward {r}"))?;

    // robot 1 traverses (0,1); the others sit on node 3 and may guard it
    let mut c = line_graph(3);
    c.start_nodes = vec![0, 3, 3];
    let env = GraphEnv::new(c).unwrap();
    let s = JointState::new(vec![0.0, 2.0, 2.0]);
    let x = MoveVector::from_nodes(&[1, 3, 3]);
    let edge = GuardAction::Edge(0, 1);
    let base = env.reward(&s, &x, &GuardVector::none(3)).unwrap();
    let one_guard = env.reward(&s, &x, &GuardVector::new(vec![GuardAction::None, edge, GuardAction::None])).unwrap();
    let two_guards = env.reward(&s, &x, &GuardVector::new(vec![GuardAction::None, edge, edge])).unwrap();
    ensure(close(one_guard - base, 2.0), || format!("single guard saves {}", one_guard - base))?;
    ensure(close(two_guards - base, 3.0), || format!("stacked guards save {}", two_guards - base))?;
    Ok(())
}

fn criterion_env_suite() -> Outcome {
    let start = Instant::now();
    route_examples().map_err(|e| format!("route example: {e}"))?;
    graph_examples().map_err(|e| format!("graph example: {e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xe4);
    for case in 0..10_000 {
        let env = random_route(&mut rng, 4);
        let (s, x) = random_route_state(&env, &mut rng);
        guard_never_harmful(&env, &s, &x, &mut rng).map_err(|e| format!("route case {case}: {e}"))?;
        transition_ignores_guards(&env, &s, &x, &mut rng).map_err(|e| format!("route case {case}: {e}"))?;

        let env = random_graph(&mut rng, 3);
        let (s, x) = random_graph_state(&env, &mut rng);
        guard_never_harmful(&env, &s, &x, &mut rng).map_err(|e| format!("graph case {case}: {e}"))?;
        transition_ignores_guards(&env, &s, &x, &mut rng).map_err(|e| format!("graph case {case}: {e}"))?;
    }
    within_budget("environment suite", start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "all examples exact; 2 properties x 2 envs x 10^4 cases in {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn guard_never_harmful<E: CoordinationEnv>(
    env: &E,
    s: &JointState,
    x: &MoveVector,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(), String> {
    let mut y = random_guards(env, s, x, rng);
    let k = rng.random_range(0..env.robots());
    y.guards[k] = GuardAction::None;
    let base = env.reward(s, x, &y).unwrap();
    for o in env.guard_options(s, x, k) {
        let mut g = y.clone();
        g.guards[k] = o.guard;
        let r = env.reward(s, x, &g).unwrap();
        ensure(r >= base - 1e-12, || format!("guard {:?} lowers reward {base} -> {r}", o.guard))?;
    }
    Ok(())
}

fn transition_ignores_guards<E: CoordinationEnv>(
    env: &E,
    s: &JointState,
    x: &MoveVector,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(), String> {
    let a = env.step(s, x, &random_guards(env, s, x, rng)).unwrap();
    let b = env.step(s, x, &random_guards(env, s, x, rng)).unwrap();
    ensure(a.state == b.state && a.done == b.done, || "next state depends on guards".into())
}

// ---------------------------------------------------------------- criterion 7

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut train = TrainConfig::new(Backend::RouteActorCritic);
    train.episodes = 120;
    train.batch = 32;
    train.warmup = 200;
    train.eval_every = 20;
    train.eval_rollouts = 10;
    train.learner.hidden = vec![32, 32];
    train.topology.k = Some(1);
    train.schedule = schedule(10.0, 120);
    let config = ExperimentConfig {
        label: "determinism".into(),
        output_dir: dir.path().join("unused"),
        route: Some(desk_route().config().clone()),
        graph: None,
        train,
    };
    let path = dir.path().join("config.json");
    config.write(&path).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_bicl"))
            .args(["train", "--config"])
            .arg(&path)
            .args(["--seed", "11", "--output"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("train exited with {}: {}", status.status, String::from_utf8_lossy(&status.stderr))
        })?;
        bytes.push(std::fs::read(out.join("metrics.csv")).map_err(|e| e.to_string())?);
    }
    let rows = String::from_utf8_lossy(&bytes[0]).lines().count().saturating_sub(1);
    ensure(rows > 0 && bytes[0] == bytes[1], || "metrics files differ".into())?;
    Ok(format!("two `bicl train` runs wrote identical metrics.csv ({} bytes, {rows} records)", bytes[0].len()))
}

// ---------------------------------------------------------------- criterion 8

/// Horizon-one graph with random starts, so every reachable state is a start.
fn one_step_graph() -> GraphEnv {
    let mut c = generate_graph(6, 3, Density::Dense, ONE_STEP_GRAPH).unwrap();
    c.horizon = 1;
    c.random_start = true;
    GraphEnv::new(c).unwrap()
}

/// Instance where roughly a third of the oracle decisions are real guards.
const ONE_STEP_GRAPH: u64 = 16;

fn oracle_transition<E: CoordinationEnv>(env: &E, bundle: &PolicyBundle, s: JointState) -> Transition {
    let x = bundle.greedy_moves(env, &s).unwrap();
    let options: Vec<_> = (0..env.robots()).map(|i| env.guard_options(&s, &x, i)).collect();
    let uniform: Vec<Vec<f64>> = options.iter().map(|o| vec![1.0 / o.len() as f64; o.len()]).collect();
    let (choice, _) = brute_force(env, &s, &x, &uniform, 0.0);
    let y_star = GuardVector::new(choice.iter().zip(&options).map(|(&c, o)| o[c].guard).collect());
    let out = env.step(&s, &x, &y_star).unwrap();
    Transition {
        s,
        x,
        y_star,
        reward: out.reward,
        s_next: out.state,
        done: out.done,
    }
}

fn criterion_imitation_consistency() -> Outcome {
    let env = one_step_graph();
    let nodes = env.config().nodes();
    let settings = LearnerSettings {
        il_lr: 1e-3,
        ..LearnerSettings::default()
    };
    let topology = build_topology(3, TopologyMode::Window, 3).map_err(|e| e.to_string())?;
    let mut bundle = PolicyBundle::new(&env, topology, &settings, 8).map_err(|e| e.to_string())?;

    // the move policy stays fixed, so the oracle is a function of the start state
    let table: Vec<Transition> = all_choices(&[nodes; 3])
        .into_iter()
        .map(|v| oracle_transition(&env, &bundle, JointState::new(v.iter().map(|&n| n as f64).collect())))
        .collect();
    let guarding = table
        .iter()
        .flat_map(|t| &t.y_star.guards)
        .filter(|g| **g != GuardAction::None)
        .count();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..2000 {
        let batch: Vec<&Transition> = (0..64).map(|_| &table[rng.random_range(0..table.len())]).collect();
        for i in 0..3 {
            il_update(&mut bundle, &env, i, &batch).map_err(|e| e.to_string())?;
        }
    }

    let (mut agree, mut agree_guarding) = (0, 0);
    for t in &table {
        for i in 0..3 {
            if bundle.greedy_guard(&env, &t.s, &t.x, i).map_err(|e| e.to_string())? == t.y_star.guards[i] {
                agree += 1;
                if t.y_star.guards[i] != GuardAction::None {
                    agree_guarding += 1;
                }
            }
        }
    }
    let agreement = agree as f64 / (3 * table.len()) as f64;
    let t = evaluate(&bundle, &env, 300, EvalMode::TReward, 3, 0.0).map_err(|e| e.to_string())?;
    let rl = evaluate(&bundle, &env, 300, EvalMode::RlReward, 3, 0.0).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} tabulated states, argmax agreement {:.1}% ({agree_guarding}/{guarding} on real guards), \
         T-Reward {t:.4} vs RL-Reward {rl:.4}",
        table.len(),
        100.0 * agreement
    );
    ensure(agreement >= 0.95 && (t - rl).abs() <= 0.01 * rl.abs(), || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- driver

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |n: u32| only.as_ref().map_or(true, |o| o.contains(&n));
    let mut failed = 0;
    let mut report = |n: u32, name: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {n}. {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {n}. {name}: {detail} ({secs:.1}s)");
            }
        }
    };

    let simple: [(u32, &str, fn() -> Outcome); 6] = [
        (1, "lower-level exactness", criterion_lower_exactness),
        (2, "gradient fidelity", criterion_gradient_fidelity),
        (3, "schedule exactness", criterion_schedule),
        (6, "environment unit suite", criterion_env_suite),
        (7, "determinism", criterion_determinism),
        (8, "imitation consistency", criterion_imitation_consistency),
    ];
    for (n, name, check) in simple {
        if wanted(n) {
            let start = Instant::now();
            report(n, name, start, check());
        }
    }

    if wanted(4) || wanted(5) {
        let start = Instant::now();
        let runs = desk_runs(10.0);
        if wanted(4) {
            let outcome = desk_runs(0.0).and_then(|c0| {
                let c10 = runs.as_ref().map_err(Clone::clone)?;
                criterion_penalty_trend(&c0, c10)
            });
            let outcome =
                outcome.and_then(|d| within_budget("trend runs", start.elapsed(), Duration::from_secs(30 * 60)).map(|_| d));
            report(4, "alignment-penalty trend", start, outcome);
        }
        if wanted(5) {
            let start5 = Instant::now();
            let outcome = runs.and_then(|c10| criterion_efficiency(&c10));
            report(5, "efficiency trend", start5, outcome);
        }
    }

    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        println!("all criteria passed");
        ExitCode::SUCCESS
    }
}
