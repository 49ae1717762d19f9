use std::hint::black_box;

use bicl_core::env::route::{Adversary, RouteEnvConfig};
use bicl_core::learners::{critic_update, il_update, LearnerSettings, Transition};
use bicl_core::nn::{Mlp, OutputActivation};
use bicl_core::*;
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn desk_route() -> RouteEnv {
    let adversaries = [3.0, 6.0, 9.0]
        .iter()
        .map(|&center| Adversary {
            center,
            radius: 3.0,
            intensity: 1.0,
        })
        .collect();
    let mut c = RouteEnvConfig::with_adversaries(3, adversaries);
    c.route_length = 12.0;
    c.target_position = 12.0;
    c.horizon = 20;
    c.start_positions = vec![4.0, 6.0, 8.0];
    RouteEnv::new(c).unwrap()
}

fn lower_level(c: &mut Criterion) {
    let env = desk_route();
    let s = env.reset(0);
    let x = MoveVector::new(vec![1.0, -0.5, 2.0]);
    let policies: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            let k = env.guard_options(&s, &x, i).len();
            vec![1.0 / k as f64; k]
        })
        .collect();
    c.bench_function("solve_y_star route n3 m3", |b| {
        b.iter(|| solve_with_env(&env, black_box(&s), black_box(&x), &policies, 1.0).unwrap())
    });
}

fn networks(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Mlp::new(&[10, 64, 64, 4], OutputActivation::Softmax, &mut rng).unwrap();
    let input: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
    c.bench_function("mlp forward 10-64-64-4", |b| b.iter(|| net.forward(black_box(&input)).unwrap()));
    let mut grads = net.zero_grads();
    c.bench_function("mlp trace+backward 10-64-64-4", |b| {
        b.iter(|| {
            let trace = net.trace(black_box(&input), None).unwrap();
            net.backward(&trace, &[0.1, -0.2, 0.05, 0.05], &mut grads).unwrap()
        })
    });
}

fn environment(c: &mut Criterion) {
    let env = desk_route();
    let s = env.reset(0);
    let x = MoveVector::new(vec![1.0, -0.5, 2.0]);
    let y = GuardVector::new(vec![GuardAction::Adversary(0), GuardAction::None, GuardAction::Adversary(2)]);
    c.bench_function("route step n3 m3", |b| b.iter(|| env.step(black_box(&s), black_box(&x), &y).unwrap()));
}

fn updates(c: &mut Criterion) {
    let env = desk_route();
    let topology = build_topology(3, TopologyMode::Window, 1).unwrap();
    let mut bundle = PolicyBundle::new(&env, topology, &LearnerSettings::default(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let batch: Vec<Transition> = (0..32)
        .map(|_| {
            let s = env.reset(0);
            let x = bundle.explore_moves(&env, &s, 0.5, &mut rng).unwrap();
            let out = env.step(&s, &x, &GuardVector::none(3)).unwrap();
            Transition {
                s,
                x,
                y_star: GuardVector::none(3),
                reward: out.reward,
                s_next: out.state,
                done: out.done,
            }
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    c.bench_function("critic update batch 32", |b| {
        b.iter(|| critic_update(&mut bundle, &refs, 0.99, 0.01).unwrap())
    });
    c.bench_function("imitation update batch 32", |b| b.iter(|| il_update(&mut bundle, &env, 0, &refs).unwrap()));
}

criterion_group!(benches, lower_level, networks, environment, updates);
criterion_main!(benches);
