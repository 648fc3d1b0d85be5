use criterion::{criterion_group, criterion_main, Criterion};
use edgesim_bench::{busy_cluster_config, four_cluster_plan, tiered_config};
use edgesim_core::*;
use std::collections::BTreeMap;
use std::hint::black_box;

fn bench_advance_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("episode");
    for (name, config) in [
        ("tiered_30n", tiered_config()),
        ("clusters_2x_busy", busy_cluster_config()),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| {
                let mut cfg = config.clone();
                cfg.horizon = 200;
                run_episode(black_box(&cfg), &PolicyKind::Random).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_reward(c: &mut Criterion) {
    let snapshot = ActionSnapshot {
        agent: 0,
        target: 1,
        task_id: 0,
        rho: 80_000_000,
        xi: 1,
        alpha_out_bits: 1_200_000_000,
        queue_agent: 3,
        rate_agent: 40_000_000,
        queue_target: 7,
        rate_target: 160_000_000,
        cap_target: 10,
        bandwidth_hz: 2e6,
        power_dbm: 20.0,
        gain_db: -30.0,
        noise_dbm: -90.0,
    };
    let weights = RewardWeights::default();
    c.bench_function("compute_reward", |b| {
        b.iter(|| compute_reward(black_box(&snapshot), &weights, 8e7, 0.0).unwrap())
    });
    c.bench_function("transmission_time", |b| {
        b.iter(|| transmission_time(black_box(1.2e9), 2e6, 20.0, -30.0, -90.0).unwrap())
    });
}

fn bench_observation(c: &mut Criterion) {
    let config = tiered_config();
    let mut env = Environment::new(config).unwrap();
    env.reset(None);
    let actions: BTreeMap<NodeId, usize> = env.agents().iter().map(|&a| (a, 0)).collect();
    env.step(&actions).unwrap();
    c.bench_function("encode_observation", |b| {
        b.iter(|| encode_observation(black_box(env.state()), 0, 10))
    });
}

fn bench_topology(c: &mut Criterion) {
    let plan = four_cluster_plan();
    c.bench_function("generate_cluster_topology_4x", |b| {
        b.iter(|| generate_cluster_topology(black_box(&plan)))
    });
}

criterion_group!(
    benches,
    bench_advance_step,
    bench_reward,
    bench_observation,
    bench_topology
);
criterion_main!(benches);
