//! Acceptance suite. Each test checks one release criterion at a pinned
//! tolerance and prints a PASS line (visible with `--nocapture`):
//!
//!  1. reward matches an independent straight-line oracle (1e-9)
//!  2. analytic anchors for overload cost and channel latency
//!  3. exact task conservation over 50 random configs x 1000 steps
//!  4. byte-identical CSV from repeated sweeps
//!  5. Poisson arrival fidelity within 3 standard errors
//!  6. dropped tasks non-decreasing in lambda (one 1-SE slip allowed)
//!  7. generated and dropped non-decreasing in cluster count (same slack)
//!  8. tabular learner beats Random on reward and response time
//!  9. a wire session reproduces in-process metrics exactly
//! 10. q_update's greedy policy matches value iteration on a toy MDP

use edgesim_cli::{
    evaluate, run_cell, scripted_local_session, serve, sweep_csv, train_q, SweepAxis, SweepSpec,
};
use edgesim_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::net::TcpListener;
use std::time::Instant;

// ---------------------------------------------------------------- helpers

fn cluster_base(horizon: u64) -> ConfigFile {
    let mut file = ConfigFile::default();
    file.horizon = Some(horizon);
    file.topology.mode = Some("clusters".to_string());
    file
}

/// Non-decreasing check with the pinned tolerance: at most one adjacent
/// inversion, and that inversion no deeper than one pooled standard error
/// of the two cell means.
fn assert_trend_non_decreasing(label: &str, means: &[f64], stds: &[f64], episodes: usize) {
    let n = episodes as f64;
    let mut violations = 0;
    for i in 0..means.len() - 1 {
        if means[i + 1] < means[i] {
            violations += 1;
            let pooled_se = ((stds[i] * stds[i] + stds[i + 1] * stds[i + 1]) / n).sqrt();
            let depth = means[i] - means[i + 1];
            assert!(
                depth <= pooled_se,
                "{label}: inversion at index {i} too deep: {depth} > pooled SE {pooled_se} (means {means:?})"
            );
        }
    }
    assert!(
        violations <= 1,
        "{label}: {violations} adjacent inversions (means {means:?})"
    );
}

/// Straight-line transcription of the reward formulas, kept free of any
/// simulator code paths.
fn oracle_reward(s: &ActionSnapshot, w: &RewardWeights, mean_cycles: f64, shaping: f64) -> f64 {
    let local = s.agent == s.target;
    let mut t_wait = s.queue_agent as f64 / s.rate_agent as f64;
    if !local {
        t_wait += s.queue_target as f64 / s.rate_target as f64;
    }
    let t_comm = if local {
        0.0
    } else {
        let snr = 10f64.powf((s.power_dbm + s.gain_db - s.noise_dbm) / 10.0);
        s.alpha_out_bits as f64 / (s.bandwidth_hz * (1.0 + snr).log2())
    };
    let cycles = (s.rho * s.xi) as f64;
    let t_exc = cycles / s.rate_target as f64 - cycles / s.rate_agent as f64;
    let d = w.chi_wait * t_wait + w.chi_comm * t_comm + w.chi_exc * t_exc;

    let q = s.queue_target as f64;
    let cap = s.cap_target as f64;
    let _expected_queue = ((q - s.rate_target as f64 / mean_cycles).max(0.0) + 1.0).min(cap);
    let p = ((cap - q) / cap).max(0.0).clamp(w.p_floor, 1.0);
    let o = -p.ln() / 3.0;

    w.r_u - (d + w.chi_overload * o) + shaping
}

// --------------------------------------------------------------- criteria

#[test]
fn criterion_01_reward_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE97);
    let weights = RewardWeights::default();
    let mut worst = 0.0f64;
    for case in 0..100 {
        let local = rng.random_range(0..4) == 0;
        let snapshot = ActionSnapshot {
            agent: 0,
            target: if local { 0 } else { 1 },
            task_id: case,
            rho: rng.random_range(1_000_000..200_000_000),
            xi: rng.random_range(1..4),
            alpha_out_bits: rng.random_range(1_000_000..2_000_000_000),
            queue_agent: rng.random_range(0..40),
            rate_agent: rng.random_range(5_000_000..200_000_000),
            queue_target: rng.random_range(0..40),
            rate_target: rng.random_range(5_000_000..200_000_000),
            cap_target: rng.random_range(1..120),
            bandwidth_hz: rng.random_range(100_000.0..10_000_000.0),
            power_dbm: rng.random_range(-10.0..30.0),
            gain_db: rng.random_range(-90.0..0.0),
            noise_dbm: rng.random_range(-110.0..-60.0),
        };
        let shaping = rng.random_range(-3.0..3.0);
        let mean_cycles = rng.random_range(1_000_000.0..200_000_000.0);
        let got = compute_reward(&snapshot, &weights, mean_cycles, shaping).unwrap();
        let expected = oracle_reward(&snapshot, &weights, mean_cycles, shaping);
        worst = worst.max((got.total - expected).abs());
        assert!(
            (got.total - expected).abs() <= 1e-9,
            "case {case}: {} vs oracle {expected}",
            got.total
        );
        let identity =
            got.r_u - (got.delay.weighted + weights.chi_overload * got.overload.cost) + got.shaping;
        assert_eq!(got.total, identity);
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "runtime {elapsed:?} exceeds 1 s"
    );
    println!("PASS criterion 1: reward oracle equivalence over 100 cases (worst |diff| {worst:.3e}, {elapsed:?})");
}

#[test]
fn criterion_02_analytic_anchors() {
    let empty = compute_overload(0, 0, 20, 40_000_000, 8e7, 1e-6).unwrap();
    assert_eq!(empty.cost, 0.0, "O(Q=0) must be exactly 0");

    let full = compute_overload(0, 20, 20, 40_000_000, 8e7, 1e-6).unwrap();
    assert!(
        (full.cost - 4.605170185988091).abs() <= 1e-12,
        "O(Q=cap) = {} but expected -ln(1e-6)/3",
        full.cost
    );

    // 0 dB SNR at 1 Hz bandwidth: rate = log2(2) = 1 bit per step.
    for bits in [1.0, 8.0, 1234.0, 9.75e6] {
        let t = transmission_time(bits, 1.0, -30.0, 0.0, -30.0).unwrap();
        assert_eq!(
            t, bits,
            "payload of {bits} bits must take exactly {bits} steps"
        );
    }
    println!("PASS criterion 2: analytic anchors (O(0)=0, O(full)=4.605170185988091, unit-rate latency exact)");
}

#[test]
fn criterion_03_conservation_over_random_configs() {
    let start = Instant::now();
    let mut seeder = ChaCha8Rng::seed_from_u64(0xC0457);
    let mut steps_checked = 0u64;
    for case in 0..50 {
        let config = if case % 5 == 4 {
            // Every fifth case uses a cluster plan.
            let plan = ClusterPlan {
                n_clusters: seeder.random_range(1..3),
                sbc_pairs_per_cluster: seeder.random_range(1..4),
                base_station_nodes: seeder.random_range(1..4),
                shared_server: seeder.random_range(0..2) == 0,
                ..ClusterPlan::default()
            };
            let topology = generate_cluster_topology(&plan);
            let max_neighbors = topology.max_degree();
            SimConfig {
                topology,
                channel: ChannelParams::default(),
                reward: RewardWeights::default(),
                lambda: seeder.random_range(0.0..0.6),
                task_template: TaskTemplate::default(),
                horizon: 1000,
                seed: seeder.random(),
                max_neighbors,
                shaping: ShapingKind::None,
            }
        } else {
            let tiers: Vec<TierSpec> = (0..seeder.random_range(1..4usize))
                .map(|_| TierSpec {
                    nodes: seeder.random_range(1..5),
                    num_cores: seeder.random_range(1..3),
                    frequency: seeder.random_range(5_000_000..80_000_000),
                    queue_capacity: seeder.random_range(1..15),
                })
                .collect();
            let topology = generate_tiered_topology(&tiers, 20.0);
            let max_neighbors = topology.max_degree();
            SimConfig {
                topology,
                channel: ChannelParams {
                    default_bandwidth_hz: 2e6,
                    noise_dbm: -90.0,
                    gain_model: GainModel::Constant { gain_db: -30.0 },
                },
                reward: RewardWeights::default(),
                lambda: seeder.random_range(0.0..0.6),
                task_template: TaskTemplate::parametric(TaskFields::constant(
                    seeder.random_range(10_000_000..120_000_000),
                    seeder.random_range(1_000_000..50_000_000),
                    seeder.random_range(1_000_000..50_000_000),
                    seeder.random_range(1..3),
                    seeder.random_range(20..150),
                )),
                horizon: 1000,
                seed: seeder.random(),
                max_neighbors,
                shaping: ShapingKind::None,
            }
        };
        assert!(
            validate_config(&config).is_empty(),
            "case {case} generated an invalid config"
        );

        let mut env = Environment::new(config.clone()).unwrap();
        let mut policies: BTreeMap<NodeId, Box<dyn Policy>> = env
            .agents()
            .iter()
            .map(|&a| {
                (
                    a,
                    PolicyKind::Random.build(derive_seed(config.seed, a as u64)),
                )
            })
            .collect();
        let mut obs = env.reset(None);
        loop {
            let actions: BTreeMap<NodeId, usize> = policies
                .iter_mut()
                .map(|(&a, p)| (a, p.act(&obs[&a])))
                .collect();
            let step = env.step(&actions).unwrap();
            env.state()
                .conservation_check()
                .unwrap_or_else(|e| panic!("case {case}: {e}"));
            steps_checked += 1;
            obs = step.observations;
            if step.done {
                break;
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "runtime {elapsed:?} exceeds 30 s"
    );
    println!("PASS criterion 3: exact conservation across 50 random configs ({steps_checked} steps checked, {elapsed:?})");
}

#[test]
fn criterion_04_sweep_determinism() {
    let spec = SweepSpec {
        axis: SweepAxis::Lambda,
        values: vec![0.1, 0.3],
        policies: vec![PolicyKind::Local, PolicyKind::Random],
        episodes: 4,
        base: cluster_base(1000),
        base_dir: None,
        base_seed: 77,
    };
    let first = sweep_csv(&spec).unwrap();
    let second = sweep_csv(&spec).unwrap();
    assert_eq!(
        first.as_bytes(),
        second.as_bytes(),
        "repeated sweeps must be byte-identical"
    );
    assert!(first.starts_with(CSV_HEADER));
    assert_eq!(first.lines().count(), 1 + 4);
    println!(
        "PASS criterion 4: byte-identical CSV over repeated sweep runs ({} bytes)",
        first.len()
    );
}

#[test]
fn criterion_05_poisson_fidelity() {
    let template = TaskTemplate::default();
    for (i, lambda) in [0.05, 0.17, 0.5].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let mut next_id = 0;
        let steps = 100_000u64;
        let mut total = 0u64;
        for now in 0..steps {
            total +=
                sample_arrivals(&template, lambda, &mut rng, &mut next_id, 0, now).len() as u64;
        }
        let mean = total as f64 / steps as f64;
        let tol = 3.0 * (lambda / steps as f64).sqrt();
        assert!(
            (mean - lambda).abs() <= tol,
            "lambda {lambda}: empirical mean {mean} outside {lambda} +- {tol}"
        );
        println!(
            "PASS criterion 5 (lambda={lambda}): empirical mean {mean:.5} within 3 SE ({tol:.5})"
        );
    }
}

#[test]
fn criterion_06_rq1_dropped_tasks_rise_with_lambda() {
    let start = Instant::now();
    let episodes = 30;
    let spec = SweepSpec {
        axis: SweepAxis::Lambda,
        values: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
        policies: vec![PolicyKind::Random],
        episodes,
        base: cluster_base(1000),
        base_dir: None,
        base_seed: 7,
    };
    let rows = edgesim_cli::run_sweep(&spec).unwrap();
    let means: Vec<f64> = rows.iter().map(|r| r.summary.dropped_mean).collect();
    let stds: Vec<f64> = rows.iter().map(|r| r.summary.dropped_std).collect();
    assert_trend_non_decreasing("dropped vs lambda", &means, &stds, episodes);
    assert!(
        *means.last().unwrap() > means[0],
        "drops must actually grow across the sweep: {means:?}"
    );
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "runtime {elapsed:?} exceeds 5 min"
    );
    println!("PASS criterion 6: dropped tasks non-decreasing over lambda {means:?} ({elapsed:?})");
}

#[test]
fn criterion_07_rq2_load_rises_with_clusters() {
    let start = Instant::now();
    let episodes = 30;
    let spec = SweepSpec {
        axis: SweepAxis::Clusters,
        values: vec![1.0, 2.0, 3.0, 4.0],
        policies: vec![PolicyKind::Random],
        episodes,
        base: cluster_base(1000),
        base_dir: None,
        base_seed: 7,
    };
    let rows = edgesim_cli::run_sweep(&spec).unwrap();
    let generated: Vec<f64> = rows.iter().map(|r| r.summary.generated_mean).collect();
    let gen_stds: Vec<f64> = vec![0.0; generated.len()];
    let dropped: Vec<f64> = rows.iter().map(|r| r.summary.dropped_mean).collect();
    let drop_stds: Vec<f64> = rows.iter().map(|r| r.summary.dropped_std).collect();
    assert_trend_non_decreasing("generated vs clusters", &generated, &gen_stds, episodes);
    assert_trend_non_decreasing("dropped vs clusters", &dropped, &drop_stds, episodes);
    assert!(*generated.last().unwrap() > generated[0] * 2.0);
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "runtime {elapsed:?} exceeds 5 min"
    );
    println!(
        "PASS criterion 7: generated {generated:?} and dropped {dropped:?} non-decreasing over clusters ({elapsed:?})"
    );
}

/// Fixed 3-node world for the learning check: a capable client flanked by
/// two slow, single-slot workers. Offloading is almost always a mistake,
/// so the learner must discover local processing.
fn learning_config() -> SimConfig {
    let nodes = vec![
        NodeSpec {
            id: 0,
            tier: 1,
            num_cores: 1,
            frequency: 40_000_000,
            queue_capacity: 20,
            transmit_power_dbm: 20.0,
            position: (0.0, 0.0),
            is_client: true,
            has_controller: true,
        },
        NodeSpec {
            id: 1,
            tier: 2,
            num_cores: 1,
            frequency: 10_000_000,
            queue_capacity: 1,
            transmit_power_dbm: 20.0,
            position: (50.0, 0.0),
            is_client: false,
            has_controller: false,
        },
        NodeSpec {
            id: 2,
            tier: 2,
            num_cores: 1,
            frequency: 10_000_000,
            queue_capacity: 1,
            transmit_power_dbm: 20.0,
            position: (0.0, 50.0),
            is_client: false,
            has_controller: false,
        },
    ];
    let mut topology = Topology::new(nodes);
    topology.add_edge(0, 1);
    topology.add_edge(0, 2);
    SimConfig {
        topology,
        channel: ChannelParams::default(),
        reward: RewardWeights::default(),
        lambda: 0.17,
        task_template: TaskTemplate::default(),
        horizon: 1000,
        seed: 99,
        max_neighbors: 2,
        shaping: ShapingKind::None,
    }
}

#[test]
fn criterion_08_tabular_learner_beats_random() {
    let start = Instant::now();
    let config = learning_config();
    let params = QLearnerParams::default();
    let eval_episodes = 100;
    let eval_seed = 5000;

    let trained = train_q(&config, 300, &params, 0).unwrap();

    // Learning progress along the way: the last 50 training episodes must
    // not be worse than the first 50.
    let first50: f64 = trained.curve[..50]
        .iter()
        .map(|p| p.mean_reward)
        .sum::<f64>()
        / 50.0;
    let last50: f64 = trained.curve[250..]
        .iter()
        .map(|p| p.mean_reward)
        .sum::<f64>()
        / 50.0;
    assert!(
        last50 >= first50,
        "no learning progress: first-50 mean {first50}, last-50 mean {last50}"
    );

    let q_batch = evaluate(
        &config,
        &trained.tables,
        eval_episodes,
        &params,
        params.epsilon_end,
        eval_seed,
    )
    .unwrap();
    let random_batch = run_cell(&config, &PolicyKind::Random, eval_episodes, eval_seed).unwrap();
    let local_batch = run_cell(&config, &PolicyKind::Local, eval_episodes, eval_seed).unwrap();

    let q = summarize(&q_batch).unwrap();
    let random = summarize(&random_batch).unwrap();
    let local = summarize(&local_batch).unwrap();

    let gap = (local.reward_mean - random.reward_mean).abs();
    let required = random.reward_mean + 0.1 * gap;
    assert!(
        q.reward_mean >= required,
        "learner reward {} below required {} (random {}, local {})",
        q.reward_mean,
        required,
        random.reward_mean,
        local.reward_mean
    );

    let q_resp = q.resp_mean.expect("learner completes tasks");
    let random_resp = random.resp_mean.expect("random completes tasks");
    assert!(
        q_resp <= random_resp,
        "learner response {q_resp} worse than random {random_resp}"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 600.0,
        "runtime {elapsed:?} exceeds 10 min"
    );
    println!(
        "PASS criterion 8: learner reward {:.1} vs random {:.1} (local {:.1}, needs >= {:.1}); response {:.2} <= {:.2} ({elapsed:?})",
        q.reward_mean, random.reward_mean, local.reward_mean, required, q_resp, random_resp
    );
}

#[test]
fn criterion_09_bridge_equivalence() {
    let mut file = ConfigFile::default();
    file.horizon = Some(200);
    file.lambda = Some(0.3);
    file.seed = Some(31);
    file.topology.nodes_per_tier = Some(vec![2, 2, 1]);
    let config = file.build(None).unwrap();

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let server_config = config.clone();
    std::thread::spawn(move || serve(listener, server_config));

    let wire = scripted_local_session(&addr, None).unwrap().to_metrics();
    let in_process = run_episode(&config, &PolicyKind::Local).unwrap();
    assert_eq!(
        wire, in_process,
        "wire session must reproduce in-process metrics exactly"
    );
    assert!(
        wire.generated > 0,
        "the comparison must cover a non-trivial episode"
    );
    println!(
        "PASS criterion 9: scripted wire session equals in-process run (generated {}, completed {})",
        wire.generated, wire.completed
    );
}

#[test]
fn criterion_10_value_iteration_oracle() {
    // Deterministic 2-state, 2-action MDP: action 0 stays (rewards 1 at
    // s0, 2 at s1), action 1 switches states for free.
    let gamma = 0.9;
    let reward = |s: usize, a: usize| [[1.0, 0.0], [2.0, 0.0]][s][a];
    let next = |s: usize, a: usize| if a == 0 { s } else { 1 - s };

    let mut v = [0.0f64; 2];
    for _ in 0..10_000 {
        v = [
            (reward(0, 0) + gamma * v[next(0, 0)]).max(reward(0, 1) + gamma * v[next(0, 1)]),
            (reward(1, 0) + gamma * v[next(1, 0)]).max(reward(1, 1) + gamma * v[next(1, 1)]),
        ];
    }
    let optimal: Vec<usize> = (0..2)
        .map(|s| {
            if reward(s, 0) + gamma * v[next(s, 0)] >= reward(s, 1) + gamma * v[next(s, 1)] {
                0
            } else {
                1
            }
        })
        .collect();

    let mut table = QTable::new();
    let params = QLearnerParams {
        alpha: 0.5,
        gamma,
        ..QLearnerParams::default()
    };
    let keys = ["s0", "s1"];
    for _ in 0..10_000 {
        for s in 0..2 {
            for a in 0..2 {
                table
                    .q_update(keys[s], a, reward(s, a), keys[next(s, a)], &params)
                    .unwrap();
            }
        }
    }
    let learned: Vec<usize> = keys
        .iter()
        .map(|k| table.best_action(k, &[true, true]))
        .collect();
    assert_eq!(
        learned, optimal,
        "greedy policy must match the value-iteration optimum exactly"
    );
    println!(
        "PASS criterion 10: greedy policy {learned:?} matches value iteration optimum {optimal:?}"
    );
}
