//! Property tests: conservation, queue bounds, determinism, mask respect,
//! and the reward decomposition identity over randomized inputs.

use edgesim_core::*;
use proptest::prelude::*;
use std::collections::BTreeMap;

fn small_config(
    tier_sizes: Vec<usize>,
    lambda: f64,
    seed: u64,
    cap: usize,
    horizon: u64,
) -> SimConfig {
    let tiers: Vec<TierSpec> = tier_sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| TierSpec {
            nodes: n,
            num_cores: 1 + k as u32,
            frequency: 20_000_000 * (k as u64 + 1),
            queue_capacity: cap,
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
        lambda,
        task_template: TaskTemplate::parametric(TaskFields::constant(
            40_000_000, 10_000_000, 10_000_000, 1, 40,
        )),
        horizon,
        seed,
        max_neighbors,
        shaping: ShapingKind::None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conservation_and_queue_bounds_hold_every_step(
        t1 in 1usize..4,
        t2 in 1usize..4,
        t3 in 1usize..3,
        lambda in 0.0f64..0.6,
        seed in 0u64..1000,
        cap in 1usize..6,
    ) {
        let config = small_config(vec![t1, t2, t3], lambda, seed, cap, 30);
        prop_assert!(validate_config(&config).is_empty());
        let mut env = Environment::new(config.clone()).unwrap();
        let mut policies: BTreeMap<NodeId, Box<dyn Policy>> = env
            .agents()
            .iter()
            .map(|&a| (a, PolicyKind::Random.build(derive_seed(seed, a as u64))))
            .collect();
        let mut obs = env.reset(None);
        loop {
            let actions: BTreeMap<NodeId, usize> = policies
                .iter_mut()
                .map(|(&a, p)| (a, p.act(&obs[&a])))
                .collect();
            let step = env.step(&actions).unwrap();
            env.state().conservation_check().map_err(|e| TestCaseError::fail(e))?;
            for node in &config.topology.nodes {
                prop_assert!(env.state().queue_len(node.id) <= node.queue_capacity);
            }
            obs = step.observations;
            if step.done {
                break;
            }
        }
        env.metrics().conservation_check().map_err(|e| TestCaseError::fail(e))?;
    }

    #[test]
    fn identical_seeds_replay_identically(
        lambda in 0.05f64..0.5,
        seed in 0u64..500,
    ) {
        let config = small_config(vec![2, 2, 1], lambda, seed, 4, 40);
        let a = run_episode(&config, &PolicyKind::Random).unwrap();
        let b = run_episode(&config, &PolicyKind::Random).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn policies_never_emit_masked_indices(
        queues in proptest::collection::vec(0.0f64..10.0, 1..6),
        padded in 0usize..4,
        seed in 0u64..100,
    ) {
        let mut values = Vec::new();
        let mut mask = Vec::new();
        for (i, &q) in queues.iter().enumerate() {
            values.extend_from_slice(&[i as f64, 1.0, q, 10.0, 4e7, 0.0, 0.0, 2e6, 20.0]);
            mask.push(true);
        }
        for _ in 0..padded {
            values.extend(std::iter::repeat(-1.0).take(9));
            mask.push(false);
        }
        values.push(1.0);
        let obs = Observation { values, mask: mask.clone() };
        for kind in [PolicyKind::Local, PolicyKind::Random, PolicyKind::LeastQueue] {
            let mut policy = kind.build(seed);
            for _ in 0..30 {
                let action = policy.act(&obs);
                prop_assert!(mask[action], "policy {:?} emitted masked index {action}", kind.name());
            }
        }
    }

    #[test]
    fn reward_decomposition_identity_on_random_snapshots(
        queue_agent in 0usize..30,
        queue_target in 0usize..30,
        cap_target in 1usize..40,
        rate_agent in 1u64..200_000_000,
        rate_target in 1u64..200_000_000,
        rho in 1u64..100_000_000,
        alpha_out in 1u64..2_000_000_000,
        shaping in -5.0f64..5.0,
        local in proptest::bool::ANY,
    ) {
        let snapshot = ActionSnapshot {
            agent: 0,
            target: if local { 0 } else { 1 },
            task_id: 0,
            rho,
            xi: 1,
            alpha_out_bits: alpha_out,
            queue_agent,
            rate_agent,
            queue_target,
            rate_target,
            cap_target,
            bandwidth_hz: 2e6,
            power_dbm: 20.0,
            gain_db: -30.0,
            noise_dbm: -90.0,
        };
        let weights = RewardWeights::default();
        let b = compute_reward(&snapshot, &weights, 8e7, shaping).unwrap();
        let reassembled = b.r_u - (b.delay.weighted + weights.chi_overload * b.overload.cost) + b.shaping;
        prop_assert_eq!(b.total, reassembled);
        // p stays clamped and the cost stays finite and non-negative.
        prop_assert!(b.overload.p >= weights.p_floor && b.overload.p <= 1.0);
        prop_assert!(b.overload.cost.is_finite() && b.overload.cost >= 0.0);
    }

    #[test]
    fn transmission_time_scales_in_bits(
        bits in 1.0f64..1e9,
        k in 1.0f64..20.0,
        snr_power in -20.0f64..40.0,
    ) {
        let one = transmission_time(bits, 2e6, snr_power, -30.0, -90.0).unwrap();
        let scaled = transmission_time(k * bits, 2e6, snr_power, -30.0, -90.0).unwrap();
        prop_assert!((scaled - k * one).abs() <= 1e-9 * scaled.abs().max(1.0));
    }
}

#[test]
fn fifo_on_a_single_node_matches_arrival_order() {
    // A one-node world that never offloads completes tasks in the order
    // they arrived.
    let nodes = vec![NodeSpec {
        id: 0,
        tier: 1,
        num_cores: 1,
        frequency: 40_000_000,
        queue_capacity: 50,
        transmit_power_dbm: 20.0,
        position: (0.0, 0.0),
        is_client: true,
        has_controller: true,
    }];
    let topology = Topology::new(nodes);
    let config = SimConfig {
        topology,
        channel: ChannelParams::default(),
        reward: RewardWeights::default(),
        lambda: 0.8,
        task_template: TaskTemplate::parametric(TaskFields::constant(
            30_000_000, 1_000_000, 1_000_000, 1, 200,
        )),
        horizon: 120,
        seed: 42,
        max_neighbors: 0,
        shaping: ShapingKind::None,
    };
    let mut env = Environment::new(config).unwrap();
    env.reset(None);
    let mut completed = Vec::new();
    loop {
        let actions: BTreeMap<NodeId, usize> = [(0, 0)].into();
        let step = env.step(&actions).unwrap();
        completed.extend(step.info.completed.iter().map(|r| r.task_id));
        if step.done {
            break;
        }
    }
    assert!(completed.len() > 10, "expected plenty of completions");
    let mut sorted = completed.clone();
    sorted.sort_unstable();
    assert_eq!(
        completed, sorted,
        "completion order must match arrival order"
    );
}
