//! Tabular Q-learning driver: per-agent tables, epsilon schedule over
//! episodes, and greedy evaluation.

use anyhow::{bail, Result};
use edgesim_core::{
    derive_seed, discretize, epsilon_greedy, Environment, EpisodeMetrics, NodeId, QLearnerParams,
    QTable, SimConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// One point of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub epsilon: f64,
    /// Mean cumulative reward across agents for this episode.
    pub mean_reward: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub tables: BTreeMap<NodeId, QTable>,
    pub curve: Vec<CurvePoint>,
}

/// Trains one independent learner per controller for `episodes` episodes,
/// seeds laddered from `base_seed`.
pub fn train_q(
    config: &SimConfig,
    episodes: usize,
    params: &QLearnerParams,
    base_seed: u64,
) -> Result<TrainOutcome> {
    if episodes == 0 {
        bail!("training needs at least one episode");
    }
    let mut env = Environment::new(config.clone())?;
    let agents: Vec<NodeId> = env.agents().to_vec();
    let mut tables: BTreeMap<NodeId, QTable> = agents.iter().map(|&a| (a, QTable::new())).collect();
    let mut curve = Vec::with_capacity(episodes);

    for episode in 0..episodes {
        let seed = base_seed + episode as u64;
        let epsilon = params.epsilon_at(episode);
        let mut rngs: BTreeMap<NodeId, ChaCha8Rng> = agents
            .iter()
            .map(|&a| (a, ChaCha8Rng::seed_from_u64(derive_seed(seed, a as u64))))
            .collect();
        let mut observations = env.reset(Some(seed));
        let mut keys: BTreeMap<NodeId, String> = agents
            .iter()
            .map(|&a| (a, discretize(&observations[&a], params.buckets)))
            .collect();

        loop {
            let actions: BTreeMap<NodeId, usize> = agents
                .iter()
                .map(|&a| {
                    let action = epsilon_greedy(
                        &tables[&a],
                        &keys[&a],
                        &observations[&a].mask,
                        epsilon,
                        rngs.get_mut(&a).unwrap(),
                    );
                    (a, action)
                })
                .collect();
            let step = env.step(&actions)?;
            for &a in &agents {
                let next_key = discretize(&step.observations[&a], params.buckets);
                tables.get_mut(&a).unwrap().q_update(
                    &keys[&a],
                    actions[&a],
                    step.rewards[&a],
                    &next_key,
                    params,
                )?;
                keys.insert(a, next_key);
            }
            observations = step.observations;
            if step.done {
                break;
            }
        }
        curve.push(CurvePoint {
            episode,
            epsilon,
            mean_reward: env.metrics().mean_agent_reward(),
        });
    }

    Ok(TrainOutcome { tables, curve })
}

/// Greedy evaluation (epsilon = `epsilon`, normally the schedule's end
/// value) of trained tables over fresh episodes.
pub fn evaluate(
    config: &SimConfig,
    tables: &BTreeMap<NodeId, QTable>,
    episodes: usize,
    params: &QLearnerParams,
    epsilon: f64,
    base_seed: u64,
) -> Result<Vec<EpisodeMetrics>> {
    let mut env = Environment::new(config.clone())?;
    let agents: Vec<NodeId> = env.agents().to_vec();
    let mut batch = Vec::with_capacity(episodes);

    for episode in 0..episodes {
        let seed = base_seed + episode as u64;
        let mut rngs: BTreeMap<NodeId, ChaCha8Rng> = agents
            .iter()
            .map(|&a| (a, ChaCha8Rng::seed_from_u64(derive_seed(seed, a as u64))))
            .collect();
        let mut observations = env.reset(Some(seed));
        loop {
            let actions: BTreeMap<NodeId, usize> = agents
                .iter()
                .map(|&a| {
                    let key = discretize(&observations[&a], params.buckets);
                    let table = tables.get(&a).expect("table per agent");
                    (
                        a,
                        epsilon_greedy(
                            table,
                            &key,
                            &observations[&a].mask,
                            epsilon,
                            rngs.get_mut(&a).unwrap(),
                        ),
                    )
                })
                .collect();
            let step = env.step(&actions)?;
            observations = step.observations;
            if step.done {
                break;
            }
        }
        batch.push(env.metrics().clone());
    }
    Ok(batch)
}

/// Renders the learning curve as CSV.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("episode,epsilon,mean_reward\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{}\n",
            p.episode,
            edgesim_core::sig6(p.epsilon),
            edgesim_core::sig6(p.mean_reward)
        ));
    }
    out
}
