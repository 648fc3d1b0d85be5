//! Multi-agent environment wrapper: observation encoding, action
//! translation, and the reward computation.
//!
//! Actions are local indices: 0 targets the agent itself, k targets its
//! k-th neighbor in ascending id order. Observations are fixed-width
//! vectors of node blocks read from broadcast snapshots, padded with -1
//! and masked past the agent's real neighborhood.

use crate::comm::transmission_time;
use crate::domain::{NodeId, ShapingKind, SimConfig, TaskId};
use crate::engine::{ActionSnapshot, SimState, TerminalRecord};
use crate::error::{Result, SimError};
use crate::metrics::EpisodeMetrics;
use crate::policy::{derive_seed, PolicyKind};
use std::collections::BTreeMap;

/// Fields per node block: id, tier, queue length, queue capacity,
/// processing rate, x, y, bandwidth from the observer, transmit power.
pub const BLOCK_FIELDS: usize = 9;

/// Sentinel filling padded blocks.
pub const PAD_VALUE: f64 = -1.0;

/// Fixed-width per-agent observation plus its action mask. `mask[i]` is
/// true exactly when action index i maps to a live node.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Observation {
    pub fn width(&self) -> usize {
        self.values.len()
    }

    pub fn block_count(&self) -> usize {
        self.mask.len()
    }

    pub fn block(&self, index: usize) -> &[f64] {
        &self.values[index * BLOCK_FIELDS..(index + 1) * BLOCK_FIELDS]
    }

    pub fn queue_len(&self, index: usize) -> f64 {
        self.block(index)[2]
    }

    pub fn queue_capacity(&self, index: usize) -> f64 {
        self.block(index)[3]
    }

    /// 1.0 when a task is staged awaiting this agent's decision.
    pub fn staging_flag(&self) -> f64 {
        *self.values.last().expect("observation non-empty")
    }
}

/// Delay components of one action, steps, plus their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayTerms {
    pub t_wait: f64,
    pub t_comm: f64,
    pub t_exc: f64,
    /// chi_wait*t_wait + chi_comm*t_comm + chi_exc*t_exc.
    pub weighted: f64,
}

/// Overload estimate for the action's target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverloadTerms {
    /// Clamped survival probability (cap - Q)/cap.
    pub p: f64,
    /// Expected queue after one drain step, task units.
    pub expected_queue: f64,
    /// -ln(p)/3.
    pub cost: f64,
}

/// Full decomposition of one agent reward:
/// `total = r_u - (weighted_delay + chi_overload*cost) + shaping`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub r_u: f64,
    pub delay: DelayTerms,
    pub overload: OverloadTerms,
    pub shaping: f64,
    pub total: f64,
}

/// Waiting, communication, and execution delay for acting on `snapshot`.
/// Queue lengths are divided by cycle rates exactly as written; the chi
/// weights absorb the scale.
pub fn compute_delay(
    snapshot: &ActionSnapshot,
    weights: &crate::domain::RewardWeights,
) -> Result<DelayTerms> {
    let local = snapshot.target == snapshot.agent;
    let rate_agent = snapshot.rate_agent as f64;
    let rate_target = snapshot.rate_target as f64;

    let mut t_wait = snapshot.queue_agent as f64 / rate_agent;
    if !local {
        t_wait += snapshot.queue_target as f64 / rate_target;
    }
    let t_comm = if local {
        0.0
    } else {
        transmission_time(
            snapshot.alpha_out_bits as f64,
            snapshot.bandwidth_hz,
            snapshot.power_dbm,
            snapshot.gain_db,
            snapshot.noise_dbm,
        )?
    };
    let cycles = (snapshot.rho * snapshot.xi) as f64;
    let t_exc = cycles / rate_target - cycles / rate_agent;
    let weighted = weights.chi_wait * t_wait + weights.chi_comm * t_comm + weights.chi_exc * t_exc;
    Ok(DelayTerms {
        t_wait,
        t_comm,
        t_exc,
        weighted,
    })
}

/// Overload probability and cost for a target queue. `mean_task_cycles`
/// converts the per-step cycle budget into queue-drain task units for the
/// expected-queue estimate.
pub fn compute_overload(
    target: NodeId,
    queue_len: usize,
    capacity: usize,
    rate: u64,
    mean_task_cycles: f64,
    p_floor: f64,
) -> Result<OverloadTerms> {
    if capacity == 0 {
        return Err(SimError::DegenerateCapacity { node: target });
    }
    let q = queue_len as f64;
    let cap = capacity as f64;
    let drain = if mean_task_cycles > 0.0 {
        rate as f64 / mean_task_cycles
    } else {
        0.0
    };
    let expected_queue = ((q - drain).max(0.0) + 1.0).min(cap);
    let p = ((cap - q) / cap).max(0.0).clamp(p_floor, 1.0);
    let cost = -p.ln() / 3.0;
    Ok(OverloadTerms {
        p,
        expected_queue,
        cost,
    })
}

/// Assembles the reward for one acted-on task.
pub fn compute_reward(
    snapshot: &ActionSnapshot,
    weights: &crate::domain::RewardWeights,
    mean_task_cycles: f64,
    shaping: f64,
) -> Result<RewardBreakdown> {
    let delay = compute_delay(snapshot, weights)?;
    let overload = compute_overload(
        snapshot.target,
        snapshot.queue_target,
        snapshot.cap_target,
        snapshot.rate_target,
        mean_task_cycles,
        weights.p_floor,
    )?;
    let total = weights.r_u - (delay.weighted + weights.chi_overload * overload.cost) + shaping;
    if !total.is_finite() {
        return Err(SimError::NonFiniteReward);
    }
    Ok(RewardBreakdown {
        r_u: weights.r_u,
        delay,
        overload,
        shaping,
        total,
    })
}

/// Encodes one agent's observation from broadcast snapshots: self block
/// first, then neighbors ascending by id, then padding, then the staging
/// flag. Neighbor values come from the last broadcast, never live state.
pub fn encode_observation(state: &SimState, agent: NodeId, max_neighbors: usize) -> Observation {
    let config = state.config();
    let topo = &config.topology;
    let mut values = Vec::with_capacity((1 + max_neighbors) * BLOCK_FIELDS + 1);
    let mut mask = Vec::with_capacity(1 + max_neighbors);

    let mut push_block = |node: NodeId, observer: NodeId| {
        let spec = &topo.nodes[node];
        let bandwidth = if node == observer {
            0.0
        } else {
            topo.bandwidth(observer, node, config.channel.default_bandwidth_hz)
        };
        values.extend_from_slice(&[
            node as f64,
            spec.tier as f64,
            state.announced_queue_len(node) as f64,
            spec.queue_capacity as f64,
            spec.processing_rate() as f64,
            spec.position.0,
            spec.position.1,
            bandwidth,
            spec.transmit_power_dbm,
        ]);
    };

    push_block(agent, agent);
    mask.push(true);
    let neighbors = topo.neighbors(agent);
    for &nb in neighbors {
        push_block(nb, agent);
        mask.push(true);
    }
    for _ in neighbors.len()..max_neighbors {
        values.extend(std::iter::repeat(PAD_VALUE).take(BLOCK_FIELDS));
        mask.push(false);
    }
    values.push(if state.staging_len(agent) > 0 {
        1.0
    } else {
        0.0
    });

    Observation { values, mask }
}

/// Per-step side information.
#[derive(Debug, Clone, Default)]
pub struct StepInfo {
    pub overloads: Vec<NodeId>,
    pub completed: Vec<TerminalRecord>,
    pub deadline_drops: Vec<TaskId>,
    pub masks: BTreeMap<NodeId, Vec<bool>>,
}

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct EnvStep {
    pub observations: BTreeMap<NodeId, Observation>,
    pub rewards: BTreeMap<NodeId, f64>,
    /// Breakdown for each agent that acted on a staged task this step.
    pub breakdowns: BTreeMap<NodeId, RewardBreakdown>,
    pub done: bool,
    pub info: StepInfo,
}

/// The multi-agent environment. Owns one world; calls must be serialized.
#[derive(Debug, Clone)]
pub struct Environment {
    config: SimConfig,
    state: SimState,
    agents: Vec<NodeId>,
    current_seed: u64,
}

impl Environment {
    pub fn new(config: SimConfig) -> Result<Self> {
        let state = SimState::init(config.clone())?;
        let agents = config.controllers();
        let seed = config.seed;
        let mut env = Self {
            config,
            state,
            agents,
            current_seed: seed,
        };
        env.prime_reward_slots();
        Ok(env)
    }

    fn prime_reward_slots(&mut self) {
        let agents = self.agents.clone();
        let rewards = &mut self.state.metrics_mut().reward_by_agent;
        for agent in agents {
            rewards.entry(agent).or_insert(0.0);
        }
    }

    /// Rebuilds the world. `seed` overrides the config seed; `None` reuses
    /// it, so repeated resets replay the same episode.
    pub fn reset(&mut self, seed: Option<u64>) -> BTreeMap<NodeId, Observation> {
        let mut config = self.config.clone();
        config.seed = seed.unwrap_or(self.config.seed);
        self.current_seed = config.seed;
        self.state = SimState::init(config).expect("config validated at construction");
        self.prime_reward_slots();
        self.observations()
    }

    pub fn agents(&self) -> &[NodeId] {
        &self.agents
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn current_seed(&self) -> u64 {
        self.current_seed
    }

    pub fn obs_width(&self) -> usize {
        (1 + self.config.max_neighbors) * BLOCK_FIELDS + 1
    }

    pub fn is_done(&self) -> bool {
        self.state.is_finished()
    }

    pub fn action_mask(&self, agent: NodeId) -> Vec<bool> {
        let degree = self.config.topology.neighbors(agent).len();
        let mut mask = vec![true; 1 + degree];
        mask.resize(1 + self.config.max_neighbors, false);
        mask
    }

    pub fn observations(&self) -> BTreeMap<NodeId, Observation> {
        self.agents
            .iter()
            .map(|&a| {
                (
                    a,
                    encode_observation(&self.state, a, self.config.max_neighbors),
                )
            })
            .collect()
    }

    pub fn metrics(&self) -> &EpisodeMetrics {
        self.state.metrics()
    }

    pub fn into_metrics(self) -> EpisodeMetrics {
        self.state.metrics().clone()
    }

    fn potential(&self) -> f64 {
        match self.config.shaping {
            ShapingKind::None => 0.0,
            ShapingKind::NegQueueOccupancy => {
                let total: usize = (0..self.config.topology.len())
                    .map(|n| self.state.queue_len(n))
                    .sum();
                -(total as f64)
            }
        }
    }

    /// Translates local indices to node ids, advances the world one step,
    /// and computes rewards for the tasks acted on. Agents whose staging
    /// was empty receive exactly 0.
    pub fn step(&mut self, actions: &BTreeMap<NodeId, usize>) -> Result<EnvStep> {
        if self.is_done() {
            return Err(SimError::EpisodeFinished {
                horizon: self.config.horizon,
            });
        }
        let mut joint = BTreeMap::new();
        for &agent in &self.agents {
            let Some(&index) = actions.get(&agent) else {
                return Err(SimError::IncompleteJointAction { agent });
            };
            let mask = self.action_mask(agent);
            if index >= mask.len() || !mask[index] {
                return Err(SimError::IllegalAction {
                    agent,
                    detail: format!("action index {index} is masked or out of range"),
                });
            }
            let target = if index == 0 {
                agent
            } else {
                self.config.topology.neighbors(agent)[index - 1]
            };
            joint.insert(agent, target);
        }

        let potential_before = self.potential();
        let outcome = self.state.advance_step(&joint)?;
        let shaping = self.potential() - potential_before;

        let mean_cycles = self.config.task_template.mean_cycles();
        let mut rewards: BTreeMap<NodeId, f64> = self.agents.iter().map(|&a| (a, 0.0)).collect();
        let mut breakdowns = BTreeMap::new();
        for snapshot in &outcome.acted {
            let breakdown = compute_reward(snapshot, &self.config.reward, mean_cycles, shaping)?;
            rewards.insert(snapshot.agent, breakdown.total);
            breakdowns.insert(snapshot.agent, breakdown);
        }
        for (&agent, &reward) in &rewards {
            *self
                .state
                .metrics_mut()
                .reward_by_agent
                .entry(agent)
                .or_insert(0.0) += reward;
        }

        let masks = self
            .agents
            .iter()
            .map(|&a| (a, self.action_mask(a)))
            .collect();
        Ok(EnvStep {
            observations: self.observations(),
            rewards,
            breakdowns,
            done: self.is_done(),
            info: StepInfo {
                overloads: outcome.overloads,
                completed: outcome.completed,
                deadline_drops: outcome.deadline_drops,
                masks,
            },
        })
    }
}

/// Runs a full episode with one policy kind instantiated per controller,
/// each seeded deterministically from the config seed.
pub fn run_episode(config: &SimConfig, kind: &PolicyKind) -> Result<EpisodeMetrics> {
    let mut env = Environment::new(config.clone())?;
    let mut policies: BTreeMap<NodeId, _> = env
        .agents()
        .iter()
        .map(|&a| (a, kind.build(derive_seed(config.seed, a as u64))))
        .collect();
    let mut observations = env.reset(None);
    loop {
        let actions: BTreeMap<NodeId, usize> = policies
            .iter_mut()
            .map(|(&agent, policy)| (agent, policy.act(&observations[&agent])))
            .collect();
        let step = env.step(&actions)?;
        observations = step.observations;
        if step.done {
            break;
        }
    }
    Ok(env.into_metrics())
}
