//! Built-in decision makers: the Local / Random / LeastQueue baselines and
//! a tabular epsilon-greedy Q-learner.
//!
//! Ties break to the lowest action index everywhere.

use crate::env::Observation;
use crate::error::{Result, SimError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// A per-agent decision maker. One instance per agent; no shared state.
pub trait Policy: Send {
    fn act(&mut self, obs: &Observation) -> usize;
}

/// Tabular learner hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QLearnerParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Multiplicative epsilon decay per episode.
    pub epsilon_decay: f64,
    /// Uniform buckets per queue-occupancy feature.
    pub buckets: u32,
}

impl Default for QLearnerParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 0.985,
            buckets: 4,
        }
    }
}

impl QLearnerParams {
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        (self.epsilon_start * self.epsilon_decay.powi(episode as i32)).max(self.epsilon_end)
    }
}

/// Selectable policy kinds. `Random` and `TabularQ` seed their own RNGs so
/// fixed seeds give identical action sequences.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    Local,
    Random,
    LeastQueue,
    TabularQ(QLearnerParams),
}

impl PolicyKind {
    pub fn build(&self, seed: u64) -> Box<dyn Policy> {
        match self {
            PolicyKind::Local => Box::new(LocalPolicy),
            PolicyKind::Random => Box::new(RandomPolicy::new(seed)),
            PolicyKind::LeastQueue => Box::new(LeastQueuePolicy),
            PolicyKind::TabularQ(params) => Box::new(QPolicy::new(
                QTable::new(),
                params.clone(),
                params.epsilon_end,
                seed,
            )),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "local" => Ok(PolicyKind::Local),
            "random" => Ok(PolicyKind::Random),
            "least-queue" | "leastqueue" | "least_queue" => Ok(PolicyKind::LeastQueue),
            "qtable" | "tabular-q" => Ok(PolicyKind::TabularQ(QLearnerParams::default())),
            other => Err(SimError::ConfigParse(format!("unknown policy: {other}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Local => "local",
            PolicyKind::Random => "random",
            PolicyKind::LeastQueue => "least-queue",
            PolicyKind::TabularQ(_) => "qtable",
        }
    }
}

/// Deterministic per-agent seed derivation (splitmix64 over base and salt).
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unmasked_indices(obs: &Observation) -> Vec<usize> {
    obs.mask
        .iter()
        .enumerate()
        .filter_map(|(i, &ok)| ok.then_some(i))
        .collect()
}

/// Never offloads.
pub struct LocalPolicy;

impl Policy for LocalPolicy {
    fn act(&mut self, _obs: &Observation) -> usize {
        0
    }
}

/// Uniform over the unmasked action set.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, obs: &Observation) -> usize {
        let options = unmasked_indices(obs);
        options[self.rng.random_range(0..options.len())]
    }
}

/// Picks the unmasked block with the shortest observed queue; first
/// minimum wins.
pub struct LeastQueuePolicy;

impl Policy for LeastQueuePolicy {
    fn act(&mut self, obs: &Observation) -> usize {
        let mut best = 0;
        let mut best_queue = f64::INFINITY;
        for index in unmasked_indices(obs) {
            let q = obs.queue_len(index);
            if q < best_queue {
                best_queue = q;
                best = index;
            }
        }
        best
    }
}

/// Flat Q table keyed by discretized observation strings. Rows default to
/// all-zero on first touch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    entries: HashMap<String, Vec<f64>>,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, state_key: &str, action: usize) -> f64 {
        self.entries
            .get(state_key)
            .and_then(|row| row.get(action))
            .copied()
            .unwrap_or(0.0)
    }

    fn row_mut(&mut self, state_key: &str, n_actions: usize) -> &mut Vec<f64> {
        let row = self.entries.entry(state_key.to_string()).or_default();
        if row.len() < n_actions {
            row.resize(n_actions, 0.0);
        }
        row
    }

    /// Max over the stored row; unseen states and actions count as 0.
    pub fn max_value(&self, state_key: &str) -> f64 {
        match self.entries.get(state_key) {
            None => 0.0,
            Some(row) if row.is_empty() => 0.0,
            Some(row) => row.iter().copied().fold(f64::MIN, f64::max).max(0.0),
        }
    }

    /// One Q-learning backup:
    /// `Q[s,a] <- (1-alpha) Q[s,a] + alpha (r + gamma max_a' Q[s',a'])`.
    pub fn q_update(
        &mut self,
        state_key: &str,
        action: usize,
        reward: f64,
        next_key: &str,
        params: &QLearnerParams,
    ) -> Result<()> {
        if !reward.is_finite() {
            return Err(SimError::NonFiniteReward);
        }
        let bootstrap = self.max_value(next_key);
        let row = self.row_mut(state_key, action + 1);
        row[action] =
            (1.0 - params.alpha) * row[action] + params.alpha * (reward + params.gamma * bootstrap);
        Ok(())
    }

    /// Greedy action over the unmasked set, ties to the lowest index.
    pub fn best_action(&self, state_key: &str, mask: &[bool]) -> usize {
        let mut best = mask.iter().position(|&ok| ok).unwrap_or(0);
        let mut best_value = f64::NEG_INFINITY;
        for (action, &ok) in mask.iter().enumerate() {
            if !ok {
                continue;
            }
            let v = self.value(state_key, action);
            if v > best_value {
                best_value = v;
                best = action;
            }
        }
        best
    }

    /// Writes the flat `state_key,action,value` map, sorted for stable
    /// output.
    pub fn export<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        for key in keys {
            for (action, value) in self.entries[key].iter().enumerate() {
                writeln!(out, "{key},{action},{value:?}")?;
            }
        }
        Ok(())
    }

    pub fn import<R: BufRead>(input: R) -> Result<Self> {
        let mut table = QTable::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| SimError::TableParse {
                line: i + 1,
                detail: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.rsplitn(3, ',');
            let value = parts.next();
            let action = parts.next();
            let key = parts.next();
            let (Some(value), Some(action), Some(key)) = (value, action, key) else {
                return Err(SimError::TableParse {
                    line: i + 1,
                    detail: "expected state_key,action,value".to_string(),
                });
            };
            let action: usize = action.parse().map_err(|e| SimError::TableParse {
                line: i + 1,
                detail: format!("bad action: {e}"),
            })?;
            let value: f64 = value.parse().map_err(|e| SimError::TableParse {
                line: i + 1,
                detail: format!("bad value: {e}"),
            })?;
            table.row_mut(key, action + 1)[action] = value;
        }
        Ok(table)
    }
}

/// Epsilon-greedy over the unmasked set: explore uniformly with
/// probability epsilon, otherwise exploit `best_action`.
pub fn epsilon_greedy(
    table: &QTable,
    state_key: &str,
    mask: &[bool],
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> usize {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if epsilon > 0.0 && rng.random_range(0.0..1.0) < epsilon {
        let options: Vec<usize> = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &ok)| ok.then_some(i))
            .collect();
        return options[rng.random_range(0..options.len())];
    }
    table.best_action(state_key, mask)
}

/// Discretizes an observation into a table key: one occupancy bucket per
/// block (queue length over capacity, `buckets` uniform bins; padded
/// blocks get a sentinel) plus the staging flag.
pub fn discretize(obs: &Observation, buckets: u32) -> String {
    let mut key = String::new();
    for index in 0..obs.block_count() {
        if index > 0 {
            key.push('-');
        }
        if !obs.mask[index] {
            key.push('p');
            continue;
        }
        let cap = obs.queue_capacity(index);
        let ratio = if cap > 0.0 {
            (obs.queue_len(index) / cap).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let bucket = ((ratio * buckets as f64) as u32).min(buckets - 1);
        key.push_str(&bucket.to_string());
    }
    key.push_str(if obs.staging_flag() > 0.0 {
        "-s1"
    } else {
        "-s0"
    });
    key
}

/// Table-driven policy used for evaluation and over-the-wire agents.
pub struct QPolicy {
    pub table: QTable,
    params: QLearnerParams,
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl QPolicy {
    pub fn new(table: QTable, params: QLearnerParams, epsilon: f64, seed: u64) -> Self {
        Self {
            table,
            params,
            epsilon,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for QPolicy {
    fn act(&mut self, obs: &Observation) -> usize {
        let key = discretize(obs, self.params.buckets);
        epsilon_greedy(&self.table, &key, &obs.mask, self.epsilon, &mut self.rng)
    }
}
