//! Core domain types and configuration validation.
//!
//! Unit canon: time in steps, data sizes in bits, processor frequency in
//! cycles per step. Config files accept megabytes and convert once at the
//! boundary via [`mbytes_to_bits`].

use crate::topology::Topology;
use crate::workload::TaskTemplate;
use serde::{Deserialize, Serialize};

pub type NodeId = usize;
pub type TaskId = u64;

/// Decimal megabytes: 1 Mbyte = 8e6 bits.
pub const BITS_PER_MBYTE: f64 = 8e6;

pub fn mbytes_to_bits(mb: f64) -> u64 {
    (mb * BITS_PER_MBYTE).round() as u64
}

/// One indivisible computational task.
///
/// Progress is tracked in cycles (`rho * xi` total); a node's per-step
/// budget is `num_cores * frequency` cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub id: TaskId,
    /// Instruction count.
    pub rho: u64,
    /// Input payload, bits. Charged when the task is offloaded.
    pub alpha_in_bits: u64,
    /// Result payload, bits. Charged on each return hop.
    pub alpha_out_bits: u64,
    /// CPU cycles per instruction.
    pub xi: u64,
    /// Deadline, steps from creation to result delivery.
    pub deadline: u64,
    pub origin_client: NodeId,
    pub created_at: u64,
    /// Cycles still to be processed; starts at `rho * xi`.
    pub remaining_cycles: u64,
    /// Cycles already spent on this task, across all nodes.
    pub cycles_consumed: u64,
    /// Node ids traversed, starting at the origin client.
    pub offload_chain: Vec<NodeId>,
}

impl TaskInstance {
    pub fn new(
        id: TaskId,
        rho: u64,
        alpha_in_bits: u64,
        alpha_out_bits: u64,
        xi: u64,
        deadline: u64,
        origin_client: NodeId,
        created_at: u64,
    ) -> Self {
        Self {
            id,
            rho,
            alpha_in_bits,
            alpha_out_bits,
            xi,
            deadline,
            origin_client,
            created_at,
            remaining_cycles: rho * xi,
            cycles_consumed: 0,
            offload_chain: vec![origin_client],
        }
    }

    pub fn total_cycles(&self) -> u64 {
        self.rho * self.xi
    }

    /// Instructions left, rounded up to whole instructions.
    pub fn remaining_instructions(&self) -> u64 {
        self.remaining_cycles.div_ceil(self.xi)
    }

    /// Age at the end of the step that started at `now`.
    pub fn age_at_step_end(&self, now: u64) -> u64 {
        (now + 1).saturating_sub(self.created_at)
    }
}

/// Static node capabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    /// Layer/tier index (clients low, servers high).
    pub tier: u32,
    pub num_cores: u32,
    /// Cycles per time step, per core.
    pub frequency: u64,
    /// Maximum tasks the processing queue holds.
    pub queue_capacity: usize,
    pub transmit_power_dbm: f64,
    /// Position in meters.
    pub position: (f64, f64),
    pub is_client: bool,
    pub has_controller: bool,
}

impl NodeSpec {
    /// Cycle budget per step: `num_cores * frequency`.
    pub fn processing_rate(&self) -> u64 {
        self.num_cores as u64 * self.frequency
    }
}

/// Channel gain model, dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainModel {
    /// Same gain on every link regardless of geometry.
    Constant { gain_db: f64 },
    /// Reference gain at 1 m minus 20 dB per decade of distance.
    FreeSpace { reference_db: f64 },
}

/// Wireless channel parameters shared by all links; per-link bandwidth
/// lives in the topology's bandwidth table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Default bandwidth for links without an explicit entry, Hz.
    pub default_bandwidth_hz: f64,
    /// Noise power, dBm.
    pub noise_dbm: f64,
    pub gain_model: GainModel,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            default_bandwidth_hz: 2e6,
            noise_dbm: -90.0,
            gain_model: GainModel::FreeSpace {
                reference_db: -30.0,
            },
        }
    }
}

/// Reward function weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    /// Utility gain per acted-on task.
    pub r_u: f64,
    pub chi_wait: f64,
    pub chi_comm: f64,
    pub chi_exc: f64,
    pub chi_overload: f64,
    /// Lower clamp for the overload probability; keeps the log cost finite
    /// when the target queue is full.
    pub p_floor: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            r_u: 2.0,
            chi_wait: 20.0,
            chi_comm: 20.0,
            chi_exc: 20.0,
            chi_overload: 150.0,
            p_floor: 1e-6,
        }
    }
}

/// Potential function for reward shaping, `F = potential(s') - potential(s)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingKind {
    /// No shaping; F is identically zero.
    #[default]
    None,
    /// Potential = -(total queued tasks across all nodes).
    NegQueueOccupancy,
}

/// Full simulation configuration. Built either programmatically or from a
/// config file (see `config::parse_config`).
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub topology: Topology,
    pub channel: ChannelParams,
    pub reward: RewardWeights,
    /// Task arrival rate per client per step.
    pub lambda: f64,
    pub task_template: TaskTemplate,
    /// Episode length, steps.
    pub horizon: u64,
    pub seed: u64,
    /// Observation padding width; must cover the largest neighborhood.
    pub max_neighbors: usize,
    pub shaping: ShapingKind,
}

impl SimConfig {
    /// Agents are the controller nodes, ascending by id.
    pub fn controllers(&self) -> Vec<NodeId> {
        self.topology
            .nodes
            .iter()
            .filter(|n| n.has_controller)
            .map(|n| n.id)
            .collect()
    }

    pub fn clients(&self) -> Vec<NodeId> {
        self.topology
            .nodes
            .iter()
            .filter(|n| n.is_client)
            .map(|n| n.id)
            .collect()
    }
}

/// Collects every violated invariant across the config and its nested
/// types. An empty list means every module accepts the config as-is.
pub fn validate_config(config: &SimConfig) -> Vec<String> {
    let mut violations = Vec::new();
    let topo = &config.topology;

    if config.horizon < 1 {
        violations.push("horizon must be >= 1".to_string());
    }
    if !(config.lambda >= 0.0) {
        violations.push("lambda must be >= 0".to_string());
    }

    let w = &config.reward;
    for (name, v) in [
        ("r_u", w.r_u),
        ("chi_wait", w.chi_wait),
        ("chi_comm", w.chi_comm),
        ("chi_exc", w.chi_exc),
        ("chi_overload", w.chi_overload),
    ] {
        if !(v >= 0.0) {
            violations.push(format!("reward weight {name} must be >= 0"));
        }
    }
    if !(w.p_floor > 0.0 && w.p_floor < 1.0) {
        violations.push("p_floor must lie in (0, 1)".to_string());
    }

    if !(config.channel.default_bandwidth_hz > 0.0) {
        violations.push("default bandwidth must be > 0".to_string());
    }

    for (i, node) in topo.nodes.iter().enumerate() {
        if node.id != i {
            violations.push(format!(
                "node ids must be contiguous: index {i} holds id {}",
                node.id
            ));
        }
        if node.num_cores < 1 {
            violations.push(format!("node {}: num_cores must be >= 1", node.id));
        }
        if node.frequency == 0 {
            violations.push(format!("node {}: frequency must be > 0", node.id));
        }
        if !(node.position.0.is_finite() && node.position.1.is_finite()) {
            violations.push(format!("node {}: position must be finite", node.id));
        }
    }

    // Neighbor relation symmetry and per-link checks.
    for node in &topo.nodes {
        for &nb in topo.neighbors(node.id) {
            if nb >= topo.nodes.len() {
                violations.push(format!("node {}: neighbor {nb} does not exist", node.id));
                continue;
            }
            if !topo.neighbors(nb).contains(&node.id) {
                violations.push(format!(
                    "neighbor relation not symmetric: {} lists {nb} but not vice versa",
                    node.id
                ));
            }
            if !(topo.bandwidth(node.id, nb, config.channel.default_bandwidth_hz) > 0.0) {
                violations.push(format!("bandwidth {} -> {nb} must be > 0", node.id));
            }
            if let GainModel::FreeSpace { .. } = config.channel.gain_model {
                let a = topo.nodes[node.id].position;
                let b = topo.nodes[nb].position;
                if a == b {
                    violations.push(format!(
                        "free-space gain degenerate: nodes {} and {nb} share a position",
                        node.id
                    ));
                }
            }
        }
    }

    // A zero-capacity node that can be offloaded to drops every arrival.
    for node in &topo.nodes {
        if node.queue_capacity == 0 {
            let is_target = node.has_controller
                || topo.nodes.iter().any(|other| {
                    other.has_controller && topo.neighbors(other.id).contains(&node.id)
                });
            if is_target {
                violations.push(format!(
                    "zero-capacity worker: node {} is an offload target",
                    node.id
                ));
            }
        }
    }

    // Clients must have somewhere to stage generated tasks.
    for node in &topo.nodes {
        if node.is_client && !node.has_controller {
            let has_ctrl_neighbor = topo
                .neighbors(node.id)
                .iter()
                .any(|&nb| topo.nodes[nb].has_controller);
            if !has_ctrl_neighbor {
                violations.push(format!(
                    "client {} has no controller and no controller neighbor",
                    node.id
                ));
            }
        }
    }

    let max_degree = topo.max_degree();
    if config.max_neighbors < max_degree {
        violations.push(format!(
            "observation width too small: max_neighbors {} < largest neighborhood {max_degree}",
            config.max_neighbors
        ));
    }

    violations.extend(config.task_template.violations());

    violations
}
