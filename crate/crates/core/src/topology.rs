//! Network topologies: tiered grids, urban-sensing cluster plans, and
//! explicit topology files.

use crate::domain::{NodeId, NodeSpec};
use crate::error::{Result, SimError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Nodes plus connectivity. The neighbor relation is symmetric; bandwidth
/// is directed (an absent entry falls back to the channel default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<NodeSpec>,
    /// Neighbor ids per node, sorted ascending.
    pub neighbors: Vec<Vec<NodeId>>,
    /// Directed bandwidth overrides, Hz.
    pub bandwidth_overrides: BTreeMap<(NodeId, NodeId), f64>,
}

impl Topology {
    pub fn new(nodes: Vec<NodeSpec>) -> Self {
        let n = nodes.len();
        Self {
            nodes,
            neighbors: vec![Vec::new(); n],
            bandwidth_overrides: BTreeMap::new(),
        }
    }

    /// Adds an undirected connectivity edge.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId) {
        if a == b {
            return;
        }
        for (from, to) in [(a, b), (b, a)] {
            let list = &mut self.neighbors[from];
            if !list.contains(&to) {
                list.push(to);
                list.sort_unstable();
            }
        }
    }

    pub fn set_bandwidth(&mut self, from: NodeId, to: NodeId, hz: f64) {
        self.bandwidth_overrides.insert((from, to), hz);
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.neighbors[id]
    }

    pub fn bandwidth(&self, from: NodeId, to: NodeId, default_hz: f64) -> f64 {
        self.bandwidth_overrides
            .get(&(from, to))
            .copied()
            .unwrap_or(default_hz)
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Hardware template for one role in a cluster plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub num_cores: u32,
    pub frequency: u64,
    pub queue_capacity: usize,
    pub transmit_power_dbm: f64,
}

/// Parameterized urban-sensing layout: clusters of SBC pairs around a base
/// station, optionally sharing one remote server.
///
/// Node count = `n_clusters * (2 * sbc_pairs_per_cluster + base_station_nodes)
/// + (shared_server as usize)`; this formula is the contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub n_clusters: usize,
    pub sbc_pairs_per_cluster: usize,
    /// NUC plus GPU machines forming the base station.
    pub base_station_nodes: usize,
    pub shared_server: bool,
    pub sbc: RoleSpec,
    pub base: RoleSpec,
    pub server: RoleSpec,
}

impl Default for ClusterPlan {
    fn default() -> Self {
        // SBCs are an order of magnitude weaker than the base station so
        // the stock task size (8e7 cycles) takes 8 steps locally; arrival
        // rates past ~0.1 per step push the cluster toward saturation.
        Self {
            n_clusters: 1,
            sbc_pairs_per_cluster: 4,
            base_station_nodes: 3,
            shared_server: true,
            sbc: RoleSpec {
                num_cores: 1,
                frequency: 10_000_000,
                queue_capacity: 20,
                transmit_power_dbm: 20.0,
            },
            base: RoleSpec {
                num_cores: 1,
                frequency: 40_000_000,
                queue_capacity: 10,
                transmit_power_dbm: 20.0,
            },
            server: RoleSpec {
                num_cores: 2,
                frequency: 80_000_000,
                queue_capacity: 100,
                transmit_power_dbm: 20.0,
            },
        }
    }
}

impl ClusterPlan {
    pub fn node_count(&self) -> usize {
        self.n_clusters * (2 * self.sbc_pairs_per_cluster + self.base_station_nodes)
            + usize::from(self.shared_server)
    }
}

/// Builds the cluster topology on a deterministic grid: cluster centers
/// 100 m apart on the x axis, members on a 10 m ring around their center,
/// the shared server 100 m to the left of the first cluster.
///
/// SBCs are clients with controllers; base-station nodes and the server
/// are workers with controllers. Each SBC connects to its pair partner and
/// to every base-station node of its cluster; base-station nodes connect
/// to each other and to the server.
pub fn generate_cluster_topology(plan: &ClusterPlan) -> Topology {
    let mut nodes = Vec::with_capacity(plan.node_count());
    let members_per_cluster = 2 * plan.sbc_pairs_per_cluster + plan.base_station_nodes;

    for cluster in 0..plan.n_clusters {
        let center = (100.0 * cluster as f64, 0.0);
        for member in 0..members_per_cluster {
            let angle =
                2.0 * std::f64::consts::PI * member as f64 / members_per_cluster.max(1) as f64;
            let position = (center.0 + 10.0 * angle.cos(), center.1 + 10.0 * angle.sin());
            let is_sbc = member < 2 * plan.sbc_pairs_per_cluster;
            let role = if is_sbc { &plan.sbc } else { &plan.base };
            nodes.push(NodeSpec {
                id: nodes.len(),
                tier: if is_sbc { 1 } else { 2 },
                num_cores: role.num_cores,
                frequency: role.frequency,
                queue_capacity: role.queue_capacity,
                transmit_power_dbm: role.transmit_power_dbm,
                position,
                is_client: is_sbc,
                has_controller: true,
            });
        }
    }
    let server_id = if plan.shared_server {
        let id = nodes.len();
        nodes.push(NodeSpec {
            id,
            tier: 3,
            num_cores: plan.server.num_cores,
            frequency: plan.server.frequency,
            queue_capacity: plan.server.queue_capacity,
            transmit_power_dbm: plan.server.transmit_power_dbm,
            position: (-100.0, 0.0),
            is_client: false,
            has_controller: true,
        });
        Some(id)
    } else {
        None
    };

    let mut topo = Topology::new(nodes);
    for cluster in 0..plan.n_clusters {
        let first = cluster * members_per_cluster;
        let base_first = first + 2 * plan.sbc_pairs_per_cluster;
        let base_ids: Vec<NodeId> = (base_first..first + members_per_cluster).collect();

        for pair in 0..plan.sbc_pairs_per_cluster {
            let a = first + 2 * pair;
            let b = a + 1;
            topo.add_edge(a, b);
            for &base in &base_ids {
                topo.add_edge(a, base);
                topo.add_edge(b, base);
            }
        }
        for (i, &a) in base_ids.iter().enumerate() {
            for &b in &base_ids[i + 1..] {
                topo.add_edge(a, b);
            }
            if let Some(server) = server_id {
                topo.add_edge(a, server);
            }
        }
    }
    topo
}

/// Per-tier hardware for the tiered grid generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSpec {
    pub nodes: usize,
    pub num_cores: u32,
    pub frequency: u64,
    pub queue_capacity: usize,
}

/// Builds an n-tier grid. Tier-1 nodes are clients with controllers; upper
/// tiers are workers with controllers. Node `i` of tier `k` connects to
/// nodes `i` and `i+1` (mod size) of tier `k+1`. Positions: 50 m spacing
/// within a tier, tiers 100 m apart.
pub fn generate_tiered_topology(tiers: &[TierSpec], transmit_power_dbm: f64) -> Topology {
    let mut nodes = Vec::new();
    let mut tier_offsets = Vec::with_capacity(tiers.len());
    for (k, tier) in tiers.iter().enumerate() {
        tier_offsets.push(nodes.len());
        for i in 0..tier.nodes {
            nodes.push(NodeSpec {
                id: nodes.len(),
                tier: k as u32 + 1,
                num_cores: tier.num_cores,
                frequency: tier.frequency,
                queue_capacity: tier.queue_capacity,
                transmit_power_dbm,
                position: (50.0 * i as f64, 100.0 * k as f64),
                is_client: k == 0,
                has_controller: true,
            });
        }
    }
    let mut topo = Topology::new(nodes);
    for k in 0..tiers.len().saturating_sub(1) {
        let upper = tiers[k + 1].nodes;
        if upper == 0 {
            continue;
        }
        for i in 0..tiers[k].nodes {
            let from = tier_offsets[k] + i;
            topo.add_edge(from, tier_offsets[k + 1] + i % upper);
            topo.add_edge(from, tier_offsets[k + 1] + (i + 1) % upper);
        }
    }
    topo
}

/// On-disk topology listing for hand-built networks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    pub nodes: Vec<TopologyFileNode>,
    #[serde(default)]
    pub edges: Vec<TopologyFileEdge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFileNode {
    pub id: NodeId,
    pub tier: u32,
    pub num_cores: u32,
    pub frequency: u64,
    pub queue_capacity: usize,
    #[serde(default = "default_power")]
    pub transmit_power_dbm: f64,
    pub position: (f64, f64),
    #[serde(default)]
    pub is_client: bool,
    #[serde(default)]
    pub has_controller: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFileEdge {
    pub a: NodeId,
    pub b: NodeId,
    /// Directed overrides; omitted directions use the channel default.
    #[serde(default)]
    pub bandwidth_a_b: Option<f64>,
    #[serde(default)]
    pub bandwidth_b_a: Option<f64>,
}

fn default_power() -> f64 {
    20.0
}

impl TopologyFile {
    pub fn build(&self) -> Result<Topology> {
        let mut nodes: Vec<TopologyFileNode> = self.nodes.clone();
        nodes.sort_by_key(|n| n.id);
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(SimError::ConfigParse(format!(
                    "topology node ids must be contiguous from 0; found gap at id {}",
                    n.id
                )));
            }
        }
        let specs = nodes
            .iter()
            .map(|n| NodeSpec {
                id: n.id,
                tier: n.tier,
                num_cores: n.num_cores,
                frequency: n.frequency,
                queue_capacity: n.queue_capacity,
                transmit_power_dbm: n.transmit_power_dbm,
                position: n.position,
                is_client: n.is_client,
                has_controller: n.has_controller,
            })
            .collect();
        let mut topo = Topology::new(specs);
        for edge in &self.edges {
            if edge.a >= topo.len() || edge.b >= topo.len() {
                return Err(SimError::ConfigParse(format!(
                    "topology edge ({}, {}) references a missing node",
                    edge.a, edge.b
                )));
            }
            topo.add_edge(edge.a, edge.b);
            if let Some(hz) = edge.bandwidth_a_b {
                topo.set_bandwidth(edge.a, edge.b, hz);
            }
            if let Some(hz) = edge.bandwidth_b_a {
                topo.set_bandwidth(edge.b, edge.a, hz);
            }
        }
        Ok(topo)
    }

    pub fn from_topology(topo: &Topology) -> Self {
        let nodes = topo
            .nodes
            .iter()
            .map(|n| TopologyFileNode {
                id: n.id,
                tier: n.tier,
                num_cores: n.num_cores,
                frequency: n.frequency,
                queue_capacity: n.queue_capacity,
                transmit_power_dbm: n.transmit_power_dbm,
                position: n.position,
                is_client: n.is_client,
                has_controller: n.has_controller,
            })
            .collect();
        let mut edges = Vec::new();
        for node in &topo.nodes {
            for &nb in topo.neighbors(node.id) {
                if nb > node.id {
                    edges.push(TopologyFileEdge {
                        a: node.id,
                        b: nb,
                        bandwidth_a_b: topo.bandwidth_overrides.get(&(node.id, nb)).copied(),
                        bandwidth_b_a: topo.bandwidth_overrides.get(&(nb, node.id)).copied(),
                    });
                }
            }
        }
        Self { nodes, edges }
    }
}
