//! Config file parsing: strict keys, documented defaults.
//!
//! Files are TOML with dotted sections (`reward.*`, `channel.*`, `task.*`,
//! `topology.*`). Unknown keys are rejected so typos never pass silently.
//! Every key is optional; omitted keys take the defaults below, which
//! reproduce the stock tiered scenario (30 nodes over three tiers,
//! lambda 0.17, 1000-step horizon).

use crate::domain::{
    mbytes_to_bits, ChannelParams, GainModel, RewardWeights, ShapingKind, SimConfig,
};
use crate::error::{Result, SimError};
use crate::topology::{
    generate_cluster_topology, generate_tiered_topology, ClusterPlan, TierSpec, Topology,
    TopologyFile,
};
use crate::workload::{load_trace, FieldDist, TaskFields, TaskSource, TaskTemplate};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Observation padding width; defaults to the topology's max degree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_neighbors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shaping: Option<String>,
    #[serde(default)]
    pub reward: RewardSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub task: TaskSection,
    #[serde(default)]
    pub topology: TopologySection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_wait: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_comm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_exc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_o: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_floor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_dbm: Option<f64>,
    /// "free_space" or "constant".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_ref_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_const_db: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_in_mb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_out_mb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<u64>,
    /// When set, task shapes come from this trace file instead of the
    /// scalar fields above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
    /// Reference CPU frequency for the trace instruction conversion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_frequency: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    /// "tiered", "clusters", or "file".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_per_tier: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cores: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_capacities: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmit_power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbc_pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_server: Option<bool>,
    /// Topology listing for mode = "file".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

pub const DEFAULT_LAMBDA: f64 = 0.17;
pub const DEFAULT_HORIZON: u64 = 1000;
pub const DEFAULT_REF_FREQUENCY: u64 = 10_000_000;

/// Stock tiered scenario: (10, 10, 10) nodes, frequencies (4e7, 2e7, 8e7),
/// cores (1, 1, 2), queue capacities (20, 10, 100).
pub fn default_tiers() -> Vec<TierSpec> {
    vec![
        TierSpec {
            nodes: 10,
            num_cores: 1,
            frequency: 40_000_000,
            queue_capacity: 20,
        },
        TierSpec {
            nodes: 10,
            num_cores: 1,
            frequency: 20_000_000,
            queue_capacity: 10,
        },
        TierSpec {
            nodes: 10,
            num_cores: 2,
            frequency: 80_000_000,
            queue_capacity: 100,
        },
    ]
}

/// Fully defaulted configuration (equivalent to parsing an empty file).
pub fn default_config() -> SimConfig {
    ConfigFile::default()
        .build(None)
        .expect("defaults are self-consistent")
}

impl ConfigFile {
    pub fn parse_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::ConfigParse(e.to_string()))
    }

    /// Assembles the runtime config. `base_dir` anchors relative paths
    /// (topology and trace files).
    pub fn build(&self, base_dir: Option<&Path>) -> Result<SimConfig> {
        let channel = self.channel_params()?;
        let topology = self.build_topology(base_dir)?;
        let task_template = self.build_template(base_dir)?;
        let max_neighbors = self.max_neighbors.unwrap_or_else(|| topology.max_degree());
        let shaping = match self.shaping.as_deref() {
            None | Some("none") => ShapingKind::None,
            Some("neg_queue_occupancy") => ShapingKind::NegQueueOccupancy,
            Some(other) => {
                return Err(SimError::ConfigParse(format!(
                    "unknown shaping kind: {other}"
                )))
            }
        };

        let defaults = RewardWeights::default();
        let reward = RewardWeights {
            r_u: self.reward.r_u.unwrap_or(defaults.r_u),
            chi_wait: self.reward.chi_wait.unwrap_or(defaults.chi_wait),
            chi_comm: self.reward.chi_comm.unwrap_or(defaults.chi_comm),
            chi_exc: self.reward.chi_exc.unwrap_or(defaults.chi_exc),
            chi_overload: self.reward.chi_o.unwrap_or(defaults.chi_overload),
            p_floor: self.reward.p_floor.unwrap_or(defaults.p_floor),
        };

        Ok(SimConfig {
            topology,
            channel,
            reward,
            lambda: self.lambda.unwrap_or(DEFAULT_LAMBDA),
            task_template,
            horizon: self.horizon.unwrap_or(DEFAULT_HORIZON),
            seed: self.seed.unwrap_or(0),
            max_neighbors,
            shaping,
        })
    }

    fn channel_params(&self) -> Result<ChannelParams> {
        let defaults = ChannelParams::default();
        let gain_model = match self.channel.gain_model.as_deref() {
            None | Some("free_space") => GainModel::FreeSpace {
                reference_db: self.channel.gain_ref_db.unwrap_or(-30.0),
            },
            Some("constant") => GainModel::Constant {
                gain_db: self.channel.gain_const_db.unwrap_or(-30.0),
            },
            Some(other) => {
                return Err(SimError::ConfigParse(format!(
                    "unknown gain model: {other}"
                )))
            }
        };
        Ok(ChannelParams {
            default_bandwidth_hz: self
                .channel
                .bandwidth_hz
                .unwrap_or(defaults.default_bandwidth_hz),
            noise_dbm: self.channel.noise_dbm.unwrap_or(defaults.noise_dbm),
            gain_model,
        })
    }

    fn build_topology(&self, base_dir: Option<&Path>) -> Result<Topology> {
        let t = &self.topology;
        let power = t.transmit_power_dbm.unwrap_or(20.0);
        match t.mode.as_deref() {
            None | Some("tiered") => {
                let mut tiers = default_tiers();
                if let Some(sizes) = &t.nodes_per_tier {
                    tiers = sizes
                        .iter()
                        .enumerate()
                        .map(|(k, &n)| {
                            let base = default_tiers();
                            let tpl = base
                                .get(k)
                                .cloned()
                                .unwrap_or_else(|| base[base.len() - 1].clone());
                            TierSpec { nodes: n, ..tpl }
                        })
                        .collect();
                }
                for (k, tier) in tiers.iter_mut().enumerate() {
                    if let Some(freqs) = &t.frequencies {
                        if let Some(&f) = freqs.get(k) {
                            tier.frequency = f;
                        }
                    }
                    if let Some(cores) = &t.cores {
                        if let Some(&c) = cores.get(k) {
                            tier.num_cores = c;
                        }
                    }
                    if let Some(caps) = &t.queue_capacities {
                        if let Some(&q) = caps.get(k) {
                            tier.queue_capacity = q;
                        }
                    }
                }
                Ok(generate_tiered_topology(&tiers, power))
            }
            Some("clusters") => {
                let mut plan = ClusterPlan::default();
                if let Some(n) = t.n_clusters {
                    plan.n_clusters = n;
                }
                if let Some(p) = t.sbc_pairs {
                    plan.sbc_pairs_per_cluster = p;
                }
                if let Some(b) = t.base_nodes {
                    plan.base_station_nodes = b;
                }
                if let Some(s) = t.shared_server {
                    plan.shared_server = s;
                }
                plan.sbc.transmit_power_dbm = power;
                plan.base.transmit_power_dbm = power;
                plan.server.transmit_power_dbm = power;
                Ok(generate_cluster_topology(&plan))
            }
            Some("file") => {
                let rel = t.path.as_deref().ok_or_else(|| {
                    SimError::ConfigParse("topology.mode = \"file\" requires topology.path".into())
                })?;
                let path = resolve(base_dir, rel);
                let text = std::fs::read_to_string(&path).map_err(|e| SimError::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
                let file: TopologyFile =
                    toml::from_str(&text).map_err(|e| SimError::ConfigParse(e.to_string()))?;
                file.build()
            }
            Some(other) => Err(SimError::ConfigParse(format!(
                "unknown topology mode: {other}"
            ))),
        }
    }

    fn build_template(&self, base_dir: Option<&Path>) -> Result<TaskTemplate> {
        let task = &self.task;
        let delta = task.delta.unwrap_or(100);
        if let Some(rel) = &task.trace_path {
            let path = resolve(base_dir, rel);
            let shapes = load_trace(
                &path,
                task.ref_frequency.unwrap_or(DEFAULT_REF_FREQUENCY),
                delta,
            )?;
            return Ok(TaskTemplate {
                source: TaskSource::Trace(shapes),
            });
        }
        Ok(TaskTemplate {
            source: TaskSource::Parametric(TaskFields {
                rho: FieldDist::Constant(task.rho.unwrap_or(80_000_000)),
                alpha_in_bits: FieldDist::Constant(mbytes_to_bits(
                    task.alpha_in_mb.unwrap_or(150.0),
                )),
                alpha_out_bits: FieldDist::Constant(mbytes_to_bits(
                    task.alpha_out_mb.unwrap_or(150.0),
                )),
                xi: FieldDist::Constant(task.xi.unwrap_or(1)),
                deadline: FieldDist::Constant(delta),
            }),
        })
    }
}

fn resolve(base_dir: Option<&Path>, rel: &str) -> std::path::PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match base_dir {
        Some(dir) => dir.join(p),
        None => p.to_path_buf(),
    }
}

/// Parses a config file and assembles the runtime configuration. Relative
/// paths inside the file resolve against the file's directory.
pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let file = ConfigFile::parse_str(&text)?;
    file.build(path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_config;

    #[test]
    fn seed_only_file_takes_all_defaults() {
        let file = ConfigFile::parse_str("seed = 7").unwrap();
        let config = file.build(None).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.horizon, 1000);
        assert_eq!(config.lambda, 0.17);
        assert_eq!(config.topology.len(), 30);
        assert_eq!(config.task_template.mean_cycles(), 8e7);
        assert!(validate_config(&config).is_empty());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ConfigFile::parse_str("lamda = 0.3").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lamda"), "error should name the key: {msg}");
    }

    #[test]
    fn unknown_nested_key_is_rejected() {
        let err = ConfigFile::parse_str("[reward]\nchi_wiat = 1.0").unwrap_err();
        assert!(err.to_string().contains("chi_wiat"));
    }

    #[test]
    fn serialize_parse_roundtrip() {
        let text = r#"
seed = 11
lambda = 0.3
horizon = 250

[reward]
chi_o = 99.0

[channel]
gain_model = "constant"
gain_const_db = -25.0

[topology]
mode = "clusters"
n_clusters = 2
"#;
        let file = ConfigFile::parse_str(text).unwrap();
        let serialized = toml::to_string(&file).unwrap();
        let reparsed = ConfigFile::parse_str(&serialized).unwrap();
        assert_eq!(file, reparsed);
        assert_eq!(file.build(None).unwrap(), reparsed.build(None).unwrap());
    }

    #[test]
    fn cluster_mode_builds_twelve_nodes() {
        let file = ConfigFile::parse_str("[topology]\nmode = \"clusters\"").unwrap();
        let config = file.build(None).unwrap();
        assert_eq!(config.topology.len(), 12);
        assert!(validate_config(&config).is_empty());
    }

    #[test]
    fn max_neighbors_defaults_to_max_degree() {
        let config = default_config();
        assert_eq!(config.max_neighbors, config.topology.max_degree());
    }
}
