//! Bench helpers: prebuilt configurations for the criterion targets.

use edgesim_core::{default_config, ClusterPlan, ConfigFile, SimConfig};

/// The stock 30-node tiered scenario at the default arrival rate.
pub fn tiered_config() -> SimConfig {
    default_config()
}

/// A busy two-cluster scenario (lambda 0.4) exercising transfers and
/// overloads.
pub fn busy_cluster_config() -> SimConfig {
    let mut file = ConfigFile::default();
    file.lambda = Some(0.4);
    file.topology.mode = Some("clusters".to_string());
    file.topology.n_clusters = Some(2);
    file.build(None).expect("static config")
}

pub fn four_cluster_plan() -> ClusterPlan {
    ClusterPlan {
        n_clusters: 4,
        ..ClusterPlan::default()
    }
}
