//! Deterministic, seedable discrete-time simulator of edge-computing
//! networks for multi-agent task offloading.
//!
//! The crate exposes a multi-agent environment contract (reset / step /
//! observe / reward) over a cycle-driven engine, baseline and tabular-Q
//! policies, tiered and cluster topology generators, trace-driven
//! workloads, and episode metric summaries.

pub mod comm;
pub mod config;
pub mod domain;
pub mod engine;
pub mod env;
pub mod error;
pub mod metrics;
pub mod policy;
pub mod topology;
pub mod workload;

pub use comm::{channel_gain, link_budget, transmission_time, LinkBudget};
pub use config::{default_config, parse_config, ConfigFile};
pub use domain::{
    mbytes_to_bits, validate_config, ChannelParams, GainModel, NodeId, NodeSpec, RewardWeights,
    ShapingKind, SimConfig, TaskId, TaskInstance,
};
pub use engine::{
    sample_arrivals, ActionSnapshot, SimState, StepOutcome, TaskOutcome, TerminalRecord,
    TransferEvent, TransferKind,
};
pub use env::{
    compute_delay, compute_overload, compute_reward, encode_observation, run_episode, EnvStep,
    Environment, Observation, RewardBreakdown, StepInfo,
};
pub use error::SimError;
pub use metrics::{emit_csv, sig6, summarize, BatchSummary, CsvRow, EpisodeMetrics, CSV_HEADER};
pub use policy::{
    derive_seed, discretize, epsilon_greedy, Policy, PolicyKind, QLearnerParams, QPolicy, QTable,
};
pub use topology::{
    generate_cluster_topology, generate_tiered_topology, ClusterPlan, RoleSpec, TierSpec, Topology,
    TopologyFile,
};
pub use workload::{
    load_trace, FieldDist, TaskFields, TaskSource, TaskTemplate, TraceJob, TraceTask,
};
