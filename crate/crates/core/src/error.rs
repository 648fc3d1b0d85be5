//! Error types shared across the simulator.

use crate::domain::NodeId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Configuration failed validation; carries every violation found.
    #[error("invalid config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("episode finished: horizon {horizon} reached")]
    EpisodeFinished { horizon: u64 },

    #[error("illegal action for agent {agent}: {detail}")]
    IllegalAction { agent: NodeId, detail: String },

    #[error("incomplete joint action: missing agent {agent}")]
    IncompleteJointAction { agent: NodeId },

    #[error("unknown agent {agent} in joint action")]
    UnknownAgent { agent: NodeId },

    #[error("degenerate distance: free-space gain undefined for coincident positions")]
    DegenerateDistance,

    #[error("unusable channel: SNR {snr_db} dB yields non-positive rate")]
    UnusableChannel { snr_db: f64 },

    #[error("degenerate capacity: node {node} has queue capacity 0")]
    DegenerateCapacity { node: NodeId },

    #[error("non-finite reward")]
    NonFiniteReward,

    #[error("empty job list in trace file")]
    EmptyTrace,

    #[error("trace parse error at line {line}: {detail}")]
    TraceParse { line: usize, detail: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("empty episode batch")]
    EmptyBatch,

    #[error("q-table parse error at line {line}: {detail}")]
    TableParse { line: usize, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
