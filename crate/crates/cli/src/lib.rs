//! Experiment runner library behind the `edgesim` binary: sweeps, tabular
//! training, the TCP agent bridge, and config plumbing.

pub mod bridge;
pub mod configio;
pub mod fixtures;
pub mod sweep;
pub mod trainer;

pub use bridge::{scripted_local_session, serve, WireMetrics};
pub use configio::load_config_file;
pub use fixtures::synth_trace;
pub use sweep::{run_cell, run_sweep, sweep_csv, SweepAxis, SweepSpec};
pub use trainer::{curve_csv, evaluate, train_q, CurvePoint, TrainOutcome};
