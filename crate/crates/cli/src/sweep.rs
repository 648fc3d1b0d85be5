//! Sweep runner: one CSV row per (axis value, policy) cell.

use anyhow::{bail, Context, Result};
use edgesim_core::{
    emit_csv, run_episode, summarize, ConfigFile, CsvRow, EpisodeMetrics, PolicyKind, SimConfig,
};
use rayon::prelude::*;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Lambda,
    Clusters,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "lambda" => Ok(SweepAxis::Lambda),
            "clusters" => Ok(SweepAxis::Clusters),
            other => bail!("unknown sweep axis: {other} (expected lambda or clusters)"),
        }
    }

    fn scenario(&self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda_sweep",
            SweepAxis::Clusters => "cluster_sweep",
        }
    }
}

/// A full sweep: axis values crossed with policies, `episodes` runs per
/// cell, episode seeds laddered as `base_seed + episode_index`.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub episodes: usize,
    pub base: ConfigFile,
    pub base_dir: Option<PathBuf>,
    pub base_seed: u64,
}

impl SweepSpec {
    fn cell_config(&self, value: f64) -> Result<SimConfig> {
        let mut file = self.base.clone();
        match self.axis {
            SweepAxis::Lambda => file.lambda = Some(value),
            SweepAxis::Clusters => {
                match file.topology.mode.as_deref() {
                    None => file.topology.mode = Some("clusters".to_string()),
                    Some("clusters") => {}
                    Some(other) => {
                        bail!("cluster sweep needs topology.mode = \"clusters\", found {other}")
                    }
                }
                file.topology.n_clusters = Some(value as usize);
            }
        }
        file.seed = Some(self.base_seed);
        Ok(file.build(self.base_dir.as_deref())?)
    }

    fn cell_columns(&self, value: f64, config: &SimConfig) -> (f64, usize) {
        match self.axis {
            SweepAxis::Lambda => {
                let clusters = match self.base.topology.mode.as_deref() {
                    Some("clusters") => self.base.topology.n_clusters.unwrap_or(1),
                    _ => 0,
                };
                (value, clusters)
            }
            SweepAxis::Clusters => (config.lambda, value as usize),
        }
    }
}

/// Runs every episode of one cell, seeds `base_seed + i`.
pub fn run_cell(
    config: &SimConfig,
    kind: &PolicyKind,
    episodes: usize,
    base_seed: u64,
) -> Result<Vec<EpisodeMetrics>> {
    (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut cfg = config.clone();
            cfg.seed = base_seed + i as u64;
            run_episode(&cfg, kind).map_err(anyhow::Error::from)
        })
        .collect()
}

/// Executes the sweep and returns CSV rows, values outer, policies inner.
/// Cells run in parallel; row order and content are deterministic.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CsvRow>> {
    if spec.values.is_empty() {
        bail!("sweep needs at least one axis value");
    }
    if spec.policies.is_empty() {
        bail!("sweep needs at least one policy");
    }
    let cells: Vec<(f64, PolicyKind)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.policies.iter().map(move |p| (v, p.clone())))
        .collect();

    cells
        .par_iter()
        .map(|(value, kind)| {
            let config = spec.cell_config(*value).with_context(|| {
                format!(
                    "cell {}={value} policy={}",
                    spec.axis.scenario(),
                    kind.name()
                )
            })?;
            let batch =
                run_cell(&config, kind, spec.episodes, spec.base_seed).with_context(|| {
                    format!(
                        "cell {}={value} policy={}",
                        spec.axis.scenario(),
                        kind.name()
                    )
                })?;
            let summary = summarize(&batch)?;
            let (lambda, clusters) = spec.cell_columns(*value, &config);
            Ok(CsvRow {
                scenario: spec.axis.scenario().to_string(),
                policy: kind.name().to_string(),
                lambda,
                clusters,
                seed: spec.base_seed,
                summary,
            })
        })
        .collect()
}

pub fn sweep_csv(spec: &SweepSpec) -> Result<String> {
    Ok(emit_csv(&run_sweep(spec)?))
}
