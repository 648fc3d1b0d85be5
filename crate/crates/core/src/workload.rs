//! Task workload sources: parametric field distributions and trace files.

use crate::domain::{NodeId, TaskId, TaskInstance};
use crate::error::{Result, SimError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Distribution for a single task field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldDist {
    Constant(u64),
    /// Uniform over `lo..=hi`.
    UniformInt {
        lo: u64,
        hi: u64,
    },
}

impl FieldDist {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            FieldDist::Constant(v) => v,
            FieldDist::UniformInt { lo, hi } => rng.random_range(lo..=hi),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            FieldDist::Constant(v) => v as f64,
            FieldDist::UniformInt { lo, hi } => (lo as f64 + hi as f64) / 2.0,
        }
    }

    pub fn min(&self) -> u64 {
        match *self {
            FieldDist::Constant(v) => v,
            FieldDist::UniformInt { lo, .. } => lo,
        }
    }
}

/// Field distributions for one task shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFields {
    pub rho: FieldDist,
    pub alpha_in_bits: FieldDist,
    pub alpha_out_bits: FieldDist,
    pub xi: FieldDist,
    pub deadline: FieldDist,
}

impl TaskFields {
    pub fn constant(
        rho: u64,
        alpha_in_bits: u64,
        alpha_out_bits: u64,
        xi: u64,
        deadline: u64,
    ) -> Self {
        Self {
            rho: FieldDist::Constant(rho),
            alpha_in_bits: FieldDist::Constant(alpha_in_bits),
            alpha_out_bits: FieldDist::Constant(alpha_out_bits),
            xi: FieldDist::Constant(xi),
            deadline: FieldDist::Constant(deadline),
        }
    }

    fn violations(&self, prefix: &str, out: &mut Vec<String>) {
        if self.rho.min() == 0 {
            out.push(format!("{prefix}: rho must be > 0"));
        }
        if self.alpha_in_bits.min() == 0 {
            out.push(format!("{prefix}: alpha_in must be > 0"));
        }
        if self.alpha_out_bits.min() == 0 {
            out.push(format!("{prefix}: alpha_out must be > 0"));
        }
        if self.xi.min() < 1 {
            out.push(format!("{prefix}: xi must be >= 1"));
        }
        if self.deadline.min() == 0 {
            out.push(format!("{prefix}: deadline must be > 0"));
        }
    }
}

/// Where generated tasks draw their fields from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSource {
    Parametric(TaskFields),
    /// Trace-derived shapes, sampled uniformly per arrival.
    Trace(Vec<TaskFields>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTemplate {
    pub source: TaskSource,
}

impl Default for TaskTemplate {
    /// Stock defaults: 8e7 instructions, 150 Mbyte payloads, unit CPI,
    /// 100-step deadline.
    fn default() -> Self {
        Self {
            source: TaskSource::Parametric(TaskFields::constant(
                80_000_000,
                1_200_000_000,
                1_200_000_000,
                1,
                100,
            )),
        }
    }
}

impl TaskTemplate {
    pub fn parametric(fields: TaskFields) -> Self {
        Self {
            source: TaskSource::Parametric(fields),
        }
    }

    pub fn sample(
        &self,
        rng: &mut ChaCha8Rng,
        id: TaskId,
        origin_client: NodeId,
        created_at: u64,
    ) -> TaskInstance {
        let fields = match &self.source {
            TaskSource::Parametric(f) => f,
            TaskSource::Trace(shapes) => {
                let idx = rng.random_range(0..shapes.len());
                &shapes[idx]
            }
        };
        TaskInstance::new(
            id,
            fields.rho.sample(rng),
            fields.alpha_in_bits.sample(rng),
            fields.alpha_out_bits.sample(rng),
            fields.xi.sample(rng),
            fields.deadline.sample(rng),
            origin_client,
            created_at,
        )
    }

    /// Mean cycle demand `E[rho] * E[xi]`, used to convert a per-step cycle
    /// budget into queue-drain task units.
    pub fn mean_cycles(&self) -> f64 {
        match &self.source {
            TaskSource::Parametric(f) => f.rho.mean() * f.xi.mean(),
            TaskSource::Trace(shapes) => {
                if shapes.is_empty() {
                    return 0.0;
                }
                shapes
                    .iter()
                    .map(|f| f.rho.mean() * f.xi.mean())
                    .sum::<f64>()
                    / shapes.len() as f64
            }
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match &self.source {
            TaskSource::Parametric(f) => f.violations("task template", &mut out),
            TaskSource::Trace(shapes) => {
                if shapes.is_empty() {
                    out.push("trace template has no task shapes".to_string());
                }
                for (i, f) in shapes.iter().enumerate() {
                    f.violations(&format!("trace shape {i}"), &mut out);
                }
            }
        }
        out
    }
}

/// One job of a trace file: a flat list of task resource peaks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceJob {
    pub job_id: String,
    pub tasks: Vec<TraceTask>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceTask {
    /// Requested CPU cores.
    pub cores: u64,
    /// Duration in steps.
    pub duration: u64,
    /// Peak memory, bits.
    pub mem: u64,
}

/// Loads a JSON trace and flattens each job to one task shape.
///
/// Instructions = peak cores x peak duration x `ref_frequency`; both
/// payload sizes take the job's peak memory. Inter-task structure inside a
/// job is ignored.
pub fn load_trace(
    path: &Path,
    ref_frequency: u64,
    default_deadline: u64,
) -> Result<Vec<TaskFields>> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    load_trace_str(&text, ref_frequency, default_deadline)
}

pub fn load_trace_str(
    text: &str,
    ref_frequency: u64,
    default_deadline: u64,
) -> Result<Vec<TaskFields>> {
    let jobs: Vec<TraceJob> = serde_json::from_str(text).map_err(|e| SimError::TraceParse {
        line: e.line(),
        detail: e.to_string(),
    })?;
    if jobs.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    let mut shapes = Vec::with_capacity(jobs.len());
    for job in &jobs {
        if job.tasks.is_empty() {
            return Err(SimError::TraceParse {
                line: 0,
                detail: format!("job {} has no tasks", job.job_id),
            });
        }
        let cores = job.tasks.iter().map(|t| t.cores).max().unwrap();
        let duration = job.tasks.iter().map(|t| t.duration).max().unwrap();
        let mem = job.tasks.iter().map(|t| t.mem).max().unwrap();
        let rho = cores * duration * ref_frequency;
        if rho == 0 || mem == 0 {
            return Err(SimError::TraceParse {
                line: 0,
                detail: format!(
                    "job {} yields a degenerate task (zero work or memory)",
                    job.job_id
                ),
            });
        }
        shapes.push(TaskFields::constant(rho, mem, mem, 1, default_deadline));
    }
    Ok(shapes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn trace_instruction_conversion() {
        let text =
            r#"[{"job_id": "j1", "tasks": [{"cores": 2, "duration": 4, "mem": 100000000}]}]"#;
        let shapes = load_trace_str(text, 10_000_000, 100).unwrap();
        assert_eq!(shapes.len(), 1);
        assert_eq!(shapes[0].rho, FieldDist::Constant(80_000_000));
        assert_eq!(shapes[0].alpha_in_bits, FieldDist::Constant(100_000_000));
    }

    #[test]
    fn trace_takes_peak_memory() {
        let text = r#"[{"job_id": "j1", "tasks": [
            {"cores": 1, "duration": 1, "mem": 10000000},
            {"cores": 1, "duration": 1, "mem": 50000000},
            {"cores": 1, "duration": 1, "mem": 30000000}
        ]}]"#;
        let shapes = load_trace_str(text, 10_000_000, 100).unwrap();
        assert_eq!(shapes[0].alpha_in_bits, FieldDist::Constant(50_000_000));
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(matches!(
            load_trace_str("[]", 1, 1),
            Err(SimError::EmptyTrace)
        ));
    }

    #[test]
    fn malformed_trace_reports_line() {
        let text = "[\n{\"job_id\": \"j\",\n \"tasks\": oops}\n]";
        match load_trace_str(text, 1, 1) {
            Err(SimError::TraceParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_trace_file_is_an_io_error() {
        let err = load_trace(Path::new("/definitely/not/here.json"), 1, 1);
        assert!(matches!(err, Err(SimError::Io { .. })));
    }

    #[test]
    fn constant_template_samples_table_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let template = TaskTemplate::default();
        for id in 0..10 {
            let t = template.sample(&mut rng, id, 0, 3);
            assert_eq!(t.rho, 80_000_000);
            assert_eq!(t.xi, 1);
            assert_eq!(t.deadline, 100);
            assert_eq!(t.created_at, 3);
            assert_eq!(t.offload_chain, vec![0]);
        }
    }

    #[test]
    fn mean_cycles_over_trace_shapes() {
        let template = TaskTemplate {
            source: TaskSource::Trace(vec![
                TaskFields::constant(10, 1, 1, 2, 5),
                TaskFields::constant(30, 1, 1, 2, 5),
            ]),
        };
        assert_eq!(template.mean_cycles(), 40.0);
    }
}
