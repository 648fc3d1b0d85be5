//! Synthetic trace fixtures standing in for the external trace pipeline.

use edgesim_core::{TraceJob, TraceTask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generates a deterministic synthetic trace: jobs of 1-4 tasks with
/// core counts 1-4, durations 1-8 steps, and memories 10-200 Mbit.
pub fn synth_trace(jobs: usize, seed: u64) -> Vec<TraceJob> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..jobs)
        .map(|i| {
            let n_tasks = rng.random_range(1..=4);
            let tasks = (0..n_tasks)
                .map(|_| TraceTask {
                    cores: rng.random_range(1..=4),
                    duration: rng.random_range(1..=8),
                    mem: rng.random_range(10_000_000..=200_000_000),
                })
                .collect();
            TraceJob {
                job_id: format!("job-{i}"),
                tasks,
            }
        })
        .collect()
}
