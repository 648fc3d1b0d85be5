//! Episode metric accumulators, batch summaries, and CSV emission.

use crate::domain::NodeId;
use crate::error::{Result, SimError};
use std::collections::BTreeMap;

/// Per-episode counters. `generated` must always equal completed + drops +
/// resident tasks; `summarize` enforces this.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeMetrics {
    pub generated: u64,
    pub completed: u64,
    pub dropped_overflow: u64,
    pub dropped_deadline: u64,
    pub overloads_by_node: BTreeMap<NodeId, u64>,
    /// Response times of completed tasks, steps.
    pub response_times: Vec<u64>,
    pub reward_by_agent: BTreeMap<NodeId, f64>,
    /// Tasks still in the system when the episode ended.
    pub resident_at_end: u64,
}

impl EpisodeMetrics {
    pub fn overloads_total(&self) -> u64 {
        self.overloads_by_node.values().sum()
    }

    pub fn dropped_total(&self) -> u64 {
        self.dropped_overflow + self.dropped_deadline
    }

    /// Mean response time across completed tasks; absent when nothing
    /// completed.
    pub fn mean_response(&self) -> Option<f64> {
        if self.response_times.is_empty() {
            return None;
        }
        Some(
            self.response_times.iter().map(|&r| r as f64).sum::<f64>()
                / self.response_times.len() as f64,
        )
    }

    /// Mean cumulative reward across agents.
    pub fn mean_agent_reward(&self) -> f64 {
        if self.reward_by_agent.is_empty() {
            return 0.0;
        }
        self.reward_by_agent.values().sum::<f64>() / self.reward_by_agent.len() as f64
    }

    pub fn conservation_check(&self) -> std::result::Result<(), String> {
        let accounted =
            self.completed + self.dropped_overflow + self.dropped_deadline + self.resident_at_end;
        if accounted != self.generated {
            return Err(format!(
                "task conservation violated: generated {} != completed {} + overflow {} + deadline {} + resident {}",
                self.generated, self.completed, self.dropped_overflow, self.dropped_deadline, self.resident_at_end
            ));
        }
        Ok(())
    }
}

/// Mean/std aggregates over a batch of episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub episodes: usize,
    pub overloads_mean: f64,
    pub overloads_std: f64,
    /// Absent when no episode completed a task.
    pub resp_mean: Option<f64>,
    pub resp_std: Option<f64>,
    pub dropped_mean: f64,
    pub dropped_std: f64,
    /// Pooled drop fraction: total dropped / total generated.
    pub drop_pct: f64,
    pub reward_mean: f64,
    pub generated_mean: f64,
    pub completed_mean: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates a non-empty batch. Aborts with a diagnostic if any episode
/// violates task conservation; that always indicates an engine bug.
pub fn summarize(batch: &[EpisodeMetrics]) -> Result<BatchSummary> {
    if batch.is_empty() {
        return Err(SimError::EmptyBatch);
    }
    for (i, ep) in batch.iter().enumerate() {
        if let Err(msg) = ep.conservation_check() {
            panic!("episode {i}: {msg}");
        }
    }
    let overloads: Vec<f64> = batch.iter().map(|e| e.overloads_total() as f64).collect();
    let dropped: Vec<f64> = batch.iter().map(|e| e.dropped_total() as f64).collect();
    let responses: Vec<f64> = batch.iter().filter_map(|e| e.mean_response()).collect();
    let rewards: Vec<f64> = batch.iter().map(|e| e.mean_agent_reward()).collect();
    let generated: Vec<f64> = batch.iter().map(|e| e.generated as f64).collect();
    let completed: Vec<f64> = batch.iter().map(|e| e.completed as f64).collect();

    let (overloads_mean, overloads_std) = mean_std(&overloads);
    let (dropped_mean, dropped_std) = mean_std(&dropped);
    let (reward_mean, _) = mean_std(&rewards);
    let (generated_mean, _) = mean_std(&generated);
    let (completed_mean, _) = mean_std(&completed);
    let (resp_mean, resp_std) = if responses.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&responses);
        (Some(m), Some(s))
    };

    let total_generated: u64 = batch.iter().map(|e| e.generated).sum();
    let total_dropped: u64 = batch.iter().map(|e| e.dropped_total()).sum();
    let drop_pct = if total_generated == 0 {
        0.0
    } else {
        total_dropped as f64 / total_generated as f64
    };

    Ok(BatchSummary {
        episodes: batch.len(),
        overloads_mean,
        overloads_std,
        resp_mean,
        resp_std,
        dropped_mean,
        dropped_std,
        drop_pct,
        reward_mean,
        generated_mean,
        completed_mean,
    })
}

pub const CSV_HEADER: &str = "scenario,policy,lambda,clusters,seed,episodes,overloads_mean,overloads_std,resp_mean,resp_std,dropped_mean,dropped_std,drop_pct,reward_mean";

/// One CSV row: a (scenario, policy) cell plus its batch summary.
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub scenario: String,
    pub policy: String,
    pub lambda: f64,
    /// 0 for non-cluster topologies.
    pub clusters: usize,
    pub seed: u64,
    pub summary: BatchSummary,
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        let s = &self.summary;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.policy,
            sig6(self.lambda),
            self.clusters,
            self.seed,
            s.episodes,
            sig6(s.overloads_mean),
            sig6(s.overloads_std),
            s.resp_mean.map(sig6).unwrap_or_default(),
            s.resp_std.map(sig6).unwrap_or_default(),
            sig6(s.dropped_mean),
            sig6(s.dropped_std),
            sig6(s.drop_pct),
            sig6(s.reward_mean),
        )
    }
}

pub fn emit_csv(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    out
}

/// Renders with 6 significant digits, trimming trailing zeros; switches to
/// scientific notation outside [1e-4, 1e6).
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x))
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(
        generated: u64,
        completed: u64,
        overflow: u64,
        deadline: u64,
        responses: &[u64],
    ) -> EpisodeMetrics {
        EpisodeMetrics {
            generated,
            completed,
            dropped_overflow: overflow,
            dropped_deadline: deadline,
            response_times: responses.to_vec(),
            resident_at_end: generated - completed - overflow - deadline,
            ..EpisodeMetrics::default()
        }
    }

    #[test]
    fn identical_episodes_have_zero_std() {
        let ep = episode(10, 6, 2, 1, &[4, 4, 4, 4, 4, 4]);
        let summary = summarize(&[ep.clone(), ep.clone(), ep]).unwrap();
        assert_eq!(summary.overloads_std, 0.0);
        assert_eq!(summary.dropped_std, 0.0);
        assert_eq!(summary.resp_std, Some(0.0));
    }

    #[test]
    fn response_means_average_across_episodes() {
        let a = episode(4, 2, 0, 0, &[4, 4]);
        let b = episode(4, 2, 0, 0, &[6, 6]);
        let summary = summarize(&[a, b]).unwrap();
        assert_eq!(summary.resp_mean, Some(5.0));
    }

    #[test]
    fn summarize_is_permutation_invariant() {
        let a = episode(4, 2, 1, 0, &[3, 9]);
        let b = episode(7, 5, 0, 1, &[2, 2, 2, 4, 4]);
        let c = episode(1, 0, 0, 0, &[]);
        let fwd = summarize(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let rev = summarize(&[c, b, a]).unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(matches!(summarize(&[]), Err(SimError::EmptyBatch)));
    }

    #[test]
    #[should_panic(expected = "task conservation violated")]
    fn conservation_violation_aborts() {
        let mut ep = episode(5, 1, 0, 0, &[2]);
        ep.resident_at_end = 0; // 4 tasks unaccounted for
        let _ = summarize(&[ep]);
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1000.0), "1000");
        assert_eq!(sig6(22.577249662542123), "22.5772");
        assert_eq!(sig6(0.17), "0.17");
        assert_eq!(sig6(1e-6), "1e-6");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(-4.605170185988091), "-4.60517");
        assert_eq!(sig6(999999.5), "1e6");
    }

    #[test]
    fn csv_header_is_pinned() {
        assert_eq!(
            CSV_HEADER,
            "scenario,policy,lambda,clusters,seed,episodes,overloads_mean,overloads_std,resp_mean,resp_std,dropped_mean,dropped_std,drop_pct,reward_mean"
        );
    }
}
