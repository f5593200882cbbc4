use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codes::SchemeSpec;
use crate::decoder::Tolerance;
use crate::error::Result;
use crate::exec::{map_indexed, Execution};
use crate::model::ComputationAssignment;
use crate::sim::iteration::simulate_iteration;
use crate::sim::latency::LatencyModel;

/// Stream reserved for the single code draw when codes are not re-drawn per trial.
pub const FIXED_CODE_STREAM: u64 = u64::MAX;

/// Random stream for trial `index` under `seed`; independent of scheduling.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub scheme: SchemeSpec,
    pub tolerance: Tolerance,
    pub latency: LatencyModel,
    /// Draw a fresh random code in every trial (only matters for random schemes).
    pub redraw_code: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub completion_time: f64,
    pub messages_received: usize,
    pub recovered_blocks: usize,
    pub redundant_messages: usize,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles.
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let at = |p: f64| {
            if sorted.is_empty() {
                return 0.0;
            }
            let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
            sorted[rank.min(sorted.len()) - 1]
        };
        Self {
            p50: at(0.5),
            p90: at(0.9),
            p99: at(0.99),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub trials: u64,
    pub mean_time: f64,
    pub mean_messages: f64,
    pub success_rate: f64,
    pub time_percentiles: Percentiles,
    pub message_percentiles: Percentiles,
    pub records: Vec<TrialRecord>,
}

pub fn monte_carlo(config: &MonteCarloConfig, trials: u64, seed: u64) -> Result<MonteCarloReport> {
    monte_carlo_with(config, trials, seed, Execution::default())
}

/// Runs `trials` independent iterations; trial `i` uses [`trial_rng`]`(seed, i)`
/// for its code draw (when re-drawing) followed by the worker speeds.
pub fn monte_carlo_with(config: &MonteCarloConfig, trials: u64, seed: u64, execution: Execution) -> Result<MonteCarloReport> {
    let fixed: Option<ComputationAssignment> = if config.redraw_code && config.scheme.is_random() {
        None
    } else {
        Some(config.scheme.build(&mut trial_rng(seed, FIXED_CODE_STREAM))?)
    };
    let records = map_indexed(trials, execution, |trial| -> Result<TrialRecord> {
        let mut rng = trial_rng(seed, trial);
        let drawn;
        let assignment = match &fixed {
            Some(a) => a,
            None => {
                drawn = config.scheme.build(&mut rng)?;
                &drawn
            }
        };
        let out = simulate_iteration(assignment, config.tolerance, &config.latency, &mut rng);
        Ok(TrialRecord {
            trial,
            completion_time: out.completion_time,
            messages_received: out.messages_received,
            recovered_blocks: out.recovered_count(),
            redundant_messages: out.redundant_messages,
            success: out.success,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(summarize(records))
}

fn summarize(records: Vec<TrialRecord>) -> MonteCarloReport {
    let n = records.len().max(1) as f64;
    let times: Vec<f64> = records.iter().map(|r| r.completion_time).collect();
    let messages: Vec<f64> = records.iter().map(|r| r.messages_received as f64).collect();
    MonteCarloReport {
        trials: records.len() as u64,
        mean_time: times.iter().sum::<f64>() / n,
        mean_messages: messages.iter().sum::<f64>() / n,
        success_rate: records.iter().filter(|r| r.success).count() as f64 / n,
        time_percentiles: Percentiles::of(&times),
        message_percentiles: Percentiles::of(&messages),
        records,
    }
}
