//! Subcommand bodies and their file outputs.
//!
//! CSV files open with two comment lines, `# seed=<u64>` and `# config=<json>`,
//! followed by a header row. JSON files carry `seed` and `config` fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ccpr::codes::AssignmentMatrix;
use ccpr::exec::Execution;
use ccpr::model::{ComputationAssignment, RecoveryRule};
use ccpr::regression::{self, IterationRecord, TrainConfig, Trajectory};
use ccpr::sim::enumerate::{enumerate_all, TypeCount};
use ccpr::sim::monte_carlo::FIXED_CODE_STREAM;
use ccpr::sim::{monte_carlo_with, trial_rng, MonteCarloReport};
use serde::Serialize;

use crate::config::{ExperimentConfig, RawConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] ccpr::error::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RunError>;

/// The code a configuration denotes when it is not re-drawn per trial.
pub fn fixed_assignment(cfg: &ExperimentConfig) -> Result<(ComputationAssignment, Option<AssignmentMatrix>)> {
    Ok(cfg.scheme.build_with_matrix(&mut trial_rng(cfg.seed, FIXED_CODE_STREAM))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerateOutput {
    pub max_score: u32,
    pub rows: Vec<TypeCount>,
}

/// Successful score-vector counts per cumulative type; types with no
/// successful vector are dropped unless `all_types` is set.
pub fn enumerate(cfg: &ExperimentConfig, all_types: bool) -> Result<EnumerateOutput> {
    let (assignment, _) = fixed_assignment(cfg)?;
    let rows = enumerate_all(&assignment, cfg.tolerance)?
        .into_iter()
        .filter(|r| all_types || r.successful > 0)
        .collect();
    Ok(EnumerateOutput {
        max_score: assignment.max_score(),
        rows,
    })
}

pub fn simulate(cfg: &ExperimentConfig, execution: Execution) -> Result<MonteCarloReport> {
    Ok(monte_carlo_with(&cfg.monte_carlo(), cfg.trials, cfg.seed, execution)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub mean: Trajectory,
    pub runs: Vec<Trajectory>,
}

/// Averaged training trajectory; `cfg` must carry a training block.
pub fn train(cfg: &ExperimentConfig, execution: Execution) -> Result<TrainOutput> {
    let training = cfg.training.unwrap_or_default();
    let config = TrainConfig {
        scheme: cfg.scheme.clone(),
        tolerance: cfg.tolerance,
        latency: cfg.latency,
        eta: training.eta,
        iterations: training.iterations,
        redraw_code: cfg.redraw,
        seed: cfg.seed,
    };
    let runs = regression::train_runs(&config, training.data, training.runs, execution)?;
    Ok(TrainOutput {
        mean: regression::average(&runs),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodedTask {
    pub order: usize,
    /// 1-based block indices in construction order.
    pub blocks: Vec<usize>,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodedWorker {
    pub worker: usize,
    pub tasks: Vec<EncodedTask>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodeOutput {
    pub seed: u64,
    pub config: RawConfig,
    pub workers: usize,
    pub orders: usize,
    pub total_blocks: usize,
    pub mode: String,
    pub unit_cost: f64,
    pub message_schedule: Vec<u32>,
    pub recovery: RecoveryRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<usize>>,
    pub assignment: Vec<EncodedWorker>,
}

pub fn encode(cfg: &ExperimentConfig) -> Result<EncodeOutput> {
    let (a, matrix) = fixed_assignment(cfg)?;
    let assignment = (0..a.workers())
        .map(|w| EncodedWorker {
            worker: w + 1,
            tasks: a
                .worker_tasks(w)
                .into_iter()
                .enumerate()
                .map(|(j, task)| EncodedTask {
                    order: j + 1,
                    blocks: task.blocks().map(|b| b + 1).collect(),
                    coefficients: task.entries().iter().map(|e| e.1).collect(),
                })
                .collect(),
        })
        .collect();
    Ok(EncodeOutput {
        seed: cfg.seed,
        config: cfg.resolved().clone(),
        workers: a.workers(),
        orders: a.orders(),
        total_blocks: a.total_blocks(),
        mode: a.mode().to_string(),
        unit_cost: a.unit_cost(),
        message_schedule: a.message_schedule(),
        recovery: a.recovery().clone(),
        offsets: matrix.map(|m| m.offsets()),
        assignment,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_with_provenance(path: &Path, cfg: &ExperimentConfig) -> Result<csv::Writer<BufWriter<File>>> {
    let mut file = create(path)?;
    let io = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    writeln!(file, "# seed={}", cfg.seed).map_err(io)?;
    writeln!(file, "# config={}", cfg.to_json()).map_err(io)?;
    Ok(csv::Writer::from_writer(file))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file).and_then(|_| file.flush()).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Columns: `index, N_r, …, N_0, score_vectors, successful`.
pub fn write_enumerate(path: &Path, cfg: &ExperimentConfig, out: &EnumerateOutput) -> Result<()> {
    let mut w = csv_with_provenance(path, cfg)?;
    let mut header = vec!["index".to_string()];
    header.extend((0..=out.max_score).rev().map(|s| format!("N_{s}")));
    header.extend(["score_vectors".to_string(), "successful".to_string()]);
    w.write_record(&header)?;
    for (i, row) in out.rows.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(row.ty.table_order().iter().map(usize::to_string));
        rec.extend([row.score_vectors.to_string(), row.successful.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    seed: u64,
    config: &'a RawConfig,
    trials: u64,
    mean_time: f64,
    mean_messages: f64,
    success_rate: f64,
    time_percentiles: ccpr::sim::monte_carlo::Percentiles,
    message_percentiles: ccpr::sim::monte_carlo::Percentiles,
}

/// Writes `trials.csv` (one row per trial) and `summary.json` into `dir`.
///
/// Trial columns: `trial, completion_time, messages_received, recovered_blocks,
/// redundant_messages, success`.
pub fn write_simulate(dir: &Path, cfg: &ExperimentConfig, report: &MonteCarloReport) -> Result<()> {
    let path = dir.join("trials.csv");
    let mut w = csv_with_provenance(&path, cfg)?;
    for r in &report.records {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| RunError::Io { path, source })?;
    write_json(
        &dir.join("summary.json"),
        &SimulateSummary {
            seed: cfg.seed,
            config: cfg.resolved(),
            trials: report.trials,
            mean_time: report.mean_time,
            mean_messages: report.mean_messages,
            success_rate: report.success_rate,
            time_percentiles: report.time_percentiles,
            message_percentiles: report.message_percentiles,
        },
    )
}

/// Columns: `iteration, loss, iteration_time, messages, recovered_fraction`;
/// row 0 holds the initial loss. Values are means over runs.
pub fn write_train(path: &Path, cfg: &ExperimentConfig, trajectory: &Trajectory) -> Result<()> {
    let mut w = csv_with_provenance(path, cfg)?;
    w.serialize(IterationRecord {
        iteration: 0,
        loss: trajectory.initial_loss,
        iteration_time: 0.0,
        messages: 0.0,
        recovered_fraction: 0.0,
    })?;
    for r in &trajectory.records {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_encode(path: &Path, out: &EncodeOutput) -> Result<()> {
    write_json(path, out)
}

/// Reads the `# config=` line back from a CSV written by this module.
pub fn embedded_config(csv_text: &str) -> Option<&str> {
    csv_text.lines().find_map(|l| l.strip_prefix("# config="))
}
