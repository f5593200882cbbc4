//! Experiment configuration: raw JSON form, flag overrides and validation.

use std::fmt;

use ccpr::codes::{self, GroupPlan, SchemeSpec};
use ccpr::decoder::Tolerance;
use ccpr::error::Error as CoreError;
use ccpr::model::{DegreeVector, Mode};
use ccpr::regression::DataSpec;
use ccpr::sim::{LatencyModel, MonteCarloConfig};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 20_190_611;
pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_MU: f64 = 10.0;
pub const DEFAULT_ALPHA: f64 = 0.01;

pub const SCHEMES: [&str; 6] = ["rcs", "rcs-general", "mcc", "uc-mmc", "gc", "custom"];

/// The configuration as written in JSON; every field optional so that files
/// and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Degree vector; `m` is accepted as an alias.
    #[serde(alias = "m", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(rename = "Kbar", default, skip_serializing_if = "Option::is_none")]
    pub kbar: Option<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<usize>>,
    /// 1-based circular-shift offsets, one per assignment row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation_points: Option<Vec<f64>>,
    /// `grid[order][worker]` lists 1-based block indices summed by that task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Vec<Vec<usize>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Draw a new random code every trial (default) or keep one construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redraw: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<RawTraining>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTraining {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<u64>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )+
    };
}

impl RawConfig {
    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: RawConfig) -> RawConfig {
        let training = match (self.training.take(), top.training.clone()) {
            (Some(mut base), Some(t)) => {
                overlay!(base, t, dim, samples, eta, iterations, noise_std, runs);
                Some(base)
            }
            (base, t) => t.or(base),
        };
        overlay!(
            self, top, scheme, mode, k, d, r, kbar, n, z, offsets, evaluation_points, grid, blocks, q, mu, alpha,
            trials, seed, redraw
        );
        self.training = training;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            ConfigError::Json(_) => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub data: DataSpec,
    pub eta: f64,
    pub iterations: usize,
    pub runs: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            data: DataSpec {
                samples: 2000,
                dim: 400,
                noise_std: 0.01,
            },
            eta: 0.1,
            iterations: 50,
            runs: 1,
        }
    }
}

impl TrainingConfig {
    fn to_raw(self) -> RawTraining {
        RawTraining {
            dim: Some(self.data.dim),
            samples: Some(self.data.samples),
            eta: Some(self.eta),
            iterations: Some(self.iterations),
            noise_std: Some(self.data.noise_std),
            runs: Some(self.runs),
        }
    }
}

/// A fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Canonical raw form: defaults filled in, unused fields dropped.
    resolved: RawConfig,
    pub scheme: SchemeSpec,
    pub tolerance: Tolerance,
    pub latency: LatencyModel,
    pub trials: u64,
    pub seed: u64,
    pub redraw: bool,
    pub training: Option<TrainingConfig>,
}

impl ExperimentConfig {
    pub fn resolved(&self) -> &RawConfig {
        &self.resolved
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.resolved).expect("raw configs always serialize")
    }

    pub fn monte_carlo(&self) -> MonteCarloConfig {
        MonteCarloConfig {
            scheme: self.scheme.clone(),
            tolerance: self.tolerance,
            latency: self.latency,
            redraw_code: self.redraw,
        }
    }

    /// The training block, defaulted when absent; the resolved form then records it.
    pub fn with_training(mut self) -> Self {
        let training = self.training.unwrap_or_default();
        self.training = Some(training);
        self.resolved.training = Some(training.to_raw());
        self
    }
}

pub fn parse_str(json: &str) -> Result<ExperimentConfig, ConfigError> {
    validate(serde_json::from_str(json)?)
}

/// Reads the JSON text `file` (if any), applies `flags` on top and validates.
pub fn parse_layers(file: Option<&str>, flags: RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let base = match file {
        Some(text) => serde_json::from_str(text)?,
        None => RawConfig::default(),
    };
    validate(base.overlay(flags))
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn require<T: Clone>(&mut self, value: &Option<T>, path: &str) -> Option<T> {
        if value.is_none() {
            self.push(path, "missing required field");
        }
        value.clone()
    }

    fn positive(&mut self, value: Option<usize>, path: &str) -> Option<usize> {
        match value {
            Some(0) => {
                self.push(path, "must be at least 1");
                None
            }
            v => v,
        }
    }
}

fn parse_mode(c: &mut Checker, mode: &Option<String>) -> Mode {
    match mode.as_deref() {
        None | Some("coded-computation") => Mode::CodedComputation,
        Some("coded-communication") => Mode::CodedCommunication,
        Some(other) => {
            c.push("mode", format!("unknown mode {other:?}; expected coded-computation or coded-communication"));
            Mode::CodedComputation
        }
    }
}

fn degrees(c: &mut Checker, d: &Option<Vec<usize>>) -> Option<DegreeVector> {
    let d = c.require(d, "d")?;
    DegreeVector::new(d).map_err(|e| c.push("d", e.to_string())).ok()
}

fn zero_based(c: &mut Checker, values: &[usize], path: &str) -> Option<Vec<usize>> {
    if values.contains(&0) {
        c.push(path, "entries are 1-based");
        return None;
    }
    Some(values.iter().map(|v| v - 1).collect())
}

/// Validates `raw`, collecting every violation before giving up.
pub fn validate(raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let mut c = Checker { violations: Vec::new() };
    let scheme_name = c.require(&raw.scheme, "scheme");
    if let Some(name) = &scheme_name {
        if !SCHEMES.contains(&name.as_str()) {
            c.push("scheme", format!("unknown scheme {name:?}; expected one of {}", SCHEMES.join(", ")));
        }
    }
    let k = c.require(&raw.k, "K");
    let k = c.positive(k, "K");

    let q = raw.q.unwrap_or(0.0);
    let tolerance = Tolerance::new(q).map_err(|e| c.push("q", e.to_string())).ok();
    let mu = raw.mu.unwrap_or(DEFAULT_MU);
    let alpha = raw.alpha.unwrap_or(DEFAULT_ALPHA);
    if !(mu > 0.0 && mu.is_finite()) {
        c.push("mu", format!("must be positive, got {mu}"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        c.push("alpha", format!("must be positive, got {alpha}"));
    }
    let trials = raw.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        c.push("trials", "must be at least 1");
    }
    let training = raw.training.as_ref().map(|t| {
        let d = TrainingConfig::default();
        let cfg = TrainingConfig {
            data: DataSpec {
                samples: t.samples.unwrap_or(d.data.samples),
                dim: t.dim.unwrap_or(d.data.dim),
                noise_std: t.noise_std.unwrap_or(d.data.noise_std),
            },
            eta: t.eta.unwrap_or(d.eta),
            iterations: t.iterations.unwrap_or(d.iterations),
            runs: t.runs.unwrap_or(d.runs),
        };
        if cfg.data.samples == 0 {
            c.push("training.samples", "must be at least 1");
        }
        if cfg.data.dim == 0 {
            c.push("training.dim", "must be at least 1");
        }
        if !(cfg.eta > 0.0 && cfg.eta.is_finite()) {
            c.push("training.eta", format!("must be positive, got {}", cfg.eta));
        }
        if !(cfg.data.noise_std >= 0.0 && cfg.data.noise_std.is_finite()) {
            c.push("training.noise_std", "must be non-negative");
        }
        if cfg.runs == 0 {
            c.push("training.runs", "must be at least 1");
        }
        cfg
    });

    let mut resolved = RawConfig {
        scheme: scheme_name.clone(),
        k,
        q: Some(q),
        mu: Some(mu),
        alpha: Some(alpha),
        trials: Some(trials),
        seed: Some(raw.seed.unwrap_or(DEFAULT_SEED)),
        redraw: Some(raw.redraw.unwrap_or(true)),
        training: training.map(TrainingConfig::to_raw),
        ..RawConfig::default()
    };

    let scheme = scheme_name
        .as_deref()
        .and_then(|name| scheme_spec(&mut c, name, k, &raw, &mut resolved));
    if let Some(spec) = &scheme {
        if c.violations.is_empty() {
            check_construction(&mut c, spec);
        }
    }
    match (scheme, tolerance) {
        (Some(scheme), Some(tolerance)) if c.violations.is_empty() => Ok(ExperimentConfig {
            scheme,
            tolerance,
            latency: LatencyModel::new(mu, alpha).expect("checked above"),
            trials,
            seed: resolved.seed.expect("set above"),
            redraw: resolved.redraw.expect("set above"),
            training,
            resolved,
        }),
        _ => Err(ConfigError::Invalid(c.violations)),
    }
}

/// Checks the fields of scheme `name`; returns a spec only when `k` is known too.
fn scheme_spec(c: &mut Checker, name: &str, k: Option<usize>, raw: &RawConfig, out: &mut RawConfig) -> Option<SchemeSpec> {
    let mode = parse_mode(c, &raw.mode);
    match name {
        "rcs" => {
            let degrees = degrees(c, &raw.d);
            let shifts = raw.offsets.as_ref().and_then(|o| zero_based(c, o, "offsets"));
            out.mode = Some(mode.to_string());
            out.d = raw.d.clone();
            out.offsets = raw.offsets.clone();
            Some(SchemeSpec::Rcs {
                workers: k?,
                degrees: degrees?,
                mode,
                shifts,
            })
        }
        "rcs-general" => {
            let degrees = degrees(c, &raw.d);
            let groups = c.require(&raw.n, "N");
            let groups = c.positive(groups, "N");
            let z = c.require(&raw.z, "z");
            if let (Some(d), Some(z)) = (&degrees, &z) {
                if d.total() != z.len() {
                    c.push("z", format!("has {} entries but the degree vector sums to {}", z.len(), d.total()));
                }
            }
            let plan = match (groups, &z) {
                (Some(n), Some(z)) => GroupPlan::new(n, z).map_err(|e| c.push("z", e.to_string())).ok(),
                _ => None,
            };
            let shifts = raw.offsets.as_ref().and_then(|o| zero_based(c, o, "offsets"));
            out.d = raw.d.clone();
            out.n = groups;
            out.z = z;
            out.offsets = raw.offsets.clone();
            Some(SchemeSpec::GeneralizedRcs {
                workers: k?,
                plan: plan?,
                degrees: degrees?,
                shifts,
            })
        }
        "mcc" => {
            let kbar = match (raw.kbar, raw.r) {
                (Some(kbar), _) => Some(kbar),
                (None, Some(0)) => {
                    c.push("r", "must be at least 1");
                    None
                }
                (None, Some(r)) => Some(k?.div_ceil(r)),
                (None, None) => {
                    c.push("Kbar", "missing required field (or give r)");
                    None
                }
            };
            let kbar = c.positive(kbar, "Kbar")?;
            let k = k?;
            if kbar > k {
                c.push("Kbar", format!("must not exceed K={k}"));
            }
            let points = raw.evaluation_points.clone().unwrap_or_else(|| codes::default_evaluation_points(k));
            out.kbar = Some(kbar);
            out.evaluation_points = raw.evaluation_points.clone();
            Some(SchemeSpec::Mcc {
                workers: k,
                kbar,
                points,
            })
        }
        "uc-mmc" | "gc" => {
            let load = c.require(&raw.r, "r");
            let load = c.positive(load, "r")?;
            let k = k?;
            out.r = Some(load);
            if name == "gc" {
                Some(SchemeSpec::Gc { workers: k, load })
            } else {
                out.mode = Some(mode.to_string());
                Some(SchemeSpec::UcMmc { workers: k, load, mode })
            }
        }
        "custom" => {
            let grid = c.require(&raw.grid, "grid")?;
            let k = k?;
            let blocks = raw.blocks.unwrap_or(k);
            let mut zero = Vec::new();
            for (j, row) in grid.iter().enumerate() {
                if row.len() != k {
                    c.push(&format!("grid[{j}]"), format!("has {} tasks but K={k}", row.len()));
                }
                for (w, task) in row.iter().enumerate() {
                    if task.iter().any(|&b| b == 0 || b > blocks) {
                        c.push(&format!("grid[{j}][{w}]"), format!("block indices must lie in 1..={blocks}"));
                    }
                }
                zero.push(row.iter().map(|t| t.iter().map(|b| b.saturating_sub(1)).collect()).collect::<Vec<Vec<usize>>>());
            }
            out.mode = Some(mode.to_string());
            out.grid = Some(grid);
            out.blocks = Some(blocks);
            if !c.violations.is_empty() {
                return None;
            }
            match codes::custom_assignment(&zero, blocks, mode) {
                Ok(a) => Some(SchemeSpec::Fixed(a)),
                Err(e) => {
                    c.push("grid", e.to_string());
                    None
                }
            }
        }
        _ => None,
    }
}

/// Builds the scheme once so that infeasible parameters surface at parse time.
fn check_construction(c: &mut Checker, spec: &SchemeSpec) {
    let mut rng = ccpr::sim::trial_rng(0, 0);
    if let Err(e) = spec.build(&mut rng) {
        let path = match &e {
            CoreError::NotEnoughShifts { .. } => "d",
            CoreError::InvalidGroupPlan(_) => "z",
            CoreError::InvalidShifts(_) => "offsets",
            CoreError::InvalidEvaluationPoints(_) => "evaluation_points",
            CoreError::InvalidLoad { .. } => "r",
            CoreError::IndivisibleWorkers { .. } => "Kbar",
            CoreError::InvalidAssignment(_) => "grid",
            _ => "scheme",
        };
        c.push(path, e.to_string());
    }
}
