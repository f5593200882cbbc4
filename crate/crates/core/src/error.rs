use thiserror::Error;

/// Errors raised while building or validating codes, assignments and configurations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix with {rows} rows cannot be split into {blocks} equal row blocks")]
    IndivisibleRows { rows: usize, blocks: usize },

    #[error("degree vector is empty")]
    EmptyDegrees,

    #[error("degree vector violates criterion (i): first degree must be 1, got {0}")]
    FirstDegreeNotOne(usize),

    #[error("degree vector violates criterion (ii): degree at order {order} ({next}) is lower than at order {prev_order} ({prev})", prev_order = order - 1)]
    DecreasingDegree { order: usize, prev: usize, next: usize },

    #[error("total degree L={total} exceeds the {available} circular shifts available")]
    NotEnoughShifts { total: usize, available: usize },

    #[error("invalid shift list: {0}")]
    InvalidShifts(String),

    #[error("invalid group plan: {0}")]
    InvalidGroupPlan(String),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("{workers} workers cannot be split into groups of {kbar}")]
    IndivisibleWorkers { workers: usize, kbar: usize },

    #[error("invalid evaluation points: {0}")]
    InvalidEvaluationPoints(String),

    #[error("computation load r={load} must be between 1 and K={workers}")]
    InvalidLoad { load: usize, workers: usize },

    #[error("tolerance must lie in [0, 1], got {0}")]
    InvalidTolerance(f64),

    #[error("latency parameters must be positive, got mu={mu}, alpha={alpha}")]
    InvalidLatency { mu: f64, alpha: f64 },

    #[error("score {score} exceeds the maximum {max}")]
    ScoreOutOfRange { score: u32, max: u32 },

    #[error("exhaustive enumeration over {0} score vectors is too large")]
    EnumerationTooLarge(u128),

    #[error(transparent)]
    Decode(#[from] DecodeError),

    #[error("invalid training setup: {0}")]
    Training(String),
}

/// Failures of the numeric decoding path.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("block index {block} is out of range for {total} blocks")]
    BlockOutOfRange { block: usize, total: usize },

    #[error("numeric payloads were supplied for some messages but not others")]
    MissingPayload,

    #[error("payload length {got} does not match the expected {expected}")]
    PayloadLength { got: usize, expected: usize },

    #[error("singular system while solving group {0}")]
    Singular(usize),

    #[error("the gradient coding rule only certifies the full sum; per-block values are not available")]
    SumOnly,

    #[error("message from worker {worker} slot {slot} does not exist in the assignment")]
    UnknownMessage { worker: usize, slot: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
