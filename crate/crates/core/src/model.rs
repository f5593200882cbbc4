//! Shared domain types: row-block partitions, degree vectors, coded tasks,
//! computation assignments, score vectors and cumulative computation types.
//!
//! Block and worker indices are 0-based throughout the library. Anything
//! user-facing (CLI output, JSON dumps) converts to the 1-based numbering
//! `W_1, …, W_K` at the boundary.

use std::ops::Range;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `W` split row-wise into `groups × per_group` contiguous blocks of equal height.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    per_group: usize,
    groups: usize,
    rows_per_block: usize,
    blocks: Vec<Array2<f64>>,
}

impl BlockPartition {
    pub fn total_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn per_group(&self) -> usize {
        self.per_group
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn rows_per_block(&self) -> usize {
        self.rows_per_block
    }

    pub fn blocks(&self) -> &[Array2<f64>] {
        &self.blocks
    }

    pub fn block(&self, index: usize) -> &Array2<f64> {
        &self.blocks[index]
    }

    /// Blocks of group `g` (0-based), i.e. `W_{gK+1}, …, W_{(g+1)K}`.
    pub fn group(&self, g: usize) -> &[Array2<f64>] {
        &self.blocks[g * self.per_group..(g + 1) * self.per_group]
    }

    /// Vertical concatenation of all blocks in order.
    pub fn concat(&self) -> Array2<f64> {
        let views: Vec<ArrayView2<f64>> = self.blocks.iter().map(|b| b.view()).collect();
        concatenate(Axis(0), &views).expect("blocks share their column count")
    }
}

/// Splits `matrix` into `workers · groups` contiguous row blocks.
pub fn partition_matrix(matrix: &Array2<f64>, workers: usize, groups: usize) -> Result<BlockPartition> {
    let total = workers * groups;
    let rows = matrix.nrows();
    if total == 0 || !rows.is_multiple_of(total) {
        return Err(Error::IndivisibleRows { rows, blocks: total });
    }
    let rows_per_block = rows / total;
    let blocks = (0..total)
        .map(|b| {
            matrix
                .slice(s![b * rows_per_block..(b + 1) * rows_per_block, ..])
                .to_owned()
        })
        .collect();
    Ok(BlockPartition {
        per_group: workers,
        groups,
        rows_per_block,
        blocks,
    })
}

/// Per-order degrees `d_1 ≤ d_2 ≤ … ≤ d_r` with `d_1 = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DegreeVector(Vec<usize>);

impl DegreeVector {
    pub fn new(degrees: Vec<usize>) -> Result<Self> {
        validate_degree_vector(&degrees)?;
        Ok(Self(degrees))
    }

    pub fn degrees(&self) -> &[usize] {
        &self.0
    }

    /// Number of messages per worker.
    pub fn orders(&self) -> usize {
        self.0.len()
    }

    /// `L = Σ d_i`, the number of assignment-matrix rows.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// Row range of the assignment matrix that forms order `j`.
    pub fn rows_of_order(&self, order: usize) -> Range<usize> {
        let start: usize = self.0[..order].iter().sum();
        start..start + self.0[order]
    }

    /// Cumulative sums `Σ_{i≤j} d_i`.
    pub fn cumulative(&self) -> Vec<usize> {
        self.0
            .iter()
            .scan(0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }
}

impl TryFrom<Vec<usize>> for DegreeVector {
    type Error = Error;

    fn try_from(value: Vec<usize>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<DegreeVector> for Vec<usize> {
    fn from(value: DegreeVector) -> Self {
        value.0
    }
}

/// Checks the two degree design criteria: uncoded first order and non-decreasing degrees.
pub fn validate_degree_vector(degrees: &[usize]) -> Result<()> {
    let first = *degrees.first().ok_or(Error::EmptyDegrees)?;
    if first != 1 {
        return Err(Error::FirstDegreeNotOne(first));
    }
    for (i, pair) in degrees.windows(2).enumerate() {
        if pair[1] < pair[0] {
            return Err(Error::DecreasingDegree {
                order: i + 2,
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    Ok(())
}

/// A linear combination `Σ_k α_k W_k` over block indices.
///
/// Entries keep their construction order (the order rows were summed in),
/// which is what gets printed; equality checks should go through
/// [`CodedTask::sorted_blocks`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodedTask {
    entries: Vec<(usize, f64)>,
}

impl CodedTask {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        let entries: Vec<(usize, f64)> = entries.into_iter().filter(|&(_, c)| c != 0.0).collect();
        if entries.is_empty() {
            return Err(Error::InvalidAssignment("coded task has no nonzero coefficient".into()));
        }
        let mut seen: Vec<usize> = entries.iter().map(|&(b, _)| b).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidAssignment("coded task repeats a block index".into()));
        }
        Ok(Self { entries })
    }

    /// Binary task summing the given blocks.
    pub fn sum_of(blocks: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::new(blocks.into_iter().map(|b| (b, 1.0)).collect())
    }

    pub fn uncoded(block: usize) -> Self {
        Self {
            entries: vec![(block, 1.0)],
        }
    }

    pub fn degree(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn blocks(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(b, _)| b)
    }

    pub fn sorted_blocks(&self) -> Vec<usize> {
        let mut blocks: Vec<usize> = self.blocks().collect();
        blocks.sort_unstable();
        blocks
    }

    pub fn coefficient(&self, block: usize) -> f64 {
        self.entries
            .iter()
            .find(|&&(b, _)| b == block)
            .map_or(0.0, |&(_, c)| c)
    }

    pub fn is_binary(&self) -> bool {
        self.entries.iter().all(|&(_, c)| c == 1.0)
    }

    /// Evaluates the combination against per-block values.
    pub fn combine(&self, values: &[Vec<f64>]) -> Vec<f64> {
        let len = values.first().map_or(0, Vec::len);
        let mut out = vec![0.0; len];
        for &(b, c) in &self.entries {
            for (o, v) in out.iter_mut().zip(&values[b]) {
                *o += c * v;
            }
        }
        out
    }
}

/// Whether coding happens on the data before computing, or on partial results afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    CodedComputation,
    CodedCommunication,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::CodedComputation => "coded-computation",
            Mode::CodedCommunication => "coded-communication",
        })
    }
}

/// One transmission of a worker: which orders it carries and after how many
/// unit computations it leaves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageSlot {
    pub orders: Range<usize>,
    pub units: u32,
}

/// How the parameter server turns received messages into recovered blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum RecoveryRule {
    /// Successive cancellation of known blocks (binary or real coefficients).
    Peeling,
    /// Group `g` is recovered once `kbar` workers have delivered their order-`g` task.
    Mds { kbar: usize, points: Vec<f64> },
    /// The full sum is available once `threshold` workers have reported.
    GradientCoding { threshold: usize },
}

/// The `r × K` grid of coded tasks plus its transmission schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputationAssignment {
    workers: usize,
    total_blocks: usize,
    grid: Vec<Vec<CodedTask>>,
    mode: Mode,
    slots: Vec<MessageSlot>,
    unit_cost: f64,
    recovery: RecoveryRule,
}

impl ComputationAssignment {
    pub fn new(
        grid: Vec<Vec<CodedTask>>,
        total_blocks: usize,
        mode: Mode,
        slots: Vec<MessageSlot>,
        unit_cost: f64,
        recovery: RecoveryRule,
    ) -> Result<Self> {
        let invalid = |m: String| Err(Error::InvalidAssignment(m));
        let Some(first) = grid.first() else {
            return invalid("assignment has no orders".into());
        };
        let workers = first.len();
        if workers == 0 {
            return invalid("assignment has no workers".into());
        }
        if let Some(j) = grid.iter().position(|row| row.len() != workers) {
            return invalid(format!("order {} has {} tasks, expected {workers}", j + 1, grid[j].len()));
        }
        for row in &grid {
            for task in row {
                if let Some(b) = task.blocks().find(|&b| b >= total_blocks) {
                    return invalid(format!("block {b} outside 0..{total_blocks}"));
                }
            }
        }
        let mut next = 0;
        let mut last_units = 0;
        for slot in &slots {
            if slot.orders.start != next || slot.orders.end <= slot.orders.start {
                return invalid("message slots must cover the orders contiguously".into());
            }
            if slot.units <= last_units {
                return invalid("message schedule must be strictly increasing".into());
            }
            next = slot.orders.end;
            last_units = slot.units;
        }
        if next != grid.len() {
            return invalid("message slots must cover every order".into());
        }
        if !(unit_cost > 0.0 && unit_cost.is_finite()) {
            return invalid(format!("unit cost must be positive, got {unit_cost}"));
        }
        Ok(Self {
            workers,
            total_blocks,
            grid,
            mode,
            slots,
            unit_cost,
            recovery,
        })
    }

    /// Multi-message assignment: one message per order.
    ///
    /// In coded computation a message leaves after each task; in coded
    /// communication message `j` needs `Σ_{i≤j} d_i` partial results first,
    /// where `d_i` is the degree of the order-`i` tasks.
    pub fn multi_message(grid: Vec<Vec<CodedTask>>, total_blocks: usize, mode: Mode) -> Result<Self> {
        let units: Vec<u32> = match mode {
            Mode::CodedComputation => (1..=grid.len() as u32).collect(),
            Mode::CodedCommunication => grid
                .iter()
                .map(|row| row.iter().map(CodedTask::degree).max().unwrap_or(0) as u32)
                .scan(0, |acc, d| {
                    *acc += d;
                    Some(*acc)
                })
                .collect(),
        };
        let slots = units
            .into_iter()
            .enumerate()
            .map(|(j, units)| MessageSlot { orders: j..j + 1, units })
            .collect();
        Self::new(grid, total_blocks, mode, slots, 1.0, RecoveryRule::Peeling)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn orders(&self) -> usize {
        self.grid.len()
    }

    pub fn total_blocks(&self) -> usize {
        self.total_blocks
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn slots(&self) -> &[MessageSlot] {
        &self.slots
    }

    /// Cumulative unit computations at which each message is sent.
    pub fn message_schedule(&self) -> Vec<u32> {
        self.slots.iter().map(|s| s.units).collect()
    }

    /// Highest score a worker can reach (units needed for its last message).
    pub fn max_score(&self) -> u32 {
        self.slots.last().map_or(0, |s| s.units)
    }

    /// Time of one unit computation relative to the base block size.
    pub fn unit_cost(&self) -> f64 {
        self.unit_cost
    }

    pub fn recovery(&self) -> &RecoveryRule {
        &self.recovery
    }

    pub fn task(&self, order: usize, worker: usize) -> &CodedTask {
        &self.grid[order][worker]
    }

    pub fn grid(&self) -> &[Vec<CodedTask>] {
        &self.grid
    }

    /// The `r` tasks of one worker in execution order.
    pub fn worker_tasks(&self, worker: usize) -> Vec<&CodedTask> {
        self.grid.iter().map(|row| &row[worker]).collect()
    }

    /// Number of messages a worker with the given score has sent.
    pub fn messages_sent(&self, score: u32) -> usize {
        self.slots.iter().take_while(|s| s.units <= score).count()
    }
}

/// Completed-computation counts, one per worker.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScoreVector {
    scores: Vec<u32>,
}

impl ScoreVector {
    pub fn new(scores: Vec<u32>, max: u32) -> Result<Self> {
        if let Some(&score) = scores.iter().find(|&&s| s > max) {
            return Err(Error::ScoreOutOfRange { score, max });
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &[u32] {
        &self.scores
    }

    pub fn workers(&self) -> usize {
        self.scores.len()
    }
}

/// `(N_r, …, N_0)`: how many workers completed exactly `s` computations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CumulativeType {
    /// Indexed by score: `by_score[s] = N_s`.
    by_score: Vec<usize>,
}

impl CumulativeType {
    /// Builds a type from counts listed as `(N_r, …, N_0)`, the way tables print them.
    pub fn from_table_order(counts: &[usize]) -> Self {
        Self {
            by_score: counts.iter().rev().copied().collect(),
        }
    }

    pub fn from_by_score(by_score: Vec<usize>) -> Self {
        Self { by_score }
    }

    /// Counts as `(N_r, …, N_0)`.
    pub fn table_order(&self) -> Vec<usize> {
        self.by_score.iter().rev().copied().collect()
    }

    pub fn count(&self, score: usize) -> usize {
        self.by_score.get(score).copied().unwrap_or(0)
    }

    pub fn max_score(&self) -> usize {
        self.by_score.len() - 1
    }

    pub fn workers(&self) -> usize {
        self.by_score.iter().sum()
    }

    /// Number of distinct score vectors of this type, `K! / Π_s N_s!`.
    pub fn multiplicity(&self) -> u128 {
        let mut result: u128 = 1;
        let mut placed = 0u128;
        for &n in &self.by_score {
            for i in 1..=n as u128 {
                placed += 1;
                result = result * placed / i;
            }
        }
        result
    }
}

/// Histogram of a score vector over `0..=max`.
pub fn type_of(score: &ScoreVector, max: u32) -> CumulativeType {
    let mut by_score = vec![0; max as usize + 1];
    for &s in score.scores() {
        by_score[s as usize] += 1;
    }
    CumulativeType { by_score }
}
