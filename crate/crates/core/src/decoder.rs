//! Parameter-server side decoding.
//!
//! [`DecoderState`] is the peeling decoder: each incoming coded message is
//! reduced by every block already known, degree-one residues reveal a block,
//! and newly revealed blocks cascade through the pending messages until a
//! fixpoint. It tracks the symbolic state always and numeric payloads when
//! they are supplied. [`PsDecoder`] wraps it together with the MDS and
//! gradient-coding recovery rules so the simulator can drive any scheme.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{DecodeError, Error, Result};
use crate::linalg;
use crate::model::{CodedTask, ComputationAssignment, RecoveryRule};

/// Fraction `q` of blocks the parameter server may leave unrecovered.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Tolerance(f64);

impl Tolerance {
    /// Slack for products like `(1 - 0.15) · 40` that land a hair above an integer.
    const ROUNDING_SLACK: f64 = 1e-9;

    pub fn new(q: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&q) {
            Ok(Self(q))
        } else {
            Err(Error::InvalidTolerance(q))
        }
    }

    pub const fn exact() -> Self {
        Self(0.0)
    }

    pub fn q(self) -> f64 {
        self.0
    }

    /// `⌈(1 − q) · total⌉`.
    pub fn required(self, total: usize) -> usize {
        let need = ((1.0 - self.0) * total as f64 - Self::ROUNDING_SLACK).ceil();
        (need.max(0.0) as usize).min(total)
    }

    pub fn is_met(self, recovered: usize, total: usize) -> bool {
        recovered >= self.required(total)
    }
}

impl TryFrom<f64> for Tolerance {
    type Error = Error;

    fn try_from(q: f64) -> Result<Self> {
        Self::new(q)
    }
}

impl From<Tolerance> for f64 {
    fn from(t: Tolerance) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone)]
struct Pending {
    entries: Vec<(usize, f64)>,
    payload: Option<Vec<f64>>,
}

/// Peeling decoder state: recovered blocks plus fully reduced pending messages.
#[derive(Debug, Clone)]
pub struct DecoderState {
    total: usize,
    recovered: Vec<bool>,
    recovery_order: Vec<usize>,
    values: Vec<Option<Vec<f64>>>,
    pending: Vec<Option<Pending>>,
    /// block → pending slots that still reference it
    refs: Vec<Vec<usize>>,
    numeric: Option<bool>,
    payload_len: Option<usize>,
    messages: usize,
    redundant: usize,
    peel_steps: usize,
}

impl DecoderState {
    pub fn new(total_blocks: usize) -> Self {
        Self {
            total: total_blocks,
            recovered: vec![false; total_blocks],
            recovery_order: Vec::new(),
            values: vec![None; total_blocks],
            pending: Vec::new(),
            refs: vec![Vec::new(); total_blocks],
            numeric: None,
            payload_len: None,
            messages: 0,
            redundant: 0,
            peel_steps: 0,
        }
    }

    pub fn total_blocks(&self) -> usize {
        self.total
    }

    /// Ingests one coded message and returns the blocks it (transitively) revealed.
    pub fn ingest(&mut self, task: &CodedTask, payload: Option<Vec<f64>>) -> Result<Vec<usize>, DecodeError> {
        if let Some(block) = task.blocks().find(|&b| b >= self.total) {
            return Err(DecodeError::BlockOutOfRange { block, total: self.total });
        }
        match (self.numeric, payload.is_some()) {
            (Some(expected), got) if expected != got => return Err(DecodeError::MissingPayload),
            _ => self.numeric = Some(payload.is_some()),
        }
        if let Some(p) = &payload {
            match self.payload_len {
                Some(expected) if expected != p.len() => {
                    return Err(DecodeError::PayloadLength { got: p.len(), expected })
                }
                _ => self.payload_len = Some(p.len()),
            }
        }
        self.messages += 1;

        let mut payload = payload;
        let mut residual = Vec::with_capacity(task.degree());
        for &(b, c) in task.entries() {
            if self.recovered[b] {
                self.peel_steps += 1;
                if let (Some(p), Some(v)) = (payload.as_mut(), self.values[b].as_ref()) {
                    axpy(p, -c, v);
                }
            } else {
                residual.push((b, c));
            }
        }

        let before = self.recovery_order.len();
        match residual.len() {
            0 => self.redundant += 1,
            1 => {
                let (b, c) = residual[0];
                self.recover(b, payload.map(|p| scale(p, 1.0 / c)));
            }
            _ => {
                let id = self.pending.len();
                for &(b, _) in &residual {
                    self.refs[b].push(id);
                }
                self.pending.push(Some(Pending {
                    entries: residual,
                    payload,
                }));
            }
        }
        self.cascade(before);
        Ok(self.recovery_order[before..].to_vec())
    }

    fn recover(&mut self, block: usize, value: Option<Vec<f64>>) {
        self.recovered[block] = true;
        self.values[block] = value;
        self.recovery_order.push(block);
    }

    /// Propagates every block recovered since `from` through the pending messages.
    fn cascade(&mut self, from: usize) {
        let mut next = from;
        while next < self.recovery_order.len() {
            let block = self.recovery_order[next];
            next += 1;
            for id in std::mem::take(&mut self.refs[block]) {
                let Some(mut task) = self.pending[id].take() else {
                    continue;
                };
                let Some(pos) = task.entries.iter().position(|&(b, _)| b == block) else {
                    self.pending[id] = Some(task);
                    continue;
                };
                let (_, c) = task.entries.swap_remove(pos);
                self.peel_steps += 1;
                if let (Some(p), Some(v)) = (task.payload.as_mut(), self.values[block].as_ref()) {
                    axpy(p, -c, v);
                }
                match task.entries.as_slice() {
                    [] => self.redundant += 1,
                    &[(b, c)] => {
                        if self.recovered[b] {
                            // its last block is queued; nothing new to learn
                            self.redundant += 1;
                        } else {
                            let value = task.payload.map(|p| scale(p, 1.0 / c));
                            self.recover(b, value);
                        }
                    }
                    _ => self.pending[id] = Some(task),
                }
            }
        }
    }

    pub fn is_recovered(&self, block: usize) -> bool {
        self.recovered[block]
    }

    pub fn recovered_count(&self) -> usize {
        self.recovery_order.len()
    }

    /// Recovered blocks in ascending order.
    pub fn recovered(&self) -> BTreeSet<usize> {
        self.recovery_order.iter().copied().collect()
    }

    pub fn recovered_mask(&self) -> Vec<bool> {
        self.recovered.clone()
    }

    /// Supports of the still-pending (degree ≥ 2) messages.
    pub fn pending_supports(&self) -> Vec<Vec<usize>> {
        self.pending
            .iter()
            .flatten()
            .map(|p| {
                let mut blocks: Vec<usize> = p.entries.iter().map(|&(b, _)| b).collect();
                blocks.sort_unstable();
                blocks
            })
            .collect()
    }

    pub fn messages_ingested(&self) -> usize {
        self.messages
    }

    /// Messages (or residues) that revealed nothing new.
    pub fn redundant(&self) -> usize {
        self.redundant
    }

    /// Number of single-block subtractions performed so far.
    pub fn peel_steps(&self) -> usize {
        self.peel_steps
    }

    /// Numeric value of every recovered block.
    pub fn decode_values(&self) -> Result<BTreeMap<usize, Vec<f64>>, DecodeError> {
        if self.numeric == Some(false) {
            return Err(DecodeError::MissingPayload);
        }
        self.recovery_order
            .iter()
            .map(|&b| {
                self.values[b]
                    .clone()
                    .map(|v| (b, v))
                    .ok_or(DecodeError::MissingPayload)
            })
            .collect()
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn scale(mut v: Vec<f64>, a: f64) -> Vec<f64> {
    if a != 1.0 {
        v.iter_mut().for_each(|x| *x *= a);
    }
    v
}

/// `|recovered| ≥ ⌈(1 − q) · total⌉`.
pub fn meets_tolerance(state: &DecoderState, total_blocks: usize, tolerance: Tolerance) -> bool {
    tolerance.is_met(state.recovered_count(), total_blocks)
}

/// Blocks whose unit vector lies in the row space of the tasks' coefficient matrix.
///
/// Independent of the peeling path: plain Gauss-Jordan elimination. Block `k` is
/// recoverable iff some RREF row is exactly `e_k`.
pub fn rref_recoverable(tasks: &[CodedTask], total_blocks: usize) -> BTreeSet<usize> {
    let mut rows: Vec<Vec<f64>> = tasks
        .iter()
        .map(|t| {
            let mut row = vec![0.0; total_blocks];
            for &(b, c) in t.entries() {
                row[b] = c;
            }
            row
        })
        .collect();
    let pivots = linalg::rref(&mut rows, total_blocks);
    rows.iter()
        .zip(pivots)
        .filter(|(row, _)| row.iter().filter(|v| **v != 0.0).count() == 1)
        .map(|(_, p)| p)
        .collect()
}

/// Whether enough gradient-coding workers reported to form the full sum.
pub fn gc_aggregate(received_workers: &BTreeSet<usize>, workers: usize, load: usize) -> bool {
    received_workers.len() >= crate::codes::gc_threshold(workers, load)
}

/// Rank-rule decoder for MDS-coded computation.
#[derive(Debug, Clone)]
struct MdsState {
    kbar: usize,
    groups: usize,
    points: Vec<f64>,
    /// per group: workers (in arrival order) and their payloads
    received: Vec<Vec<(usize, Option<Vec<f64>>)>>,
    redundant: usize,
}

impl MdsState {
    fn ingest(&mut self, worker: usize, group: usize, payload: Option<Vec<f64>>) -> usize {
        let slot = &mut self.received[group];
        if slot.len() >= self.kbar || slot.iter().any(|(w, _)| *w == worker) {
            self.redundant += 1;
            return 0;
        }
        slot.push((worker, payload));
        if slot.len() == self.kbar {
            self.kbar
        } else {
            0
        }
    }

    fn group_done(&self, g: usize) -> bool {
        self.received[g].len() >= self.kbar
    }

    fn recovered_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.kbar * self.groups];
        for g in (0..self.groups).filter(|&g| self.group_done(g)) {
            for p in 0..self.kbar {
                mask[g + p * self.groups] = true;
            }
        }
        mask
    }

    fn decode_values(&self) -> Result<BTreeMap<usize, Vec<f64>>, DecodeError> {
        let mut out = BTreeMap::new();
        for g in (0..self.groups).filter(|&g| self.group_done(g)) {
            let (a, b): (Vec<Vec<f64>>, Vec<Vec<f64>>) = self.received[g]
                .iter()
                .map(|(w, payload)| {
                    let x = self.points[*w];
                    let row = (0..self.kbar).map(|p| x.powi(p as i32)).collect();
                    payload.clone().map(|v| (row, v)).ok_or(DecodeError::MissingPayload)
                })
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .unzip();
            let solved = linalg::solve(a, b).ok_or(DecodeError::Singular(g))?;
            for (p, v) in solved.into_iter().enumerate() {
                out.insert(g + p * self.groups, v);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
enum Rule {
    Peeling(DecoderState),
    Mds(MdsState),
    Gradient {
        threshold: usize,
        reported: BTreeSet<usize>,
        redundant: usize,
    },
}

/// Decoder for whole worker messages under an assignment's recovery rule.
#[derive(Debug, Clone)]
pub struct PsDecoder<'a> {
    assignment: &'a ComputationAssignment,
    rule: Rule,
    messages: usize,
}

impl<'a> PsDecoder<'a> {
    pub fn new(assignment: &'a ComputationAssignment) -> Self {
        let rule = match assignment.recovery() {
            RecoveryRule::Peeling => Rule::Peeling(DecoderState::new(assignment.total_blocks())),
            RecoveryRule::Mds { kbar, points } => Rule::Mds(MdsState {
                kbar: *kbar,
                groups: assignment.orders(),
                points: points.clone(),
                received: vec![Vec::new(); assignment.orders()],
                redundant: 0,
            }),
            RecoveryRule::GradientCoding { threshold } => Rule::Gradient {
                threshold: *threshold,
                reported: BTreeSet::new(),
                redundant: 0,
            },
        };
        Self {
            assignment,
            rule,
            messages: 0,
        }
    }

    /// Delivers message `slot` of `worker`; `payloads` carries one vector per order in the slot.
    /// Returns how many blocks became available.
    pub fn receive(&mut self, worker: usize, slot: usize, payloads: Option<Vec<Vec<f64>>>) -> Result<usize, DecodeError> {
        let spec = self
            .assignment
            .slots()
            .get(slot)
            .filter(|_| worker < self.assignment.workers())
            .ok_or(DecodeError::UnknownMessage { worker, slot })?;
        if let Some(p) = &payloads {
            if p.len() != spec.orders.len() {
                return Err(DecodeError::PayloadLength {
                    got: p.len(),
                    expected: spec.orders.len(),
                });
            }
        }
        self.messages += 1;
        let mut payloads = payloads.map(Vec::into_iter);
        let mut gained = 0;
        match &mut self.rule {
            Rule::Peeling(state) => {
                for order in spec.orders.clone() {
                    let payload = payloads.as_mut().and_then(Iterator::next);
                    gained += state.ingest(self.assignment.task(order, worker), payload)?.len();
                }
            }
            Rule::Mds(state) => {
                for order in spec.orders.clone() {
                    let payload = payloads.as_mut().and_then(Iterator::next);
                    gained += state.ingest(worker, order, payload);
                }
            }
            Rule::Gradient {
                threshold,
                reported,
                redundant,
            } => {
                let before = reported.len() >= *threshold;
                if !reported.insert(worker) || before {
                    *redundant += 1;
                } else if reported.len() >= *threshold {
                    gained = self.assignment.total_blocks();
                }
            }
        }
        Ok(gained)
    }

    pub fn recovered_count(&self) -> usize {
        match &self.rule {
            Rule::Peeling(state) => state.recovered_count(),
            Rule::Mds(state) => (0..state.groups).filter(|&g| state.group_done(g)).count() * state.kbar,
            Rule::Gradient { threshold, reported, .. } => {
                if reported.len() >= *threshold {
                    self.assignment.total_blocks()
                } else {
                    0
                }
            }
        }
    }

    pub fn recovered_mask(&self) -> Vec<bool> {
        match &self.rule {
            Rule::Peeling(state) => state.recovered_mask(),
            Rule::Mds(state) => state.recovered_mask(),
            Rule::Gradient { .. } => vec![self.recovered_count() > 0; self.assignment.total_blocks()],
        }
    }

    pub fn meets(&self, tolerance: Tolerance) -> bool {
        tolerance.is_met(self.recovered_count(), self.assignment.total_blocks())
    }

    pub fn messages(&self) -> usize {
        self.messages
    }

    pub fn redundant(&self) -> usize {
        match &self.rule {
            Rule::Peeling(state) => state.redundant(),
            Rule::Mds(state) => state.redundant,
            Rule::Gradient { redundant, .. } => *redundant,
        }
    }

    /// Underlying peeling state, when the rule is peeling.
    pub fn peeling_state(&self) -> Option<&DecoderState> {
        match &self.rule {
            Rule::Peeling(state) => Some(state),
            _ => None,
        }
    }

    pub fn decode_values(&self) -> Result<BTreeMap<usize, Vec<f64>>, DecodeError> {
        match &self.rule {
            Rule::Peeling(state) => state.decode_values(),
            Rule::Mds(state) => state.decode_values(),
            Rule::Gradient { .. } => Err(DecodeError::SumOnly),
        }
    }
}
