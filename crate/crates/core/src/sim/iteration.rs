use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::decoder::{PsDecoder, Tolerance};
use crate::error::Result;
use crate::model::ComputationAssignment;
use crate::sim::latency::LatencyModel;

/// What the parameter server saw in one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationOutcome {
    /// Arrival time of the message that satisfied the tolerance
    /// (time of the last message if it was never satisfied).
    pub completion_time: f64,
    /// Messages that arrived up to and including the completion time.
    pub messages_received: usize,
    pub recovered_mask: Vec<bool>,
    pub redundant_messages: usize,
    pub success: bool,
}

impl IterationOutcome {
    pub fn recovered_count(&self) -> usize {
        self.recovered_mask.iter().filter(|r| **r).count()
    }

    pub fn recovered_fraction(&self) -> f64 {
        self.recovered_count() as f64 / self.recovered_mask.len().max(1) as f64
    }
}

/// Per-message payload source: `(worker, order) → W̃_{worker,order} θ`.
pub type PayloadFn<'p> = dyn Fn(usize, usize) -> Vec<f64> + 'p;

/// Draws one unit time per worker, in worker order.
pub fn draw_unit_times<R: Rng + ?Sized>(workers: usize, model: &LatencyModel, rng: &mut R) -> Vec<f64> {
    (0..workers).map(|_| model.sample_worker(rng)).collect()
}

/// One iteration with freshly drawn worker speeds.
pub fn simulate_iteration<R: Rng + ?Sized>(
    assignment: &ComputationAssignment,
    tolerance: Tolerance,
    model: &LatencyModel,
    rng: &mut R,
) -> IterationOutcome {
    let taus = draw_unit_times(assignment.workers(), model, rng);
    simulate_with_unit_times(assignment, tolerance, &taus)
}

/// One iteration for given per-unit worker times.
pub fn simulate_with_unit_times(assignment: &ComputationAssignment, tolerance: Tolerance, unit_times: &[f64]) -> IterationOutcome {
    run(assignment, tolerance, unit_times, None)
        .expect("symbolic decoding of a valid assignment cannot fail")
        .0
}

/// One iteration that also carries numeric payloads and returns the decoded blocks.
pub fn simulate_with_payloads(
    assignment: &ComputationAssignment,
    tolerance: Tolerance,
    unit_times: &[f64],
    payload: &PayloadFn<'_>,
) -> Result<(IterationOutcome, BTreeMap<usize, Vec<f64>>)> {
    let (outcome, decoder) = run(assignment, tolerance, unit_times, Some(payload))?;
    let values = decoder.decode_values()?;
    Ok((outcome, values))
}

fn run<'a>(
    assignment: &'a ComputationAssignment,
    tolerance: Tolerance,
    unit_times: &[f64],
    payload: Option<&PayloadFn<'_>>,
) -> Result<(IterationOutcome, PsDecoder<'a>)> {
    assert_eq!(unit_times.len(), assignment.workers(), "one unit time per worker");
    let mut events: Vec<(f64, usize, usize)> = unit_times
        .iter()
        .enumerate()
        .flat_map(|(w, &tau)| {
            assignment
                .slots()
                .iter()
                .enumerate()
                .map(move |(m, slot)| (f64::from(slot.units) * assignment.unit_cost() * tau, w, m))
        })
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut decoder = PsDecoder::new(assignment);
    let mut done_at: Option<f64> = None;
    let mut received = 0;
    for &(time, worker, slot) in &events {
        if done_at.is_some_and(|t| time > t) {
            break;
        }
        let payloads = payload.map(|f| {
            assignment.slots()[slot]
                .orders
                .clone()
                .map(|order| f(worker, order))
                .collect()
        });
        decoder.receive(worker, slot, payloads)?;
        received += 1;
        if done_at.is_none() && decoder.meets(tolerance) {
            done_at = Some(time);
        }
    }
    let outcome = IterationOutcome {
        completion_time: done_at.unwrap_or_else(|| events.last().map_or(0.0, |e| e.0)),
        messages_received: received,
        recovered_mask: decoder.recovered_mask(),
        redundant_messages: decoder.redundant(),
        success: done_at.is_some(),
    };
    Ok((outcome, decoder))
}
