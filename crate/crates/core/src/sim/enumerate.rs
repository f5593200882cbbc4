//! Exhaustive score-vector enumeration for small assignments.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::decoder::{PsDecoder, Tolerance};
use crate::error::{Error, Result};
use crate::model::{type_of, ComputationAssignment, CumulativeType, ScoreVector};
use crate::sim::latency::LatencyModel;

/// Largest number of score vectors [`enumerate_all`] will visit.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeCount {
    /// `(N_r, …, N_0)`.
    #[serde(serialize_with = "ser_type")]
    pub ty: CumulativeType,
    pub score_vectors: u128,
    pub successful: u128,
}

fn ser_type<S: serde::Serializer>(ty: &CumulativeType, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(ty.table_order())
}

/// Whether the messages implied by `scores` satisfy the tolerance.
pub fn is_successful(assignment: &ComputationAssignment, tolerance: Tolerance, scores: &[u32]) -> bool {
    let mut decoder = PsDecoder::new(assignment);
    for (worker, &score) in scores.iter().enumerate() {
        for slot in 0..assignment.messages_sent(score) {
            decoder
                .receive(worker, slot, None)
                .expect("symbolic delivery of an existing message");
        }
    }
    decoder.meets(tolerance)
}

/// Successful score vectors among those of type `ty`.
pub fn enumerate_successful(assignment: &ComputationAssignment, tolerance: Tolerance, ty: &CumulativeType) -> u128 {
    assert_eq!(ty.workers(), assignment.workers(), "type must cover every worker");
    let mut scores: Vec<u32> = (0..=ty.max_score())
        .flat_map(|s| std::iter::repeat_n(s as u32, ty.count(s)))
        .collect();
    let mut successful = 0;
    loop {
        successful += u128::from(is_successful(assignment, tolerance, &scores));
        if !next_permutation(&mut scores) {
            return successful;
        }
    }
}

/// Every cumulative type with its successful-vector count, in table order
/// (descending on `(N_r, …, N_0)`).
pub fn enumerate_all(assignment: &ComputationAssignment, tolerance: Tolerance) -> Result<Vec<TypeCount>> {
    let k = assignment.workers();
    let max = assignment.max_score();
    let total = u128::from(max + 1).checked_pow(k as u32).unwrap_or(u128::MAX);
    if total > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge(total));
    }
    let mut counts: BTreeMap<Vec<usize>, (u128, u128)> = BTreeMap::new();
    let mut scores = vec![0u32; k];
    loop {
        let ty = type_of(&ScoreVector::new(scores.clone(), max)?, max);
        let entry = counts.entry(ty.table_order()).or_default();
        entry.0 += 1;
        entry.1 += u128::from(is_successful(assignment, tolerance, &scores));
        // odometer increment
        let Some(pos) = scores.iter().position(|&s| s < max) else {
            break;
        };
        scores[..pos].iter_mut().for_each(|s| *s = 0);
        scores[pos] += 1;
    }
    Ok(counts
        .into_iter()
        .rev()
        .map(|(order, (score_vectors, successful))| TypeCount {
            ty: CumulativeType::from_table_order(&order),
            score_vectors,
            successful,
        })
        .collect())
}

/// Probability of one particular score vector of type `ty` at time `t`;
/// workers stop at the top score, so its probability is `P(≥ max)`.
pub fn type_probability(ty: &CumulativeType, t: f64, model: &LatencyModel) -> f64 {
    let max = ty.max_score() as u32;
    (0..=max)
        .map(|s| model.prob_score(s, t, max).powi(ty.count(s as usize) as i32))
        .product()
}

/// `Pr(T < t)` summed over all successful types.
pub fn completion_cdf(assignment: &ComputationAssignment, tolerance: Tolerance, t: f64, model: &LatencyModel) -> Result<f64> {
    Ok(cdf_from_counts(&enumerate_all(assignment, tolerance)?, assignment.unit_cost(), t, model))
}

/// CDF from precomputed counts; reuse these when evaluating many `t`.
pub fn cdf_from_counts(counts: &[TypeCount], unit_cost: f64, t: f64, model: &LatencyModel) -> f64 {
    let t = t / unit_cost;
    counts
        .iter()
        .filter(|c| c.successful > 0)
        .map(|c| c.successful as f64 * type_probability(&c.ty, t, model))
        .sum()
}

fn next_permutation(v: &mut [u32]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("pivot has a larger successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::motivating;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn permutations_of_multiset() {
        let mut v = vec![0, 1, 1, 2];
        let mut n = 1;
        while next_permutation(&mut v) {
            n += 1;
        }
        assert_eq!(n, 12);
        assert_eq!(v, vec![2, 1, 1, 0]);
    }

    #[test]
    fn row_n5_full_recovery() {
        let ty = CumulativeType::from_table_order(&[2, 1, 1]);
        let q = Tolerance::exact();
        assert_eq!(enumerate_successful(&motivating::mds(), q, &ty), 12);
        assert_eq!(enumerate_successful(&motivating::uc_mmc(), q, &ty), 8);
        assert_eq!(enumerate_successful(&motivating::ccpr(), q, &ty), 12);
    }

    #[test]
    fn listed_ccpr_vector_succeeds() {
        assert!(is_successful(&motivating::ccpr(), Tolerance::exact(), &[2, 1, 0, 1]));
    }

    #[test]
    fn all_types_cover_every_vector() {
        let counts = enumerate_all(&motivating::ccpr(), Tolerance::exact()).unwrap();
        assert_eq!(counts.len(), 15);
        assert_eq!(counts.iter().map(|c| c.score_vectors).sum::<u128>(), 81);
        for c in &counts {
            assert_eq!(c.score_vectors, c.ty.multiplicity());
        }
        assert_eq!(counts[0].ty.table_order(), vec![4, 0, 0]);
        assert_eq!(counts[14].ty.table_order(), vec![0, 0, 4]);
    }

    #[test]
    fn type_probabilities_sum_to_one() {
        let model = LatencyModel::new(10.0, 0.01).unwrap();
        let counts = enumerate_all(&motivating::ccpr(), Tolerance::new(1.0).unwrap()).unwrap();
        for t in [0.0, 0.015, 0.03, 0.2, 1.0] {
            let total: f64 = counts
                .iter()
                .map(|c| c.score_vectors as f64 * type_probability(&c.ty, t, &model))
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "t={t}: {total}");
        }
    }

    #[test]
    fn before_alpha_only_idle_type_has_mass() {
        let model = LatencyModel::new(10.0, 0.01).unwrap();
        let idle = CumulativeType::from_table_order(&[0, 0, 4]);
        let busy = CumulativeType::from_table_order(&[0, 1, 3]);
        assert_eq!(type_probability(&idle, 0.005, &model), 1.0);
        assert_eq!(type_probability(&busy, 0.005, &model), 0.0);
    }

    #[test]
    fn cdf_tends_to_one() {
        let model = LatencyModel::new(10.0, 0.01).unwrap();
        for c in [motivating::mds(), motivating::uc_mmc(), motivating::ccpr()] {
            let p = completion_cdf(&c, Tolerance::exact(), 50.0, &model).unwrap();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn specific_vector_frequency_matches_formula() {
        // K=4, r=2 workers stopping after two computations, observed at t=0.2
        let model = LatencyModel::new(10.0, 0.01).unwrap();
        let t = 0.2;
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut freq: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
        for _ in 0..n {
            let s: Vec<u32> = (0..4)
                .map(|_| ((t / model.sample_worker(&mut rng)).floor() as u32).min(2))
                .collect();
            *freq.entry(s).or_default() += 1;
        }
        for (s, hits) in freq {
            let p = type_probability(&type_of(&ScoreVector::new(s.clone(), 2).unwrap(), 2), t, &model);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let got = f64::from(hits) / n as f64;
            assert!((got - p).abs() <= 3.0 * se + 1e-12, "{s:?}: {got} vs {p}");
        }
    }

    #[test]
    fn rejects_large_enumerations() {
        let c = crate::codes::build_uc_mmc(40, 3, crate::model::Mode::CodedComputation).unwrap();
        assert!(matches!(enumerate_all(&c, Tolerance::exact()), Err(Error::EnumerationTooLarge(_))));
    }
}
