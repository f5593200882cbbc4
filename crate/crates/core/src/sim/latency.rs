use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ComputationAssignment;

/// Shifted-exponential computation speed: a worker needs `τ = α + E`,
/// `E ~ Exp(μ)`, per unit computation, and `s·τ` for its first `s` units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    mu: f64,
    alpha: f64,
}

impl LatencyModel {
    pub fn new(mu: f64, alpha: f64) -> Result<Self> {
        if mu > 0.0 && alpha > 0.0 && mu.is_finite() && alpha.is_finite() {
            Ok(Self { mu, alpha })
        } else {
            Err(Error::InvalidLatency { mu, alpha })
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Draws one worker's per-unit computation time.
    pub fn sample_worker<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let exp = Exp::new(self.mu).expect("mu validated positive");
        self.alpha + exp.sample(rng)
    }

    /// Probability of at least `s` completed computations by time `t`.
    pub fn prob_at_least(&self, s: u32, t: f64) -> f64 {
        if s == 0 {
            return 1.0;
        }
        let per_unit = t / f64::from(s);
        if per_unit < self.alpha {
            0.0
        } else {
            1.0 - (-self.mu * (per_unit - self.alpha)).exp()
        }
    }

    /// `P_s(t)`: probability of exactly `s` completed computations by time `t`
    /// for a worker with an unbounded task list.
    pub fn prob_exactly(&self, s: u32, t: f64) -> f64 {
        self.prob_at_least(s, t) - self.prob_at_least(s + 1, t)
    }

    /// Score distribution of a worker that stops after `max` computations.
    pub fn prob_score(&self, s: u32, t: f64, max: u32) -> f64 {
        if s >= max {
            self.prob_at_least(max, t)
        } else {
            self.prob_exactly(s, t)
        }
    }
}

/// Number of unit computations finished by `t` given per-unit time `tau`.
pub fn completions_by(tau: f64, t: f64) -> u32 {
    (t / tau).floor().max(0.0) as u32
}

/// Arrival time of each of a worker's messages.
pub fn message_times(assignment: &ComputationAssignment, tau: f64) -> Vec<f64> {
    assignment
        .slots()
        .iter()
        .map(|slot| f64::from(slot.units) * assignment.unit_cost() * tau)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes;
    use crate::model::{DegreeVector, Mode};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_model() -> LatencyModel {
        LatencyModel::new(10.0, 0.01).unwrap()
    }

    /// The three-branch closed form, written out independently.
    fn piecewise(m: &LatencyModel, s: u32, t: f64) -> f64 {
        let (mu, a) = (m.mu(), m.alpha());
        let s = f64::from(s);
        if s == 0.0 {
            return if t < a { 1.0 } else { (-mu * (t - a)).exp() };
        }
        if t < s * a {
            0.0
        } else if t < (s + 1.0) * a {
            1.0 - (-mu * (t / s - a)).exp()
        } else {
            (-mu * (t / (s + 1.0) - a)).exp() - (-mu * (t / s - a)).exp()
        }
    }

    #[test]
    fn matches_piecewise_form() {
        let m = paper_model();
        for s in 0..5 {
            for i in 0..200 {
                let t = i as f64 * 0.003;
                assert_relative_eq!(m.prob_exactly(s, t), piecewise(&m, s, t), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn zero_exponential_gives_alpha_multiples() {
        let m = paper_model();
        assert_eq!(completions_by(m.alpha(), 3.0 * m.alpha() + 1e-12), 3);
        assert_eq!(completions_by(m.alpha(), 3.0 * m.alpha() - 1e-12), 2);
    }

    #[test]
    fn empirical_first_completion() {
        let m = paper_model();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut at_least_one = 0;
        let mut exactly_one = 0;
        for _ in 0..n {
            let tau = m.sample_worker(&mut rng);
            at_least_one += (completions_by(tau, 0.11) >= 1) as u32;
            exactly_one += (completions_by(tau, 0.15) == 1) as u32;
        }
        let p1 = at_least_one as f64 / n as f64;
        let p2 = exactly_one as f64 / n as f64;
        assert!((p1 - (1.0 - (-1.0f64).exp())).abs() < 0.01, "{p1}");
        let expected = (-10.0f64 * (0.075 - 0.01)).exp() - (-10.0f64 * (0.15 - 0.01)).exp();
        assert!((expected - 0.2756).abs() < 5e-4);
        assert!((p2 - expected).abs() < 0.01, "{p2}");
    }

    #[test]
    fn capped_score_distribution_sums_to_one() {
        let m = paper_model();
        for t in [0.0, 0.005, 0.02, 0.05, 0.3, 5.0] {
            let total: f64 = (0..=3).map(|s| m.prob_score(s, t, 3)).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn arrival_schedules() {
        let dv = DegreeVector::new(vec![1, 2, 3]).unwrap();
        let a = codes::build_rcs_assignment(10, &dv, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let comm = codes::rcs_encode(&a, &dv, Mode::CodedCommunication).unwrap();
        let got = message_times(&comm, 0.1);
        for (g, w) in got.iter().zip([0.1, 0.3, 0.6]) {
            assert_relative_eq!(*g, w, epsilon = 1e-12);
        }
        let comp = codes::build_uc_mmc(10, 3, Mode::CodedComputation).unwrap();
        let got = message_times(&comp, 0.1);
        for (g, w) in got.iter().zip([0.1, 0.2, 0.3]) {
            assert_relative_eq!(*g, w, epsilon = 1e-12);
        }
        let mds = codes::motivating::mds();
        assert_eq!(message_times(&mds, 0.1), vec![0.2]);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(LatencyModel::new(0.0, 0.01).is_err());
        assert!(LatencyModel::new(10.0, -1.0).is_err());
    }
}
