//! Straggler simulation: latency law, single iterations, Monte Carlo and exhaustive enumeration.

pub mod enumerate;
pub mod iteration;
pub mod latency;
pub mod monte_carlo;

pub use enumerate::{completion_cdf, enumerate_all, enumerate_successful, is_successful, type_probability, TypeCount};
pub use iteration::{simulate_iteration, simulate_with_payloads, simulate_with_unit_times, IterationOutcome};
pub use latency::{message_times, LatencyModel};
pub use monte_carlo::{monte_carlo, monte_carlo_with, trial_rng, MonteCarloConfig, MonteCarloReport, TrialRecord};
