//! Synthetic linear regression trained by gradient descent on partially recovered gradients.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::codes::SchemeSpec;
use crate::decoder::Tolerance;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::model::{partition_matrix, ComputationAssignment, Mode, RecoveryRule};
use crate::sim::iteration::{draw_unit_times, simulate_with_payloads};
use crate::sim::latency::LatencyModel;
use crate::sim::monte_carlo::{trial_rng, FIXED_CODE_STREAM};

/// Stream used for drawing a run's dataset.
pub const DATASET_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub theta_star: Array1<f64>,
}

impl Dataset {
    pub fn samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Draws `theta_star ~ U[0,1]^dim` and then a dataset around it.
pub fn generate_dataset<R: Rng + ?Sized>(n: usize, dim: usize, noise_std: f64, rng: &mut R) -> Dataset {
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let theta_star: Array1<f64> = (0..dim).map(|_| unit.sample(rng)).collect();
    generate_dataset_with_model(n, theta_star, noise_std, rng)
}

/// Rows from the mixture `½N(μ, I) + ½N(−μ, I)` with `μ = (1.5/dim)·theta_star`,
/// labels `y = x·theta_star + N(0, noise_std²)`.
pub fn generate_dataset_with_model<R: Rng + ?Sized>(n: usize, theta_star: Array1<f64>, noise_std: f64, rng: &mut R) -> Dataset {
    let dim = theta_star.len();
    let mean = theta_star.mapv(|v| 1.5 / dim as f64 * v);
    let mut x = Array2::<f64>::zeros((n, dim));
    for mut row in x.rows_mut() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for (v, m) in row.iter_mut().zip(&mean) {
            let z: f64 = StandardNormal.sample(rng);
            *v = sign * m + z;
        }
    }
    let mut y = x.dot(&theta_star);
    for v in y.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += noise_std * z;
    }
    Dataset { x, y, theta_star }
}

/// `W` and `c` such that the loss gradient is `Wθ − c`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    pub w: Array2<f64>,
    pub c: Array1<f64>,
}

impl GramSystem {
    pub fn scaled(mut self, factor: f64) -> Self {
        self.w *= factor;
        self.c *= factor;
        self
    }

    pub fn gradient(&self, theta: &Array1<f64>) -> Array1<f64> {
        self.w.dot(theta) - &self.c
    }
}

/// `W = XᵀX`, `c = Xᵀy`.
pub fn gram(data: &Dataset) -> GramSystem {
    GramSystem {
        w: data.x.t().dot(&data.x),
        c: data.x.t().dot(&data.y),
    }
}

/// `(1/2N)·Σ (y_i − x_iᵀθ)²`.
pub fn loss(data: &Dataset, theta: &Array1<f64>) -> f64 {
    let r = &data.y - &data.x.dot(theta);
    r.dot(&r) / (2.0 * data.samples().max(1) as f64)
}

/// Gradient step restricted to the recovered blocks of `Wθ`; other coordinates are left as is.
pub fn partial_gd_step(
    theta: &Array1<f64>,
    mask: &[bool],
    blocks: &BTreeMap<usize, Vec<f64>>,
    c: &Array1<f64>,
    eta: f64,
) -> Result<Array1<f64>> {
    let dim = theta.len();
    if mask.is_empty() || !dim.is_multiple_of(mask.len()) || c.len() != dim {
        return Err(Error::Training(format!(
            "{} coordinates cannot be split into {} blocks",
            dim,
            mask.len()
        )));
    }
    let rows = dim / mask.len();
    let recovered = mask.iter().filter(|m| **m).count();
    if recovered != blocks.len() {
        return Err(Error::Training(format!(
            "mask marks {recovered} blocks but {} were supplied",
            blocks.len()
        )));
    }
    let mut next = theta.clone();
    for (&k, values) in blocks {
        if !mask.get(k).copied().unwrap_or(false) || values.len() != rows {
            return Err(Error::Training(format!("block {k} does not match the recovery mask")));
        }
        for (i, v) in values.iter().enumerate() {
            let j = k * rows + i;
            next[j] = theta[j] - eta * (v - c[j]);
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub scheme: SchemeSpec,
    pub tolerance: Tolerance,
    pub latency: LatencyModel,
    pub eta: f64,
    pub iterations: usize,
    pub redraw_code: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    pub iteration_time: f64,
    /// Whole for a single run; a mean after [`average`].
    pub messages: f64,
    pub recovered_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial_loss: f64,
    pub records: Vec<IterationRecord>,
}

impl Trajectory {
    /// Loss before the first step followed by the loss after every step.
    pub fn losses(&self) -> Vec<f64> {
        std::iter::once(self.initial_loss)
            .chain(self.records.iter().map(|r| r.loss))
            .collect()
    }
}

fn check_trainable(assignment: &ComputationAssignment, dim: usize) -> Result<()> {
    if matches!(assignment.recovery(), RecoveryRule::GradientCoding { .. }) || assignment.mode() == Mode::CodedCommunication {
        return Err(Error::Training("training needs a coded-computation scheme".into()));
    }
    if !dim.is_multiple_of(assignment.total_blocks()) {
        return Err(Error::Training(format!(
            "model dimension {dim} is not divisible into {} blocks",
            assignment.total_blocks()
        )));
    }
    Ok(())
}

/// Runs `iterations` steps from `θ = 0`. Iteration `t` draws its code (when re-drawing)
/// and worker speeds from stream `t` of the seed, like a Monte Carlo trial.
pub fn train(config: &TrainConfig, data: &Dataset) -> Result<Trajectory> {
    if !(config.eta > 0.0 && config.eta.is_finite()) {
        return Err(Error::Training(format!("learning rate must be positive, got {}", config.eta)));
    }
    let system = gram(data).scaled(1.0 / data.samples() as f64);
    let fixed = if config.redraw_code && config.scheme.is_random() {
        None
    } else {
        Some(config.scheme.build(&mut trial_rng(config.seed, FIXED_CODE_STREAM))?)
    };
    let mut theta = Array1::<f64>::zeros(data.dim());
    let initial_loss = loss(data, &theta);
    let mut records = Vec::with_capacity(config.iterations);
    for t in 0..config.iterations {
        let mut rng = trial_rng(config.seed, t as u64);
        let drawn;
        let assignment = match &fixed {
            Some(a) => a,
            None => {
                drawn = config.scheme.build(&mut rng)?;
                &drawn
            }
        };
        check_trainable(assignment, data.dim())?;
        let partition = partition_matrix(&system.w, assignment.total_blocks(), 1)?;
        let products: Vec<Vec<f64>> = partition.blocks().iter().map(|b| b.dot(&theta).to_vec()).collect();
        let payload = |worker: usize, order: usize| assignment.task(order, worker).combine(&products);
        let taus = draw_unit_times(assignment.workers(), &config.latency, &mut rng);
        let (outcome, values) = simulate_with_payloads(assignment, config.tolerance, &taus, &payload)?;
        theta = partial_gd_step(&theta, &outcome.recovered_mask, &values, &system.c, config.eta)?;
        records.push(IterationRecord {
            iteration: t + 1,
            loss: loss(data, &theta),
            iteration_time: outcome.completion_time,
            messages: outcome.messages_received as f64,
            recovered_fraction: outcome.recovered_fraction(),
        });
    }
    Ok(Trajectory { initial_loss, records })
}

/// Plain full-gradient descent from `θ = 0` on the same normalized system.
pub fn centralized_gd(data: &Dataset, eta: f64, iterations: usize) -> Trajectory {
    let system = gram(data).scaled(1.0 / data.samples() as f64);
    let mut theta = Array1::<f64>::zeros(data.dim());
    let initial_loss = loss(data, &theta);
    let records = (1..=iterations)
        .map(|iteration| {
            theta = &theta - &(system.gradient(&theta) * eta);
            IterationRecord {
                iteration,
                loss: loss(data, &theta),
                iteration_time: 0.0,
                messages: 0.0,
                recovered_fraction: 1.0,
            }
        })
        .collect();
    Trajectory { initial_loss, records }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub samples: usize,
    pub dim: usize,
    pub noise_std: f64,
}

/// Seed of run `index`; runs are independent of each other and of scheduling.
pub fn run_seed(seed: u64, index: u64) -> u64 {
    // splitmix64
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `runs` independent trainings, each on its own freshly drawn dataset.
pub fn train_runs(config: &TrainConfig, data: DataSpec, runs: u64, execution: Execution) -> Result<Vec<Trajectory>> {
    map_indexed(runs, execution, |i| {
        let seed = run_seed(config.seed, i);
        let dataset = generate_dataset(data.samples, data.dim, data.noise_std, &mut trial_rng(seed, DATASET_STREAM));
        train(&TrainConfig { seed, ..config.clone() }, &dataset)
    })
    .into_iter()
    .collect()
}

/// Per-iteration mean of several trajectories of equal length.
pub fn average(trajectories: &[Trajectory]) -> Trajectory {
    let n = trajectories.len().max(1) as f64;
    let len = trajectories.iter().map(|t| t.records.len()).min().unwrap_or(0);
    let records = (0..len)
        .map(|i| {
            let mean = |f: &dyn Fn(&IterationRecord) -> f64| trajectories.iter().map(|t| f(&t.records[i])).sum::<f64>() / n;
            IterationRecord {
                iteration: i + 1,
                loss: mean(&|r| r.loss),
                iteration_time: mean(&|r| r.iteration_time),
                messages: mean(&|r| r.messages),
                recovered_fraction: mean(&|r| r.recovered_fraction),
            }
        })
        .collect();
    Trajectory {
        initial_loss: trajectories.iter().map(|t| t.initial_loss).sum::<f64>() / n,
        records,
    }
}

/// Sample mean of the data matrix, one entry per column.
pub fn column_means(x: &Array2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DegreeVector;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn paper_scale_shapes() {
        let d = generate_dataset(2000, 800, 0.01, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(d.x.dim(), (2000, 800));
        assert_eq!(d.y.len(), 2000);
    }

    #[test]
    fn symmetric_mixture_is_centered() {
        let n = 20_000;
        let d = generate_dataset_with_model(n, array![1.0], 0.0, &mut ChaCha8Rng::seed_from_u64(4));
        // per-row variance is 1 + 1.5²
        let bound = 3.0 * (1.0f64 + 2.25).sqrt() / (n as f64).sqrt();
        assert!(column_means(&d.x)[0].abs() < bound);
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate_dataset(50, 6, 0.01, &mut ChaCha8Rng::seed_from_u64(9));
        let b = generate_dataset(50, 6, 0.01, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn gram_of_identity() {
        let d = Dataset {
            x: Array2::eye(2),
            y: array![1.0, 0.0],
            theta_star: array![1.0, 0.0],
        };
        let g = gram(&d);
        assert_eq!(g.w, Array2::eye(2));
        assert_eq!(g.c, array![1.0, 0.0]);
    }

    #[test]
    fn gram_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = generate_dataset(5, 3, 0.1, &mut rng);
        let g = gram(&d);
        assert_eq!(g.w, g.w.t());
        for _ in 0..100 {
            let v: Array1<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(v.dot(&g.w.dot(&v)) >= -1e-12);
        }
    }

    #[test]
    fn masked_step_on_hand_built_system() {
        let w = array![[2.0, 1.0, 0.0, 0.0], [1.0, 3.0, 1.0, 0.0], [0.0, 1.0, 4.0, 1.0], [0.0, 0.0, 1.0, 5.0]];
        let c = array![1.0, 2.0, 3.0, 4.0];
        let theta = array![0.5, -1.0, 0.25, 2.0];
        let wt = w.dot(&theta);
        let blocks: BTreeMap<usize, Vec<f64>> = (0..3).map(|k| (k, vec![wt[k]])).collect();
        let next = partial_gd_step(&theta, &[true, true, true, false], &blocks, &c, 0.1).unwrap();
        for j in 0..3 {
            assert_eq!(next[j], theta[j] - 0.1 * (wt[j] - c[j]));
        }
        assert_eq!(next[3].to_bits(), theta[3].to_bits());
    }

    #[test]
    fn full_and_empty_masks() {
        let w = array![[2.0, 1.0], [1.0, 3.0]];
        let c = array![1.0, -1.0];
        let theta = array![0.3, 0.7];
        let wt = w.dot(&theta);
        let all: BTreeMap<usize, Vec<f64>> = [(0, vec![wt[0]]), (1, vec![wt[1]])].into();
        let next = partial_gd_step(&theta, &[true, true], &all, &c, 0.1).unwrap();
        assert_eq!(next, &theta - &((&wt - &c) * 0.1));
        let none = partial_gd_step(&theta, &[false, false], &BTreeMap::new(), &c, 0.1).unwrap();
        assert_eq!(none, theta);
        assert!(partial_gd_step(&theta, &[true, false], &BTreeMap::new(), &c, 0.1).is_err());
    }

    #[test]
    fn loss_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = generate_dataset(7, 3, 0.5, &mut rng);
        let theta = array![0.1, -0.2, 0.3];
        let mut sum = 0.0;
        for i in 0..7 {
            let mut pred = 0.0;
            for j in 0..3 {
                pred += d.x[[i, j]] * theta[j];
            }
            sum += (d.y[i] - pred).powi(2);
        }
        assert!((loss(&d, &theta) - sum / 14.0).abs() < 1e-12);
        let noiseless = generate_dataset(7, 3, 0.0, &mut rng);
        assert!(loss(&noiseless, &noiseless.theta_star) < 1e-24);
    }

    fn small_config(q: f64) -> TrainConfig {
        TrainConfig {
            scheme: SchemeSpec::Rcs {
                workers: 8,
                degrees: DegreeVector::new(vec![1, 2, 3]).unwrap(),
                mode: Mode::CodedComputation,
                shifts: None,
            },
            tolerance: Tolerance::new(q).unwrap(),
            latency: LatencyModel::new(10.0, 0.01).unwrap(),
            eta: 0.1,
            iterations: 20,
            redraw_code: true,
            seed: 3,
        }
    }

    #[test]
    fn full_recovery_is_exact_gd() {
        let data = generate_dataset(200, 16, 0.01, &mut ChaCha8Rng::seed_from_u64(8));
        let coded = train(&small_config(0.0), &data).unwrap();
        let plain = centralized_gd(&data, 0.1, 20);
        for (a, b) in coded.losses().iter().zip(plain.losses()) {
            assert!((a - b).abs() <= 1e-9 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn gc_is_not_trainable() {
        let data = generate_dataset(20, 8, 0.01, &mut ChaCha8Rng::seed_from_u64(8));
        let cfg = TrainConfig {
            scheme: SchemeSpec::Gc { workers: 8, load: 2 },
            ..small_config(0.0)
        };
        assert!(matches!(train(&cfg, &data), Err(Error::Training(_))));
    }

    #[test]
    fn runs_are_schedule_independent() {
        let spec = DataSpec {
            samples: 100,
            dim: 16,
            noise_std: 0.01,
        };
        let seq = train_runs(&small_config(0.15), spec, 4, Execution::Sequential).unwrap();
        let par = train_runs(&small_config(0.15), spec, 4, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        let avg = average(&seq);
        assert_eq!(avg.records.len(), 20);
        assert!(avg.records.last().unwrap().loss < avg.initial_loss);
    }
}
