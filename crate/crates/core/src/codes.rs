//! Code constructions: RCS, generalized RCS, MDS-coded computation,
//! uncoded multi-message (UC-MMC) and gradient coding.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CodedTask, ComputationAssignment, DegreeVector, MessageSlot, Mode, RecoveryRule};

/// `L × K` matrix of block indices, each row a circular shift of one group's blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMatrix {
    workers: usize,
    groups: usize,
    /// `rows[i][w]` is the (global, 0-based) block at row `i`, column `w`.
    rows: Vec<Vec<usize>>,
    /// 0-based shift of each row; the 1-based offset is `shift + 1`.
    shifts: Vec<usize>,
    row_groups: Vec<usize>,
}

impl AssignmentMatrix {
    /// Builds the matrix from explicit per-row groups and shifts.
    pub fn from_shifts(workers: usize, groups: usize, row_groups: &[usize], shifts: &[usize]) -> Result<Self> {
        if row_groups.len() != shifts.len() {
            return Err(Error::InvalidShifts(format!(
                "{} rows but {} shifts",
                row_groups.len(),
                shifts.len()
            )));
        }
        let mut used = vec![vec![false; workers]; groups];
        for (&g, &shift) in row_groups.iter().zip(shifts) {
            if g >= groups {
                return Err(Error::InvalidGroupPlan(format!("group {} outside 1..={groups}", g + 1)));
            }
            if shift >= workers {
                return Err(Error::InvalidShifts(format!("offset {} outside 1..={workers}", shift + 1)));
            }
            if std::mem::replace(&mut used[g][shift], true) {
                return Err(Error::InvalidShifts(format!(
                    "offset {} used twice in group {}",
                    shift + 1,
                    g + 1
                )));
            }
        }
        let rows = row_groups
            .iter()
            .zip(shifts)
            .map(|(&g, &shift)| (0..workers).map(|w| g * workers + (w + shift) % workers).collect())
            .collect();
        Ok(Self {
            workers,
            groups,
            rows,
            shifts: shifts.to_vec(),
            row_groups: row_groups.to_vec(),
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn shifts(&self) -> &[usize] {
        &self.shifts
    }

    /// 1-based circular-shift offsets, in row order.
    pub fn offsets(&self) -> Vec<usize> {
        self.shifts.iter().map(|s| s + 1).collect()
    }

    pub fn row_groups(&self) -> &[usize] {
        &self.row_groups
    }

    pub fn total_blocks(&self) -> usize {
        self.workers * self.groups
    }
}

/// Group membership vector `z` for generalized RCS (stored 0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPlan {
    groups: usize,
    z: Vec<usize>,
}

impl GroupPlan {
    /// `z` uses the 1-based group labels `1..=groups`.
    pub fn new(groups: usize, z: &[usize]) -> Result<Self> {
        if groups == 0 {
            return Err(Error::InvalidGroupPlan("at least one group is required".into()));
        }
        if let Some(&bad) = z.iter().find(|&&g| g == 0 || g > groups) {
            return Err(Error::InvalidGroupPlan(format!("entry {bad} outside 1..={groups}")));
        }
        Ok(Self {
            groups,
            z: z.iter().map(|g| g - 1).collect(),
        })
    }

    /// Every row in group 1.
    pub fn single(rows: usize) -> Self {
        Self {
            groups: 1,
            z: vec![0; rows],
        }
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// 0-based group of each row.
    pub fn rows(&self) -> &[usize] {
        &self.z
    }

    /// 1-based labels, as written in configurations.
    pub fn labels(&self) -> Vec<usize> {
        self.z.iter().map(|g| g + 1).collect()
    }

    pub fn multiplicity(&self, group: usize) -> usize {
        self.z.iter().filter(|&&g| g == group).count()
    }
}

/// Draws `L = Σ d_i` distinct offsets uniformly and builds the RCS assignment matrix.
pub fn build_rcs_assignment<R: Rng + ?Sized>(workers: usize, degrees: &DegreeVector, rng: &mut R) -> Result<AssignmentMatrix> {
    build_grouped_assignment(workers, &GroupPlan::single(degrees.total()), rng)
}

/// Generalized variant: row `i` draws its offset from group `z(i)`'s pool, without replacement.
pub fn build_grouped_assignment<R: Rng + ?Sized>(workers: usize, plan: &GroupPlan, rng: &mut R) -> Result<AssignmentMatrix> {
    let mut pools = Vec::with_capacity(plan.groups());
    for g in 0..plan.groups() {
        let needed = plan.multiplicity(g);
        if needed > workers {
            return Err(Error::NotEnoughShifts {
                total: needed,
                available: workers,
            });
        }
        let mut pool: Vec<usize> = (0..workers).collect();
        let (drawn, _) = pool.partial_shuffle(rng, needed);
        // reversed so that `pop` yields draws in order
        pools.push(drawn.iter().rev().copied().collect::<Vec<_>>());
    }
    let shifts: Vec<usize> = plan
        .rows()
        .iter()
        .map(|&g| pools[g].pop().expect("pool sized to group multiplicity"))
        .collect();
    AssignmentMatrix::from_shifts(workers, plan.groups(), plan.rows(), &shifts)
}

/// Encoding phase: worker `w`'s order-`j` task sums column `w` over the rows of order `j`.
pub fn rcs_encode(matrix: &AssignmentMatrix, degrees: &DegreeVector, mode: Mode) -> Result<ComputationAssignment> {
    if matrix.rows().len() != degrees.total() {
        return Err(Error::InvalidAssignment(format!(
            "assignment matrix has {} rows but the degree vector needs {}",
            matrix.rows().len(),
            degrees.total()
        )));
    }
    let grid = (0..degrees.orders())
        .map(|j| {
            (0..matrix.workers())
                .map(|w| CodedTask::sum_of(degrees.rows_of_order(j).map(|l| matrix.rows()[l][w])))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let units: Vec<u32> = match mode {
        Mode::CodedComputation => (1..=degrees.orders() as u32).collect(),
        Mode::CodedCommunication => degrees.cumulative().into_iter().map(|u| u as u32).collect(),
    };
    let slots = units
        .into_iter()
        .enumerate()
        .map(|(j, units)| MessageSlot { orders: j..j + 1, units })
        .collect();
    ComputationAssignment::new(
        grid,
        matrix.total_blocks(),
        mode,
        slots,
        1.0 / matrix.groups() as f64,
        RecoveryRule::Peeling,
    )
}

/// Generalized RCS over `K·N` blocks; each task costs `1/N` of a base unit.
pub fn build_generalized_rcs<R: Rng + ?Sized>(
    workers: usize,
    plan: &GroupPlan,
    degrees: &DegreeVector,
    rng: &mut R,
) -> Result<ComputationAssignment> {
    if plan.rows().len() != degrees.total() {
        return Err(Error::InvalidGroupPlan(format!(
            "z has {} entries but L = {}",
            plan.rows().len(),
            degrees.total()
        )));
    }
    let matrix = build_grouped_assignment(workers, plan, rng)?;
    rcs_encode(&matrix, degrees, Mode::CodedComputation)
}

/// Default MDS evaluation points `x_i = 2^{i-1}`.
pub fn default_evaluation_points(workers: usize) -> Vec<f64> {
    (0..workers).map(|i| 2f64.powi(i as i32)).collect()
}

/// `(K̄, K)` MDS-coded computation with `r = K / K̄` tasks per worker.
///
/// Blocks are grouped by interleaving: group `g` holds `{g, g+r, g+2r, …}`,
/// and worker `i` weights the `p`-th member of each group by `x_i^p`.
/// Workers transmit once, after all `r` tasks.
pub fn build_mcc(workers: usize, kbar: usize, points: &[f64]) -> Result<ComputationAssignment> {
    if kbar == 0 || !workers.is_multiple_of(kbar) {
        return Err(Error::IndivisibleWorkers { workers, kbar });
    }
    mds_assignment(workers, kbar, workers / kbar, points)
}

/// MDS code with `r = ⌈K / K̄⌉`; the data is zero-padded to `r·K̄` blocks.
pub fn build_mcc_padded(workers: usize, kbar: usize, points: &[f64]) -> Result<ComputationAssignment> {
    if kbar == 0 || kbar > workers {
        return Err(Error::IndivisibleWorkers { workers, kbar });
    }
    mds_assignment(workers, kbar, workers.div_ceil(kbar), points)
}

fn mds_assignment(workers: usize, kbar: usize, load: usize, points: &[f64]) -> Result<ComputationAssignment> {
    if points.len() != workers {
        return Err(Error::InvalidEvaluationPoints(format!(
            "expected {workers} points, got {}",
            points.len()
        )));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidEvaluationPoints("points must be finite and pairwise distinct".into()));
    }
    let grid = (0..load)
        .map(|g| {
            points
                .iter()
                .map(|&x| CodedTask::new((0..kbar).map(|p| (g + p * load, x.powi(p as i32))).collect()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ComputationAssignment::new(
        grid,
        load * kbar,
        Mode::CodedComputation,
        vec![MessageSlot {
            orders: 0..load,
            units: load as u32,
        }],
        1.0,
        RecoveryRule::Mds {
            kbar,
            points: points.to_vec(),
        },
    )
}

/// Cyclic uncoded assignment: task `j` of worker `i` is block `(i + j) mod K`.
pub fn build_uc_mmc(workers: usize, load: usize, mode: Mode) -> Result<ComputationAssignment> {
    if load == 0 || load > workers {
        return Err(Error::InvalidLoad { load, workers });
    }
    let grid = (0..load)
        .map(|j| (0..workers).map(|i| CodedTask::uncoded((i + j) % workers)).collect())
        .collect();
    ComputationAssignment::multi_message(grid, workers, mode)
}

/// Gradient coding with load `r`: worker `k` holds partial computations `k, …, k+r-1`
/// (cyclically) and sends one combination after finishing all of them.
///
/// Only the support of each combination is stored; decodability follows the
/// `K − r + 1` threshold rule.
pub fn build_gc(workers: usize, load: usize) -> Result<ComputationAssignment> {
    if load == 0 || load > workers {
        return Err(Error::InvalidLoad { load, workers });
    }
    let row = (0..workers)
        .map(|k| CodedTask::sum_of((0..load).map(|j| (k + j) % workers)))
        .collect::<Result<Vec<_>>>()?;
    ComputationAssignment::new(
        vec![row],
        workers,
        Mode::CodedCommunication,
        vec![MessageSlot {
            orders: 0..1,
            units: load as u32,
        }],
        1.0,
        RecoveryRule::GradientCoding {
            threshold: gc_threshold(workers, load),
        },
    )
}

/// Number of workers that must report before gradient coding recovers the sum.
pub fn gc_threshold(workers: usize, load: usize) -> usize {
    workers - load + 1
}

/// Binary multi-message assignment from an explicit `orders × workers` grid of block lists.
pub fn custom_assignment(grid: &[Vec<Vec<usize>>], total_blocks: usize, mode: Mode) -> Result<ComputationAssignment> {
    let grid = grid
        .iter()
        .map(|row| {
            row.iter()
                .map(|blocks| CodedTask::sum_of(blocks.iter().copied()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ComputationAssignment::multi_message(grid, total_blocks, mode)
}

/// A scheme description that can (re)build its assignment, possibly at random.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeSpec {
    Rcs {
        workers: usize,
        degrees: DegreeVector,
        mode: Mode,
        /// Fixed 0-based shifts instead of random draws.
        shifts: Option<Vec<usize>>,
    },
    GeneralizedRcs {
        workers: usize,
        plan: GroupPlan,
        degrees: DegreeVector,
        shifts: Option<Vec<usize>>,
    },
    Mcc {
        workers: usize,
        kbar: usize,
        points: Vec<f64>,
    },
    UcMmc {
        workers: usize,
        load: usize,
        mode: Mode,
    },
    Gc {
        workers: usize,
        load: usize,
    },
    Fixed(ComputationAssignment),
}

impl SchemeSpec {
    /// Whether [`SchemeSpec::build`] consumes randomness.
    pub fn is_random(&self) -> bool {
        matches!(
            self,
            SchemeSpec::Rcs { shifts: None, .. } | SchemeSpec::GeneralizedRcs { shifts: None, .. }
        )
    }

    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ComputationAssignment> {
        self.build_with_matrix(rng).map(|(assignment, _)| assignment)
    }

    /// Like [`SchemeSpec::build`], also returning the assignment matrix of RCS-type schemes.
    pub fn build_with_matrix<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(ComputationAssignment, Option<AssignmentMatrix>)> {
        let plain = |a: Result<ComputationAssignment>| a.map(|a| (a, None));
        match self {
            SchemeSpec::Rcs {
                workers,
                degrees,
                mode,
                shifts,
            } => {
                let matrix = match shifts {
                    Some(shifts) => AssignmentMatrix::from_shifts(*workers, 1, &vec![0; shifts.len()], shifts)?,
                    None => build_rcs_assignment(*workers, degrees, rng)?,
                };
                Ok((rcs_encode(&matrix, degrees, *mode)?, Some(matrix)))
            }
            SchemeSpec::GeneralizedRcs {
                workers,
                plan,
                degrees,
                shifts,
            } => {
                if plan.rows().len() != degrees.total() {
                    return Err(Error::InvalidGroupPlan(format!(
                        "z has {} entries but L = {}",
                        plan.rows().len(),
                        degrees.total()
                    )));
                }
                let matrix = match shifts {
                    Some(shifts) => AssignmentMatrix::from_shifts(*workers, plan.groups(), plan.rows(), shifts)?,
                    None => build_grouped_assignment(*workers, plan, rng)?,
                };
                Ok((rcs_encode(&matrix, degrees, Mode::CodedComputation)?, Some(matrix)))
            }
            SchemeSpec::Mcc { workers, kbar, points } => plain(if workers % kbar == 0 {
                build_mcc(*workers, *kbar, points)
            } else {
                build_mcc_padded(*workers, *kbar, points)
            }),
            SchemeSpec::UcMmc { workers, load, mode } => plain(build_uc_mmc(*workers, *load, *mode)),
            SchemeSpec::Gc { workers, load } => plain(build_gc(*workers, *load)),
            SchemeSpec::Fixed(assignment) => Ok((assignment.clone(), None)),
        }
    }
}

/// The three `K = 4`, `r = 2` codes of the motivating example.
pub mod motivating {
    use super::*;

    /// `C_MDS`: a `(2, 4)` MDS code with points `1, 2, 4, 8`.
    pub fn mds() -> ComputationAssignment {
        build_mcc(4, 2, &default_evaluation_points(4)).expect("valid construction")
    }

    /// `C_UC-MMC`: cyclic shifts, one message per task.
    pub fn uc_mmc() -> ComputationAssignment {
        build_uc_mmc(4, 2, Mode::CodedComputation).expect("valid construction")
    }

    /// `C_CCPR`: uncoded first order, pairwise sums in the second.
    pub fn ccpr() -> ComputationAssignment {
        custom_assignment(&ccpr_grid(), 4, Mode::CodedComputation).expect("valid construction")
    }

    pub fn ccpr_grid() -> Vec<Vec<Vec<usize>>> {
        vec![
            vec![vec![0], vec![1], vec![2], vec![3]],
            vec![vec![2, 3], vec![0, 2], vec![1, 3], vec![0, 1]],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_based(task: &CodedTask) -> Vec<usize> {
        task.blocks().map(|b| b + 1).collect()
    }

    fn k20_matrix() -> AssignmentMatrix {
        let shifts: Vec<usize> = [1, 4, 11, 15, 6, 18].iter().map(|o| o - 1).collect();
        AssignmentMatrix::from_shifts(20, 1, &[0; 6], &shifts).unwrap()
    }

    #[test]
    fn k20_offset_rows() {
        let a = k20_matrix();
        let row = |i: usize| a.rows()[i].iter().map(|b| b + 1).collect::<Vec<_>>();
        assert_eq!(row(0), (1..=20).collect::<Vec<_>>());
        assert_eq!(&row(1)[..3], &[4, 5, 6]);
        assert_eq!(row(1)[19], 3);
        assert_eq!(&row(2)[..2], &[11, 12]);
        assert_eq!(row(2)[19], 10);
        assert_eq!(a.offsets(), vec![1, 4, 11, 15, 6, 18]);
    }

    #[test]
    fn k20_encoding_layout() {
        let dv = DegreeVector::new(vec![1, 2, 3]).unwrap();
        let c = rcs_encode(&k20_matrix(), &dv, Mode::CodedComputation).unwrap();
        let w1: Vec<Vec<usize>> = c.worker_tasks(0).into_iter().map(one_based).collect();
        assert_eq!(w1, vec![vec![1], vec![4, 11], vec![15, 6, 18]]);
        let w2: Vec<Vec<usize>> = c.worker_tasks(1).into_iter().map(one_based).collect();
        assert_eq!(w2, vec![vec![2], vec![5, 12], vec![16, 7, 19]]);
        assert!(c.grid().iter().flatten().all(CodedTask::is_binary));
    }

    #[test]
    fn zero_shift_single_row() {
        let dv = DegreeVector::new(vec![1]).unwrap();
        let a = AssignmentMatrix::from_shifts(4, 1, &[0], &[0]).unwrap();
        assert_eq!(a.rows()[0], vec![0, 1, 2, 3]);
        let c = rcs_encode(&a, &dv, Mode::CodedComputation).unwrap();
        assert_eq!(c.orders(), 1);
        for w in 0..4 {
            assert_eq!(c.task(0, w).sorted_blocks(), vec![w]);
        }
    }

    #[test]
    fn too_many_rows_for_workers() {
        let dv = DegreeVector::new(vec![1, 2, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            build_rcs_assignment(5, &dv, &mut rng),
            Err(Error::NotEnoughShifts { total: 6, available: 5 })
        ));
    }

    #[test]
    fn repeated_offsets_rejected() {
        assert!(AssignmentMatrix::from_shifts(4, 1, &[0, 0], &[1, 1]).is_err());
        // Same offset in two different groups is fine.
        assert!(AssignmentMatrix::from_shifts(4, 2, &[0, 1], &[1, 1]).is_ok());
    }

    fn two_group_matrix() -> AssignmentMatrix {
        let plan = GroupPlan::new(2, &[2, 1, 1, 2, 2]).unwrap();
        // group-1 offsets {1, 3}, group-2 offsets {1, 4, 3}, consumed in order
        let shifts = [0, 0, 2, 3, 2];
        AssignmentMatrix::from_shifts(4, 2, plan.rows(), &shifts).unwrap()
    }

    #[test]
    fn generalized_two_group_rows() {
        let a = two_group_matrix();
        let rows: Vec<Vec<usize>> = a.rows().iter().map(|r| r.iter().map(|b| b + 1).collect()).collect();
        assert_eq!(
            rows,
            vec![
                vec![5, 6, 7, 8],
                vec![1, 2, 3, 4],
                vec![3, 4, 1, 2],
                vec![8, 5, 6, 7],
                vec![7, 8, 5, 6],
            ]
        );
    }

    #[test]
    fn generalized_two_group_encoding() {
        let dv = DegreeVector::new(vec![1, 1, 3]).unwrap();
        let c = rcs_encode(&two_group_matrix(), &dv, Mode::CodedComputation).unwrap();
        assert_eq!(c.total_blocks(), 8);
        assert_eq!(c.unit_cost(), 0.5);
        let w1: Vec<Vec<usize>> = c.worker_tasks(0).into_iter().map(one_based).collect();
        assert_eq!(w1, vec![vec![5], vec![1], vec![3, 8, 7]]);
        let w4: Vec<Vec<usize>> = c.worker_tasks(3).into_iter().map(one_based).collect();
        assert_eq!(w4, vec![vec![8], vec![4], vec![2, 7, 6]]);
    }

    #[test]
    fn generalized_plan_length_must_match() {
        let dv = DegreeVector::new(vec![1, 1, 3]).unwrap();
        let plan = GroupPlan::new(2, &[1, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(build_generalized_rcs(4, &plan, &dv, &mut rng).is_err());
        let crowded = GroupPlan::new(2, &[1, 1, 1, 1, 1]).unwrap();
        assert!(build_generalized_rcs(4, &crowded, &dv, &mut rng).is_err());
        assert!(GroupPlan::new(2, &[3]).is_err());
    }

    #[test]
    fn mds_motivating_example() {
        let c = motivating::mds();
        assert_eq!(c.orders(), 2);
        assert_eq!(c.message_schedule(), vec![2]);
        // worker 2: [W1 + 2 W3; W2 + 2 W4]
        assert_eq!(c.task(0, 1).entries(), &[(0, 1.0), (2, 2.0)]);
        assert_eq!(c.task(1, 1).entries(), &[(1, 1.0), (3, 2.0)]);
        assert_eq!(c.task(0, 3).entries(), &[(0, 1.0), (2, 8.0)]);
    }

    #[test]
    fn mds_uncoded_when_kbar_is_k() {
        let c = build_mcc(5, 5, &default_evaluation_points(5)).unwrap();
        assert_eq!(c.orders(), 1);
        for w in 0..5 {
            assert_eq!(c.task(0, w).degree(), 5);
        }
        let c = build_mcc(4, 1, &default_evaluation_points(4)).unwrap();
        assert_eq!(c.orders(), 4);
        for w in 0..4 {
            assert!(c.worker_tasks(w).iter().all(|t| t.degree() == 1 && t.is_binary()));
        }
    }

    #[test]
    fn mds_errors() {
        assert!(matches!(build_mcc(40, 14, &default_evaluation_points(40)), Err(Error::IndivisibleWorkers { .. })));
        assert!(build_mcc(4, 2, &[1.0, 2.0, 2.0, 3.0]).is_err());
        assert!(build_mcc(4, 2, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn padded_mds_for_forty_workers() {
        let c = build_mcc_padded(40, 14, &default_evaluation_points(40)).unwrap();
        assert_eq!(c.orders(), 3);
        assert_eq!(c.total_blocks(), 42);
        assert_eq!(c.message_schedule(), vec![3]);
        assert_eq!(c.recovery(), &RecoveryRule::Mds { kbar: 14, points: default_evaluation_points(40) });
    }

    #[test]
    fn uc_mmc_examples() {
        let c = build_uc_mmc(4, 2, Mode::CodedComputation).unwrap();
        let rows: Vec<Vec<usize>> = (0..2).map(|j| (0..4).map(|w| c.task(j, w).sorted_blocks()[0] + 1).collect()).collect();
        assert_eq!(rows, vec![vec![1, 2, 3, 4], vec![2, 3, 4, 1]]);
        let c = build_uc_mmc(40, 6, Mode::CodedComputation).unwrap();
        for j in 0..6 {
            for w in 0..40 {
                assert_eq!(c.task(j, w).sorted_blocks(), vec![(w + j) % 40]);
            }
        }
        let c = build_uc_mmc(3, 1, Mode::CodedComputation).unwrap();
        assert_eq!(c.message_schedule(), vec![1]);
        assert!(build_uc_mmc(3, 4, Mode::CodedComputation).is_err());
    }

    #[test]
    fn gc_thresholds() {
        assert_eq!(gc_threshold(4, 2), 3);
        assert_eq!(gc_threshold(40, 6), 35);
        assert_eq!(gc_threshold(7, 7), 1);
        let c = build_gc(40, 6).unwrap();
        assert_eq!(c.recovery(), &RecoveryRule::GradientCoding { threshold: 35 });
        assert_eq!(c.message_schedule(), vec![6]);
        assert_eq!(c.task(0, 39).sorted_blocks(), vec![0, 1, 2, 3, 4, 39]);
    }

    #[test]
    fn ccpr_example_grid() {
        let c = motivating::ccpr();
        assert_eq!(c.task(1, 0).sorted_blocks(), vec![2, 3]);
        assert_eq!(c.task(1, 3).sorted_blocks(), vec![0, 1]);
    }

    #[test]
    fn same_seed_same_code() {
        let spec = SchemeSpec::Rcs {
            workers: 40,
            degrees: DegreeVector::new(vec![1, 2, 3]).unwrap(),
            mode: Mode::CodedComputation,
            shifts: None,
        };
        let a = spec.build(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = spec.build(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    /// Counts, for each order and block, how many of the K order-j tasks contain the block.
    fn order_counts(c: &ComputationAssignment, order: usize) -> Vec<usize> {
        let mut counts = vec![0; c.total_blocks()];
        for w in 0..c.workers() {
            for b in c.task(order, w).blocks() {
                counts[b] += 1;
            }
        }
        counts
    }

    proptest! {
        #[test]
        fn rcs_rows_are_permutations(k in 1usize..30, extra in prop::collection::vec(0usize..3, 0..4), seed in any::<u64>()) {
            let mut d = vec![1];
            for e in extra { let last = *d.last().unwrap(); d.push(last + e); }
            let dv = DegreeVector::new(d).unwrap();
            prop_assume!(dv.total() <= k);
            let a = build_rcs_assignment(k, &dv, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for row in a.rows() {
                let mut sorted = row.clone();
                sorted.sort_unstable();
                prop_assert_eq!(sorted, (0..k).collect::<Vec<_>>());
            }
            let mut offsets = a.shifts().to_vec();
            offsets.sort_unstable();
            offsets.dedup();
            prop_assert_eq!(offsets.len(), dv.total());
        }

        #[test]
        fn rcs_uniformity(k in 6usize..30, seed in any::<u64>()) {
            let dv = DegreeVector::new(vec![1, 2, 3]).unwrap();
            let spec = SchemeSpec::Rcs { workers: k, degrees: dv.clone(), mode: Mode::CodedComputation, shifts: None };
            let c = spec.build(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for j in 0..3 {
                prop_assert!(order_counts(&c, j).iter().all(|&n| n == dv.degrees()[j]));
                prop_assert!((0..k).all(|w| c.task(j, w).degree() == dv.degrees()[j]));
            }
            for w in 0..k {
                let mut blocks: Vec<usize> = c.worker_tasks(w).iter().flat_map(|t| t.blocks()).collect();
                let n = blocks.len();
                blocks.sort_unstable();
                blocks.dedup();
                prop_assert_eq!(blocks.len(), n);
            }
        }

        #[test]
        fn generalized_orderwise_uniformity(seed in any::<u64>()) {
            let z = [1, 2, 1, 1, 2, 2, 1, 1, 1, 1, 2, 2, 2, 2];
            let plan = GroupPlan::new(2, &z).unwrap();
            let dv = DegreeVector::new(vec![1, 1, 4, 8]).unwrap();
            let c = build_generalized_rcs(40, &plan, &dv, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for j in 0..dv.orders() {
                let rows = dv.rows_of_order(j);
                let counts = order_counts(&c, j);
                for (b, &n) in counts.iter().enumerate() {
                    let group = b / 40;
                    let expected = plan.rows()[rows.clone()].iter().filter(|&&g| g == group).count();
                    prop_assert_eq!(n, expected);
                }
            }
        }
    }
}
