use ccpr::codes::motivating;
use ccpr::decoder::Tolerance;
use ccpr::model::CumulativeType;
use ccpr::sim::enumerate::{cdf_from_counts, enumerate_all, enumerate_successful};
use ccpr::sim::LatencyModel;

// (N_2, N_1, N_0), MCC, UC-MMC, CCPR
const FULL: [([usize; 3], [u128; 3]); 9] = [
    ([4, 0, 0], [1, 1, 1]),
    ([3, 1, 0], [4, 4, 4]),
    ([3, 0, 1], [4, 4, 4]),
    ([2, 2, 0], [6, 6, 6]),
    ([2, 1, 1], [12, 8, 12]),
    ([2, 0, 2], [6, 2, 6]),
    ([1, 3, 0], [0, 4, 4]),
    ([1, 2, 1], [0, 4, 8]),
    // printed as (0, 4, 1), which does not sum to K = 4
    ([0, 4, 0], [0, 1, 1]),
];

const PARTIAL: [([usize; 3], [u128; 3]); 11] = [
    ([4, 0, 0], [1, 1, 1]),
    ([3, 1, 0], [4, 4, 4]),
    ([3, 0, 1], [4, 4, 4]),
    ([2, 2, 0], [6, 6, 6]),
    ([2, 1, 1], [12, 12, 12]),
    ([2, 0, 2], [6, 6, 6]),
    ([1, 3, 0], [0, 4, 4]),
    ([1, 2, 1], [0, 12, 12]),
    ([1, 1, 2], [0, 8, 8]),
    ([0, 4, 0], [0, 1, 1]),
    ([0, 3, 1], [0, 4, 4]),
];

fn check(rows: &[([usize; 3], [u128; 3])], q: f64) {
    let tol = Tolerance::new(q).unwrap();
    let codes = [motivating::mds(), motivating::uc_mmc(), motivating::ccpr()];
    for (ty, expected) in rows {
        let ty = CumulativeType::from_table_order(ty);
        for (code, want) in codes.iter().zip(expected) {
            assert_eq!(enumerate_successful(code, tol, &ty), *want, "{:?}", ty.table_order());
        }
    }
    // types absent from the table have no successful vector under any scheme
    for code in &codes {
        let listed: Vec<Vec<usize>> = rows.iter().map(|r| r.0.to_vec()).collect();
        for c in enumerate_all(code, tol).unwrap() {
            if !listed.contains(&c.ty.table_order()) {
                assert_eq!(c.successful, 0, "{:?}", c.ty.table_order());
            }
        }
    }
}

#[test]
fn full_recovery_counts() {
    check(&FULL, 0.0);
}

#[test]
fn three_of_four_counts() {
    check(&PARTIAL, 0.25);
}

fn grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 * 0.003).collect()
}

#[test]
fn ccpr_cdf_dominates_at_full_recovery() {
    let model = LatencyModel::new(10.0, 0.01).unwrap();
    let q = Tolerance::exact();
    let counts = |c| enumerate_all(&c, q).unwrap();
    let (mds, uc, cc) = (counts(motivating::mds()), counts(motivating::uc_mmc()), counts(motivating::ccpr()));
    for t in grid() {
        let ccpr = cdf_from_counts(&cc, 1.0, t, &model);
        assert!(ccpr + 1e-12 >= cdf_from_counts(&mds, 1.0, t, &model), "t={t}");
        assert!(ccpr + 1e-12 >= cdf_from_counts(&uc, 1.0, t, &model), "t={t}");
    }
}

#[test]
fn ccpr_matches_uc_mmc_at_three_of_four() {
    let model = LatencyModel::new(10.0, 0.01).unwrap();
    let q = Tolerance::new(0.25).unwrap();
    let uc = enumerate_all(&motivating::uc_mmc(), q).unwrap();
    let cc = enumerate_all(&motivating::ccpr(), q).unwrap();
    for t in grid() {
        let (a, b) = (cdf_from_counts(&uc, 1.0, t, &model), cdf_from_counts(&cc, 1.0, t, &model));
        assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
    }
}

#[test]
fn every_full_message_set_succeeds() {
    let model = LatencyModel::new(10.0, 0.01).unwrap();
    for code in [motivating::mds(), motivating::uc_mmc(), motivating::ccpr()] {
        let counts = enumerate_all(&code, Tolerance::exact()).unwrap();
        let p = cdf_from_counts(&counts, code.unit_cost(), 1e3, &model);
        assert!((p - 1.0).abs() < 1e-12);
    }
}
