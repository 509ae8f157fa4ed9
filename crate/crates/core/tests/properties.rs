use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use irtmpt::category::PsiCell;
use irtmpt::diagnostics::{jacobian, jacobian_with, jacobian_with_gauge_column, numerical_rank, simulate_table};
use irtmpt::equivalence::{
    apply_transform, eta_range, generate_nonidentifiable, CaseLabel, EtaXiTransform, Xi, XI_CONSISTENCY_TOL,
};
use irtmpt::error::Error;
use irtmpt::exec::Execution;
use irtmpt::forward::{category_distribution, check_necessary_equalities, conditional_probs_from_distribution,
    conditional_probs_from_psi};
use irtmpt::graph::{build_default_graph, enumerate_paths, oracle_distribution};
use irtmpt::params::{
    additive_decompose, build_psi_table, canonicalize, from_canonical_coords, gauge_shift, logit_matrix,
    to_canonical_coords, CanonicalCoords, GaugeShift, IrtParams, LinkedProcess, ModelDims,
};

fn interior() -> impl Strategy<Value = f64> {
    1e-9..1.0 - 1e-9
}

fn cell() -> impl Strategy<Value = PsiCell> {
    prop::array::uniform8(interior())
}

fn random_params(t: usize, k: usize, seed: u64) -> IrtParams {
    IrtParams::random(ModelDims::new(t, k).unwrap(), &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closed_form_equals_oracle(psi in cell()) {
        let paths = enumerate_paths(&build_default_graph()).unwrap();
        let a = category_distribution(&psi).unwrap();
        let b = oracle_distribution(&paths, &psi).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-14);
        prop_assert!((a.total() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn conditionals_round_trip(psi in prop::array::uniform8(1e-3..1.0 - 1e-3)) {
        let a = conditional_probs_from_psi(&psi).as_array();
        let b = conditional_probs_from_distribution(&category_distribution(&psi).unwrap()).unwrap().as_array();
        for (x, y) in a.iter().zip(b) {
            prop_assert!((x - y).abs() <= 1e-13);
        }
    }

    #[test]
    fn gauge_shift_leaves_table_unchanged(
        seed in 0u64..10_000,
        t in 2usize..6,
        k in 2usize..6,
        u in prop::array::uniform5(-3.0..3.0f64),
        v in prop::array::uniform5(-3.0..3.0f64),
    ) {
        let p = random_params(t, k, seed);
        let q = gauge_shift(&p, &GaugeShift { u, v });
        prop_assert!(build_psi_table(&p).max_abs_diff(&build_psi_table(&q)).unwrap() <= 1e-14);
        let (a, b) = (canonicalize(&q), canonicalize(&p));
        let (ca, cb) = (to_canonical_coords(&a).unwrap().values, to_canonical_coords(&b).unwrap().values);
        for (x, y) in ca.iter().zip(&cb) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn coordinates_round_trip(seed in 0u64..10_000, t in 2usize..8, k in 2usize..8) {
        let p = random_params(t, k, seed);
        let c = to_canonical_coords(&p).unwrap();
        let back = from_canonical_coords(&c.values, c.dims).unwrap();
        let again = to_canonical_coords(&back).unwrap();
        for (x, y) in c.values.iter().zip(&again.values) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn built_tables_are_additive(seed in 0u64..10_000, t in 2usize..6, k in 2usize..6) {
        let table = build_psi_table(&random_params(t, k, seed));
        for s in LinkedProcess::ALL {
            let fit = additive_decompose(&logit_matrix(table.linked(s)), 1e-12);
            prop_assert!(fit.is_ok(), "{s}: {:?}", fit.err());
        }
    }

    #[test]
    fn generated_pairs_are_equivalent(seed in 0u64..5_000, t in 2usize..5, k in 3usize..6, case in 0usize..3) {
        let case = [CaseLabel::ThetaSixZero, CaseLabel::DeltaSixZero, CaseLabel::BothZero][case];
        let pair = generate_nonidentifiable(ModelDims::new(t, k).unwrap(), case, seed, 0.05).unwrap();
        prop_assert!(pair.verification.max_dist_distribution <= 1e-12);
        prop_assert!(pair.verification.max_dist_params >= 1e-3);
        let eq = check_necessary_equalities(&pair.omega_table, &pair.omega_prime_table, 1e-12).unwrap();
        prop_assert!(eq.pass);
        if let Xi::Global(xi) = pair.transform.xi {
            for ti in 0..t {
                for ki in 0..k {
                    let gap = (xi * pair.omega_table.psi3[(ti, ki)] - pair.omega_prime_table.psi3[(ti, ki)]).abs();
                    prop_assert!(gap <= XI_CONSISTENCY_TOL);
                }
            }
        }
    }

    #[test]
    fn eta_above_range_is_rejected(seed in 0u64..5_000, bump in 1e-3..0.5f64) {
        let pair = generate_nonidentifiable(ModelDims::new(3, 4).unwrap(), CaseLabel::ThetaSixZero, seed, 0.05).unwrap();
        let r = eta_range(&pair.omega_table);
        let tr = EtaXiTransform { eta: r.hi * (1.0 + bump), xi: Xi::Global(1.0) };
        prop_assert!(matches!(apply_transform(&pair.omega_table, &tr), Err(Error::RangeViolation { .. })), "expected a range violation");
    }
}

#[test]
fn jacobian_sparsity_follows_indices() {
    let p = random_params(3, 4, 21);
    let j = jacobian(&p, 1e-5).unwrap();
    let dims = j.dims;
    for s in LinkedProcess::ALL {
        for t in 0..dims.t - 1 {
            let col = CanonicalCoords::theta_index(dims, s, t).unwrap();
            for r in 0..j.matrix.nrows() {
                let row_t = r / 7 / dims.k;
                if row_t != t && row_t != dims.t - 1 {
                    assert_eq!(j.matrix[(r, col)], 0.0, "theta {s} t={t} row {r}");
                }
            }
        }
        for k in 0..dims.k - 1 {
            let col = CanonicalCoords::delta_index(dims, s, k).unwrap();
            for r in 0..j.matrix.nrows() {
                let row_k = (r / 7) % dims.k;
                if row_k != k && row_k != dims.k - 1 {
                    assert_eq!(j.matrix[(r, col)], 0.0, "delta {s} k={k} row {r}");
                }
            }
        }
    }
}

#[test]
fn jacobian_columns_sum_to_zero_with_implied_na() {
    let p = random_params(2, 3, 22);
    let j = jacobian(&p, 1e-5).unwrap();
    // the NA derivative is minus the sum of the stacked seven, so checking the
    // full eight-category sum amounts to recomputing NA independently
    let coords = to_canonical_coords(&p).unwrap();
    for c in 0..j.matrix.ncols() {
        let shifted = |h: f64| {
            let mut x = coords.values.clone();
            x[c] += h;
            build_psi_table(&from_canonical_coords(&x, coords.dims).unwrap())
        };
        let (tp, tm) = (shifted(1e-5), shifted(-1e-5));
        for cell in 0..6 {
            let (t, k) = (cell / 3, cell % 3);
            let dp = category_distribution(&tp.cell(t, k)).unwrap();
            let dm = category_distribution(&tm.cell(t, k)).unwrap();
            let d_na = (dp.0[7] - dm.0[7]) / 2e-5;
            let d_rest: f64 = (0..7).map(|r| j.matrix[(cell * 7 + r, c)]).sum();
            assert!((d_na + d_rest).abs() <= 1e-10, "column {c} cell {cell}");
        }
    }
}

#[test]
fn jacobian_step_agreement() {
    let p = random_params(2, 3, 23);
    let a = jacobian(&p, 1e-4).unwrap();
    let b = jacobian(&p, 1e-5).unwrap();
    assert!((&a.matrix - &b.matrix).amax() <= 1e-6);
}

#[test]
fn gauge_column_adds_no_rank() {
    let p = random_params(3, 4, 24);
    let base = numerical_rank(&jacobian(&p, 1e-5).unwrap(), 1e-7);
    for s in LinkedProcess::ALL {
        let aug = numerical_rank(&jacobian_with_gauge_column(&p, 1e-5, s).unwrap(), 1e-7);
        assert_eq!(aug.param_count, base.param_count + 1);
        assert_eq!(aug.rank, base.rank, "{s}");
    }
}

#[test]
fn execution_modes_agree() {
    let p = random_params(3, 4, 25);
    let a = jacobian_with(&p, 1e-5, Execution::Sequential).unwrap();
    let b = jacobian_with(&p, 1e-5, Execution::Parallel).unwrap();
    assert_eq!(a.matrix, b.matrix);
    let table = build_psi_table(&p);
    assert_eq!(
        simulate_table(&table, 300, 4, Execution::Sequential).unwrap(),
        simulate_table(&table, 300, 4, Execution::Parallel).unwrap()
    );
}

#[test]
fn cutoff_controls_rank() {
    let p = random_params(3, 4, 26);
    let j = jacobian(&p, 1e-5).unwrap();
    let loose = numerical_rank(&j, 0.5);
    let tight = numerical_rank(&j, 1e-7);
    assert!(loose.rank < tight.rank);
    assert!(loose.rank >= 1);
}
