use nalgebra::{DMatrix, Vector3};
use proptest::prelude::*;

use qdoe::design::{
    evaluate_criterion, iid_vs_mixed_under_lowner, optimize_frequencies, OptimalDesignResult,
    OptimalityCriterion, OptimizeOptions,
};
use qdoe::fisher::{classical_fisher, sld_qfi, Design, FisherMatrix};
use qdoe::linalg::{max_eigenvalue, min_eigenvalue, pseudo_inverse_sym};
use qdoe::quantum::{
    from_pauli_coordinates, mix_states, LinearScaling, ParamPoint, PauliChannel, Povm, QubitState,
};

fn unit(v: [f64; 3]) -> Vector3<f64> {
    let v = Vector3::from(v);
    let n = v.norm();
    if n < 1e-6 {
        Vector3::z()
    } else {
        v / n
    }
}

fn ball_point(dir: [f64; 3], radius: f64) -> [f64; 3] {
    let u = unit(dir) * radius;
    [u[0], u[1], u[2]]
}

fn projective(dir: [f64; 3]) -> Povm {
    let n = unit(dir);
    Povm::new(vec![from_pauli_coordinates(1.0, &n), from_pauli_coordinates(1.0, &-n)]).unwrap()
}

fn fim(entries: DMatrix<f64>) -> FisherMatrix {
    FisherMatrix::classical(entries).unwrap()
}

/// `G Gᵀ + shift·I` from a flat list of `n²` entries.
fn gram(n: usize, flat: &[f64], shift: f64) -> DMatrix<f64> {
    let g = DMatrix::from_column_slice(n, n, &flat[..n * n]);
    &g * g.transpose() + DMatrix::identity(n, n) * shift
}

fn psd_gap(big: &DMatrix<f64>, small: &DMatrix<f64>) -> f64 {
    let scale = 1.0_f64.max(max_eigenvalue(big).abs());
    min_eigenvalue(&(big - small)) / scale
}

fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n)
}

fn dir() -> impl Strategy<Value = [f64; 3]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn classical_below_quantum_scaling(
        tdir in dir(), tr in 0.05..0.95f64,
        sdir in dir(), sr in 0.05..0.95f64,
        mdir in dir(),
    ) {
        let theta = ParamPoint::from(ball_point(tdir, tr));
        let state = QubitState::new(ball_point(sdir, sr)).unwrap();
        let design = Design::new(state, projective(mdir));
        let jc = classical_fisher(&LinearScaling, &design, &theta).unwrap();
        let jq = sld_qfi(&LinearScaling, &state, &theta).unwrap();
        prop_assert!(psd_gap(jq.entries(), jc.entries()) >= -1e-9);
    }

    #[test]
    fn classical_below_quantum_pauli(
        raw in [0.02..1.0f64, 0.02..1.0f64, 0.02..1.0f64, 0.02..1.0f64],
        sdir in dir(), sr in 0.05..0.95f64,
        mdir in dir(),
    ) {
        let total: f64 = raw.iter().sum();
        let theta = ParamPoint::from([raw[1] / total, raw[2] / total, raw[3] / total]);
        let state = QubitState::new(ball_point(sdir, sr)).unwrap();
        let design = Design::new(state, projective(mdir));
        let jc = classical_fisher(&PauliChannel, &design, &theta).unwrap();
        let jq = sld_qfi(&PauliChannel, &state, &theta).unwrap();
        prop_assert!(psd_gap(jq.entries(), jc.entries()) >= -1e-9);
    }

    #[test]
    fn liapunov_chain(flat in entries(3), shift in 1e-3..1.0f64) {
        let j = gram(3, &flat, shift);
        let inv = j.clone().try_inverse().unwrap();
        let geo = (1.0 / j.determinant()).powf(1.0 / 3.0);
        let arith = inv.trace() / 3.0;
        let top = max_eigenvalue(&inv);
        let tol = 1e-9 * top;
        prop_assert!(geo <= arith + tol, "{geo} > {arith}");
        prop_assert!(arith <= top + tol, "{arith} > {top}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fisher_convex_in_state(
        s1 in dir(), r1 in 0.0..1.0f64,
        s2 in dir(), r2 in 0.0..1.0f64,
        tdir in dir(), tr in 0.05..0.95f64,
        mdir in dir(),
        p in 0.0..1.0f64,
    ) {
        let theta = ParamPoint::from(ball_point(tdir, tr));
        let povm = projective(mdir);
        let a = QubitState::new(ball_point(s1, r1)).unwrap();
        let b = QubitState::new(ball_point(s2, r2)).unwrap();
        let mixed = mix_states(&a, &b, p).unwrap();
        let j = |s: &QubitState| {
            classical_fisher(&LinearScaling, &Design::new(*s, povm.clone()), &theta)
                .unwrap()
                .entries()
                .clone()
        };
        let rhs = j(&a) * p + j(&b) * (1.0 - p);
        prop_assert!(psd_gap(&rhs, &j(&mixed)) >= -1e-9);
    }

    #[test]
    fn criteria_are_isotonic(base in entries(3), extra in entries(3), shift in 1e-2..1.0f64) {
        let small = gram(3, &base, shift);
        let big = &small + gram(3, &extra, 0.0);
        for crit in [
            OptimalityCriterion::a(),
            OptimalityCriterion::D,
            OptimalityCriterion::E,
            OptimalityCriterion::gamma(0.5).unwrap(),
            OptimalityCriterion::gamma(3.0).unwrap(),
        ] {
            let vb = evaluate_criterion(&crit, &fim(big.clone())).unwrap();
            let vs = evaluate_criterion(&crit, &fim(small.clone())).unwrap();
            prop_assert!(vb <= vs + 1e-9 * vs.abs().max(1.0), "{crit}: {vb} > {vs}");
        }
    }

    #[test]
    fn criteria_are_convex(
        f1 in entries(3), f2 in entries(3),
        s1 in 1e-2..1.0f64, s2 in 1e-2..1.0f64,
    ) {
        let j1 = gram(3, &f1, s1);
        let j2 = gram(3, &f2, s2);
        for crit in [OptimalityCriterion::a(), OptimalityCriterion::D, OptimalityCriterion::E] {
            let v1 = evaluate_criterion(&crit, &fim(j1.clone())).unwrap();
            let v2 = evaluate_criterion(&crit, &fim(j2.clone())).unwrap();
            for k in 0..=10 {
                let p = k as f64 / 10.0;
                let mix = evaluate_criterion(&crit, &fim(&j1 * p + &j2 * (1.0 - p))).unwrap();
                let chord = p * v1 + (1.0 - p) * v2;
                prop_assert!(mix <= chord + 1e-9 * chord.abs().max(1.0), "{crit} at p = {p}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn support_respects_caratheodory(flat in prop::collection::vec(-1.0..1.0f64, 8 * 4)) {
        let fims: Vec<FisherMatrix> = flat
            .chunks(4)
            .map(|c| {
                let v = DMatrix::from_column_slice(2, 2, c);
                fim(&v * v.transpose())
            })
            .collect();
        let opts = OptimizeOptions { starts: 6, ..Default::default() };
        let bound = OptimalDesignResult::caratheodory_bound(2);
        for crit in [OptimalityCriterion::a(), OptimalityCriterion::D, OptimalityCriterion::E] {
            let r = optimize_frequencies(&crit, &fims, &opts).unwrap();
            prop_assert!(r.support_size <= bound, "{crit}: support {}", r.support_size);
            let total: f64 = r.weights.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lowner_dominant_is_iid_optimal(
        base in prop::collection::vec(-1.0..1.0f64, 4 * 9),
        lift in entries(3),
        pick in 0usize..4,
    ) {
        let mut mats: Vec<DMatrix<f64>> = base.chunks(9).map(|c| gram(3, c, 0.05)).collect();
        // dominate every candidate: sum of all plus a PSD lift
        let top = mats.iter().fold(DMatrix::zeros(3, 3), |acc, m| acc + m) + gram(3, &lift, 0.01);
        mats[pick] = top;
        let fims: Vec<FisherMatrix> = mats.into_iter().map(fim).collect();
        for crit in [
            OptimalityCriterion::a(),
            OptimalityCriterion::D,
            OptimalityCriterion::E,
            OptimalityCriterion::gamma(2.0).unwrap(),
        ] {
            let r = iid_vs_mixed_under_lowner(&fims, &crit).unwrap();
            prop_assert_eq!(r.dominant, pick);
            prop_assert!(r.iid_optimal, "{}: weight {}", crit, r.dominant_weight);
            prop_assert!(r.dominant_weight >= 1.0 - 1e-8);
        }
    }
}

#[test]
fn pseudo_inverse_of_singular_gram_is_consistent() {
    let v = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -1.0]);
    let j = &v * v.transpose();
    let p = pseudo_inverse_sym(&j, 1e-10);
    assert!((&j * &p * &j - &j).amax() < 1e-12);
}
