//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p qdoe --test acceptance`. Exits nonzero when any
//! criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qdoe::adaptive::{grid_sweep, run_static, AdaptiveConfig, GridSpec, SweepRow};
use qdoe::design::{
    binary_a_optimal, binary_d_optimal, binary_grid_search, evaluate_criterion, iid_vs_mixed_under_lowner,
    optimize_frequencies, BinaryDesignSummary, OptimalDesignResult, OptimalityCriterion, OptimizeOptions,
};
use qdoe::fisher::{classical_fisher, scaling_qfi_closed_form, sld_qfi, Design, FisherMatrix};
use qdoe::linalg::{max_abs_diff, max_eigenvalue, min_eigenvalue};
use qdoe::models::{
    self, delta_m1_m2, f_values, fig1_grid, fig1_sign_summary, pauli_qpt_partial_inverse_schur, AsymmetryPoint,
};
use qdoe::quantum::{
    from_pauli_coordinates, mix_states, Asymmetry, LinearScaling, ParamPoint, PauliChannel, Povm, QubitState,
};

const SEED: u64 = 2019;

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

fn ball(r: &mut ChaCha8Rng, max_radius: f64) -> [f64; 3] {
    loop {
        let v = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        if v.norm() <= 1.0 && v.norm() > 1e-3 {
            let v = v * max_radius;
            return [v[0], v[1], v[2]];
        }
    }
}

fn unit(r: &mut ChaCha8Rng) -> Vector3<f64> {
    let v = Vector3::from(ball(r, 1.0));
    v / v.norm()
}

fn projective(n: &Vector3<f64>) -> Povm {
    Povm::new(vec![from_pauli_coordinates(1.0, n), from_pauli_coordinates(1.0, &-n)]).unwrap()
}

fn random_pd(r: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    &g * g.transpose() + DMatrix::identity(n, n) * shift
}

fn pauli_theta(r: &mut ChaCha8Rng) -> ParamPoint {
    let raw: [f64; 4] = std::array::from_fn(|_| r.random_range(0.02..1.0));
    let s: f64 = raw.iter().sum();
    ParamPoint::from([raw[1] / s, raw[2] / s, raw[3] / s])
}

fn fim(m: DMatrix<f64>) -> FisherMatrix {
    FisherMatrix::classical(m).unwrap()
}

fn scaling_candidates(theta: &ParamPoint) -> Vec<FisherMatrix> {
    Design::pauli_trio()
        .iter()
        .map(|d| classical_fisher(&LinearScaling, d, theta).unwrap())
        .collect()
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

fn c1_qfi_closed_form() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let theta = ParamPoint::from(ball(&mut r, 0.95));
        let state = QubitState::new(ball(&mut r, 0.95)).unwrap();
        let generic = sld_qfi(&LinearScaling, &state, &theta).unwrap();
        let closed = scaling_qfi_closed_form(&theta, &state).unwrap();
        worst = worst.max(max_abs_diff(generic.entries(), closed.entries()));
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-10 && t < Duration::from_secs(5),
        format!("200 cases, max entry diff {worst:.2e} (tol 1e-10), {t:.2?} (limit 5 s)"),
    )
}

fn c2_scaling_a_optimal() -> Outcome {
    let mut r = rng(2);
    let opts = OptimizeOptions::default();
    let crit = OptimalityCriterion::a();
    let mut worst = 0.0_f64;
    let mut min_gap = f64::INFINITY;
    for _ in 0..50 {
        let theta = ParamPoint::from(ball(&mut r, 0.95));
        let fims = scaling_candidates(&theta);
        let res = optimize_frequencies(&crit, &fims, &opts).unwrap();
        let t = theta.as_slice();
        let root: Vec<f64> = t.iter().map(|x| (1.0 - x * x).sqrt()).collect();
        let s: f64 = root.iter().sum();
        let expected: Vec<f64> = root.iter().map(|x| x / s).collect();
        worst = worst.max(max_dev(&res.weights, &expected));
        let uniform = FisherMatrix::weighted_sum(&[1.0 / 3.0; 3], &fims).unwrap();
        let at_pt = evaluate_criterion(&crit, &uniform).unwrap();
        min_gap = min_gap.min(at_pt - res.value);
    }
    let mut iso_gap = 0.0_f64;
    for _ in 0..10 {
        let a = r.random_range(0.0..0.55);
        let signs: [f64; 3] = std::array::from_fn(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 });
        let theta = ParamPoint::from([a * signs[0], a * signs[1], a * signs[2]]);
        let fims = scaling_candidates(&theta);
        let res = optimize_frequencies(&crit, &fims, &opts).unwrap();
        let uniform = FisherMatrix::weighted_sum(&[1.0 / 3.0; 3], &fims).unwrap();
        iso_gap = iso_gap.max((evaluate_criterion(&crit, &uniform).unwrap() - res.value).abs());
    }
    outcome(
        worst <= 1e-8 && min_gap > 1e-10 && iso_gap <= 1e-10,
        format!(
            "weights max dev {worst:.2e} (tol 1e-8); anisotropic min A-gap {min_gap:.2e} (> 1e-10); isotropic max gap {iso_gap:.2e} (≤ 1e-10)"
        ),
    )
}

fn c3_pauli_channel() -> Outcome {
    let mut r = rng(3);
    let opts = OptimizeOptions::default();
    let (mut worst_a, mut worst_d) = (0.0_f64, 0.0_f64);
    for _ in 0..50 {
        let theta = pauli_theta(&mut r);
        let fims: Vec<FisherMatrix> = Design::pauli_trio()
            .iter()
            .map(|d| classical_fisher(&PauliChannel, d, &theta).unwrap())
            .collect();
        let a = optimize_frequencies(&OptimalityCriterion::a(), &fims, &opts).unwrap();
        let xi = PauliChannel::xi(theta.as_slice());
        let root: Vec<f64> = xi.iter().map(|x| (1.0 - x * x).sqrt()).collect();
        let s: f64 = root.iter().sum();
        let expected: Vec<f64> = root.iter().map(|x| x / s).collect();
        worst_a = worst_a.max(max_dev(&a.weights, &expected));
        let d = optimize_frequencies(&OptimalityCriterion::D, &fims, &opts).unwrap();
        worst_d = worst_d.max(max_dev(&d.weights, &[1.0 / 3.0; 3]));
    }
    outcome(
        worst_a <= 1e-8 && worst_d <= 1e-8,
        format!("50 θ: A weights max dev {worst_a:.2e}, D weights max dev {worst_d:.2e} (tol 1e-8)"),
    )
}

fn c4_binary_analytics() -> Outcome {
    let start = Instant::now();
    let mut r = rng(4);
    let (mut dl, mut dv) = (0.0_f64, 0.0_f64);
    for _ in 0..1000 {
        let j1 = fim(random_pd(&mut r, 2, 0.05));
        let j2 = fim(random_pd(&mut r, 2, 0.05));
        let w = random_pd(&mut r, 2, 0.05);
        let w = &w / w.trace();
        let s = BinaryDesignSummary::new(j1, j2).unwrap();
        let a = binary_a_optimal(&s, &w).unwrap();
        let ga = binary_grid_search(&s, Some(&w), 100_001);
        let d = binary_d_optimal(&s);
        let gd = binary_grid_search(&s, None, 100_001);
        for (opt, grid) in [(a, ga), (d, gd)] {
            dl = dl.max((opt.lambda - grid.lambda).abs());
            dv = dv.max((opt.value - grid.value).abs() / grid.value.abs());
        }
    }
    let t = start.elapsed();
    outcome(
        dl <= 1e-4 && dv <= 1e-6 && t < Duration::from_secs(30),
        format!("1000 pairs: max |Δλ| {dl:.2e} (tol 1e-4), max rel value err {dv:.2e} (tol 1e-6), {t:.2?} (limit 30 s)"),
    )
}

fn asymmetry_grid() -> Vec<AsymmetryPoint> {
    let mut pts = Vec::new();
    for i in -100..=100_i32 {
        for j in 0..=(100 - i.abs()) {
            pts.push(AsymmetryPoint::new(i as f64 / 100.0, j as f64 / 100.0).unwrap());
        }
    }
    pts
}

fn c5_asymmetry_closed_forms() -> Outcome {
    let (mut worst, mut checked, mut singular) = (0.0_f64, 0usize, 0usize);
    let mut order_ok = true;
    let mut delta_worst = 0.0_f64;
    for eps in asymmetry_grid() {
        let f = f_values(&eps);
        let target = (f.f1 + f.f2).powi(2);
        if target < f.f1.powi(2).min(f.f2.powi(2)) {
            order_ok = false;
        }
        let delta = delta_m1_m2(&eps, 0.0).unwrap();
        delta_worst = delta_worst.max((delta - eps.eps2().powi(2)).abs());
        if delta < 0.0 {
            order_ok = false;
        }
        if f.f1 == 0.0 || f.f2 == 0.0 {
            // one axis design carries no information: J[e_*(2)] is singular
            singular += 1;
            continue;
        }
        let theta = eps.param_point();
        let j1 = classical_fisher(&Asymmetry, &Design::pauli(1).unwrap(), &theta).unwrap();
        let j2 = classical_fisher(&Asymmetry, &Design::pauli(2).unwrap(), &theta).unwrap();
        let s = BinaryDesignSummary::new(j1, j2).unwrap();
        let lambda = models::asymm_lambda_star(&eps).unwrap();
        let inv = s.mixture(lambda).try_inverse().unwrap();
        worst = worst.max((inv[(0, 0)] - target).abs());
        checked += 1;
    }
    outcome(
        worst <= 1e-12 && order_ok && delta_worst <= 1e-12,
        format!(
            "{checked} regular points ({singular} with f1·f2 = 0 excluded): max |(J⁻¹)₁₁ − (f1+f2)²| {worst:.2e} (tol 1e-12); ordering holds: {order_ok}; max |Δ(0) − ε2²| {delta_worst:.2e}"
        ),
    )
}

fn c6_fig1_sign_structure() -> Outcome {
    let rows = fig1_grid(0.01).unwrap();
    let summary = fig1_sign_summary(&rows);
    let band_ok = rows
        .iter()
        .filter(|r| r.difference < -1e-12)
        .all(|r| r.eps1.abs() + r.eps2 > 0.9);
    let mut schur_worst = 0.0_f64;
    for r in &rows {
        let eps = AsymmetryPoint::new(r.eps1, r.eps2).unwrap();
        if let Ok(v) = pauli_qpt_partial_inverse_schur(&eps) {
            schur_worst = schur_worst.max((v - r.value_pt).abs());
        }
    }
    let frac = summary.fraction_nonnegative;
    outcome(
        frac >= 0.97 && band_ok && schur_worst <= 1e-9,
        format!(
            "{} points, {:.2}% ≥ −1e-12 (need ≥ 97%), negatives {} in |ε1|+ε2 > 0.9: {band_ok} (min band {:.2}); Schur vs formula {schur_worst:.2e} (tol 1e-9)",
            summary.points,
            100.0 * frac,
            summary.points - summary.nonnegative,
            summary.min_band_of_negatives,
        ),
    )
}

fn c7_static_mse() -> Outcome {
    let mut r = rng(7);
    let replicas = 100_000;
    let (mut worst_mse, mut worst_bias) = (0.0_f64, 0.0_f64);
    for _ in 0..20 {
        let e1 = r.random_range(-0.95..0.95_f64);
        let e2 = r.random_range(0.0..(1.0 - e1.abs()));
        let eps = AsymmetryPoint::new(e1, e2).unwrap();
        let f = f_values(&eps);
        let expected = f.f1.powi(2) / 100.0 + f.f2.powi(2) / 100.0;
        let (mut s_err, mut s_err2, mut s_sq, mut s_sq2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..replicas {
            let t = run_static(&eps, 200, 0.0, &mut r).unwrap();
            let err = t.estimate - eps.eps1();
            s_err += err;
            s_err2 += err * err;
            s_sq += err * err;
            s_sq2 += err.powi(4);
        }
        let n = replicas as f64;
        let mse = s_sq / n;
        let se_mse = ((s_sq2 / n - mse * mse) / (n - 1.0)).max(0.0).sqrt();
        let bias = s_err / n;
        let se_bias = ((s_err2 / n - bias * bias) / (n - 1.0)).max(0.0).sqrt();
        let z = |d: f64, se: f64| if se > 0.0 { d.abs() / se } else if d == 0.0 { 0.0 } else { f64::INFINITY };
        worst_mse = worst_mse.max(z(mse - expected, se_mse));
        worst_bias = worst_bias.max(z(bias, se_bias));
    }
    outcome(
        worst_mse <= 4.0 && worst_bias <= 4.0,
        format!("20 ε × 1e5 replicas: max |MSE − analytic| {worst_mse:.2} SE, max |bias| {worst_bias:.2} SE (limit 4)"),
    )
}

fn log_ratio(row: &SweepRow) -> f64 {
    row.log10_ratio_theta.abs()
}

fn c8_fig3() -> Outcome {
    let start = Instant::now();
    let cfg = AdaptiveConfig::new(200, 10, 0).unwrap();
    let sweep = grid_sweep(&GridSpec::new(0.05), &cfg, 2000, SEED).unwrap();
    let t = start.elapsed();
    let high: Vec<&SweepRow> = sweep.rows.iter().filter(|r| log_ratio(r) > 1.5).collect();
    let high_win = high.iter().filter(|r| r.ratio > 1.0).count();
    let low: Vec<&SweepRow> = sweep
        .rows
        .iter()
        .filter(|r| log_ratio(r) < 0.3 && !(r.eps1 == 0.0 && r.eps2 == 0.0))
        .collect();
    let low_loss = low.iter().filter(|r| r.ratio < 1.0).count();
    let frac_high = high_win as f64 / high.len() as f64;
    outcome(
        frac_high >= 0.9 && 2 * low_loss > low.len() && !high.is_empty() && !low.is_empty(),
        format!(
            "{} points ({} skipped), {t:.2?}: ratio > 1 at {high_win}/{} = {:.1}% of |log10(θ1/θ2)| > 1.5 (need ≥ 90%); ratio < 1 at {low_loss}/{} of |log10(θ1/θ2)| < 0.3 (need majority)",
            sweep.rows.len(),
            sweep.skipped.len(),
            high.len(),
            100.0 * frac_high,
            low.len(),
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c9_fig4_runway() -> Outcome {
    let mut grid = GridSpec::new(0.05);
    grid.low_noise_only = true;
    let mut pass = true;
    let mut detail = Vec::new();
    for k in [10, 5] {
        let mut stats = Vec::new();
        for runway in [0, 100] {
            let cfg = AdaptiveConfig::new(200, k, runway).unwrap();
            let rows = grid_sweep(&grid, &cfg, 2000, SEED).unwrap().rows;
            let bulk = median(rows.iter().filter(|r| log_ratio(r) < 0.3).map(|r| r.ratio).collect());
            let edge = rows
                .iter()
                .filter(|r| log_ratio(r) > 1.5)
                .map(|r| r.ratio)
                .fold(f64::NEG_INFINITY, f64::max);
            stats.push((bulk, edge));
        }
        let [(bulk0, edge0), (bulk1, edge1)] = stats[..] else { unreachable!() };
        let closer = (bulk1 - 1.0).abs() < (bulk0 - 1.0).abs();
        let smaller = edge1 < edge0;
        pass &= closer && smaller;
        detail.push(format!(
            "K={k}: bulk median {bulk0:.3} → {bulk1:.3} (closer to 1: {closer}), edge max {edge0:.3} → {edge1:.3} (smaller: {smaller})"
        ));
    }
    outcome(pass, format!("runway 0 → 100; {}", detail.join("; ")))
}

fn c10_invariants() -> Outcome {
    let start = Instant::now();
    let mut r = rng(10);
    let mut failures = Vec::new();

    // classical below quantum, both channel families
    let mut worst_gap = f64::INFINITY;
    for i in 0..500 {
        let state = QubitState::new(ball(&mut r, 0.95)).unwrap();
        let design = Design::new(state, projective(&unit(&mut r)));
        let (jc, jq) = if i % 2 == 0 {
            let theta = ParamPoint::from(ball(&mut r, 0.95));
            (
                classical_fisher(&LinearScaling, &design, &theta).unwrap(),
                sld_qfi(&LinearScaling, &state, &theta).unwrap(),
            )
        } else {
            let theta = pauli_theta(&mut r);
            (
                classical_fisher(&PauliChannel, &design, &theta).unwrap(),
                sld_qfi(&PauliChannel, &state, &theta).unwrap(),
            )
        };
        let scale = max_eigenvalue(jq.entries()).max(1.0);
        worst_gap = worst_gap.min(min_eigenvalue(&(jq.entries() - jc.entries())) / scale);
    }
    if worst_gap < -1e-9 {
        failures.push(format!("J_cl ⪯ J_QFI: min eigen {worst_gap:.2e}"));
    }

    // convexity of the classical information in the input state
    let mut worst_conv = f64::INFINITY;
    for _ in 0..200 {
        let theta = ParamPoint::from(ball(&mut r, 0.95));
        let povm = projective(&unit(&mut r));
        let a = QubitState::new(ball(&mut r, 1.0)).unwrap();
        let b = QubitState::new(ball(&mut r, 1.0)).unwrap();
        let p = r.random_range(0.0..1.0);
        let j = |s: &QubitState| {
            classical_fisher(&LinearScaling, &Design::new(*s, povm.clone()), &theta)
                .unwrap()
                .entries()
                .clone()
        };
        let rhs = j(&a) * p + j(&b) * (1.0 - p);
        let lhs = j(&mix_states(&a, &b, p).unwrap());
        worst_conv = worst_conv.min(min_eigenvalue(&(&rhs - lhs)) / max_eigenvalue(&rhs).max(1.0));
    }
    if worst_conv < -1e-9 {
        failures.push(format!("state convexity: min eigen {worst_conv:.2e}"));
    }

    // Liapunov chain
    for _ in 0..500 {
        let j = random_pd(&mut r, 3, 1e-3);
        let inv = j.clone().try_inverse().unwrap();
        let geo = (1.0 / j.determinant()).cbrt();
        let arith = inv.trace() / 3.0;
        let top = max_eigenvalue(&inv);
        if geo > arith + 1e-9 * top || arith > top + 1e-9 * top {
            failures.push(format!("Liapunov: {geo} ≤ {arith} ≤ {top} violated"));
            break;
        }
    }

    // isotonicity and convexity of criteria
    let crits = [
        OptimalityCriterion::a(),
        OptimalityCriterion::D,
        OptimalityCriterion::E,
        OptimalityCriterion::gamma(0.5).unwrap(),
        OptimalityCriterion::gamma(3.0).unwrap(),
    ];
    'iso: for _ in 0..200 {
        let small = random_pd(&mut r, 3, 0.01);
        let big = &small + random_pd(&mut r, 3, 0.0);
        let other = random_pd(&mut r, 3, 0.01);
        for crit in &crits {
            let vb = evaluate_criterion(crit, &fim(big.clone())).unwrap();
            let vs = evaluate_criterion(crit, &fim(small.clone())).unwrap();
            if vb > vs + 1e-9 * vs.abs().max(1.0) {
                failures.push(format!("isotonicity of {crit}"));
                break 'iso;
            }
            if matches!(crit, OptimalityCriterion::Gamma(_)) {
                continue;
            }
            let vo = evaluate_criterion(crit, &fim(other.clone())).unwrap();
            for k in 0..=10 {
                let p = k as f64 / 10.0;
                let mix = evaluate_criterion(crit, &fim(&small * p + &other * (1.0 - p))).unwrap();
                let chord = p * vs + (1.0 - p) * vo;
                if mix > chord + 1e-9 * chord.abs().max(1.0) {
                    failures.push(format!("convexity of {crit}"));
                    break 'iso;
                }
            }
        }
    }

    // Carathéodory bound on the fixtures used above
    let opts = OptimizeOptions::default();
    let bound = OptimalDesignResult::caratheodory_bound(2);
    let mut max_support = 0;
    for _ in 0..30 {
        let fims: Vec<FisherMatrix> = (0..8)
            .map(|_| {
                let v = DMatrix::from_fn(2, 1, |_, _| r.random_range(-1.0..1.0));
                fim(&v * v.transpose())
            })
            .collect();
        for crit in [OptimalityCriterion::a(), OptimalityCriterion::D, OptimalityCriterion::E] {
            let res = optimize_frequencies(&crit, &fims, &opts).unwrap();
            max_support = max_support.max(res.support_size);
        }
    }
    if max_support > bound {
        failures.push(format!("Carathéodory: support {max_support} > {bound}"));
    }

    // Löwner dominance implies the iid design is optimal
    let mut min_weight = f64::INFINITY;
    for _ in 0..30 {
        let mut mats: Vec<DMatrix<f64>> = (0..4).map(|_| random_pd(&mut r, 3, 0.05)).collect();
        let pick = r.random_range(0..4);
        mats[pick] = mats.iter().fold(DMatrix::zeros(3, 3), |a, m| a + m) + random_pd(&mut r, 3, 0.01);
        let fims: Vec<FisherMatrix> = mats.into_iter().map(fim).collect();
        for crit in &crits {
            let rep = iid_vs_mixed_under_lowner(&fims, crit).unwrap();
            if rep.dominant != pick || !rep.iid_optimal {
                failures.push(format!("Löwner-iid: {crit} put {:.3e} on the dominant design", rep.dominant_weight));
            }
            min_weight = min_weight.min(rep.dominant_weight);
        }
    }

    let t = start.elapsed();
    if t >= Duration::from_secs(120) {
        failures.push(format!("runtime {t:.2?} ≥ 2 min"));
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "J_QFI − J_cl min eigen {worst_gap:.1e}, state convexity {worst_conv:.1e}, max support {max_support} ≤ {bound}, min dominant weight {:.10}, {t:.2?}",
                min_weight
            )
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("QFI generic route equals closed form", c1_qfi_closed_form),
        ("scaling channel A-optimal frequencies", c2_scaling_a_optimal),
        ("Pauli channel A- and D-optimal frequencies", c3_pauli_channel),
        ("binary-design analytics vs grid oracle", c4_binary_analytics),
        ("asymmetry closed forms", c5_asymmetry_closed_forms),
        ("difference surface sign structure", c6_fig1_sign_structure),
        ("static MSE and bias", c7_static_mse),
        ("adaptive vs static sweep", c8_fig3),
        ("runway effect", c9_fig4_runway),
        ("invariant suites", c10_invariants),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{}] {name}: {} [{:.1?}]", i + 1, o.detail, start.elapsed());
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
