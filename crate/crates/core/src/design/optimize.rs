use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use super::criteria::{evaluate_spectrum, gradient_spectrum, OptimalityCriterion, Spectrum};
use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;
use crate::linalg;
use crate::quantum::ParamPoint;

/// Weights at or below this are dropped from the reported design.
pub const SUPPORT_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub starts: usize,
    pub max_iter: usize,
    /// Stop when the relative improvement of one step falls below this.
    pub tol: f64,
    pub seed: u64,
    /// Run the multi-starts on the rayon pool.
    pub parallel: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            starts: 20,
            max_iter: 5000,
            tol: 1e-12,
            seed: 0x5eed,
            parallel: true,
        }
    }
}

/// How an optimal design was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignBranch {
    Numerical,
    Closed,
    /// One candidate dominates in the Löwner order.
    Lowner,
    Vertex,
    Interior,
    SpecialVertex,
    SpecialInterior,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalDesignResult {
    pub criterion: OptimalityCriterion,
    pub theta: Option<ParamPoint>,
    pub weights: Vec<f64>,
    pub value: f64,
    pub support_size: usize,
    pub branch: DesignBranch,
}

impl OptimalDesignResult {
    pub fn with_theta(mut self, theta: ParamPoint) -> Self {
        self.theta = Some(theta);
        self
    }

    /// Largest support a Carathéodory-reduced design can need.
    pub fn caratheodory_bound(n: usize) -> usize {
        n * (n + 1) / 2 + 1
    }
}

/// Objective `ν ↦ Ψ(Σ ν_i J_i)` with its gradient.
struct Objective<'a> {
    crit: &'a OptimalityCriterion,
    mats: Vec<DMatrix<f64>>,
}

impl Objective<'_> {
    fn combine(&self, nu: &[f64]) -> DMatrix<f64> {
        let n = self.mats[0].nrows();
        let mut j = DMatrix::zeros(n, n);
        for (w, m) in nu.iter().zip(&self.mats) {
            if *w != 0.0 {
                j += m * *w;
            }
        }
        j
    }

    fn value(&self, nu: &[f64]) -> f64 {
        let spec = Spectrum::new(&self.combine(nu));
        evaluate_spectrum(self.crit, &spec).map(|v| v.value).unwrap_or(f64::INFINITY)
    }

    fn value_and_grad(&self, nu: &[f64]) -> (f64, Option<Vec<f64>>) {
        let spec = Spectrum::new(&self.combine(nu));
        let v = evaluate_spectrum(self.crit, &spec).map(|v| v.value).unwrap_or(f64::INFINITY);
        if !v.is_finite() {
            return (v, None);
        }
        let g = gradient_spectrum(self.crit, &spec)
            .map(|g| self.mats.iter().map(|m| (g.transpose() * m).trace()).collect());
        (v, g)
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Projected gradient with Barzilai-Borwein steps and Armijo backtracking.
fn descend(obj: &Objective, start: Vec<f64>, opts: &OptimizeOptions) -> (Vec<f64>, f64) {
    let mut x = start;
    let (mut f, g) = obj.value_and_grad(&x);
    let Some(mut g) = g else {
        return (x, f);
    };
    let mut step = 1.0 / g.iter().fold(1e-12_f64, |m, v| m.max(v.abs()));
    for _ in 0..opts.max_iter {
        let mut t = step;
        let mut accepted = None;
        while t > 1e-30 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            let xn = project_simplex(&trial);
            let d = sub(&xn, &x);
            let decrease = dot(&g, &d);
            if decrease >= 0.0 {
                break;
            }
            let fnew = obj.value(&xn);
            if fnew <= f + 1e-4 * decrease {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let (_, gn) = obj.value_and_grad(&xn);
        let Some(gn) = gn else { break };
        let s = sub(&xn, &x);
        let y = sub(&gn, &g);
        let sy = dot(&s, &y);
        step = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-12, 1e12) } else { t * 2.0 };
        let improvement = f - fnew;
        x = xn;
        g = gn;
        f = fnew;
        if improvement <= opts.tol * f.abs().max(1.0) {
            break;
        }
    }
    (x, f)
}

/// Newton iterations on the face of the simplex spanned by the current support.
fn polish(obj: &Objective, x: Vec<f64>, f: f64) -> (Vec<f64>, f64) {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 1e-9).collect();
    let k = support.len();
    if k < 2 {
        return (x, f);
    }
    let mut best = (x, f);
    for _ in 0..50 {
        let (x, f) = (&best.0, best.1);
        let Some(g) = obj.value_and_grad(x).1 else { break };
        let gs: Vec<f64> = support.iter().map(|&i| g[i]).collect();
        // Hessian restricted to the support, by central differences of the gradient
        let mut h = DMatrix::zeros(k, k);
        let mut ok = true;
        for (c, &i) in support.iter().enumerate() {
            let hstep = 1e-6 * x[i].max(1e-3);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += hstep;
            xm[i] -= hstep;
            let (Some(gp), Some(gm)) = (obj.value_and_grad(&xp).1, obj.value_and_grad(&xm).1) else {
                ok = false;
                break;
            };
            for (r, &jdx) in support.iter().enumerate() {
                h[(r, c)] = (gp[jdx] - gm[jdx]) / (2.0 * hstep);
            }
        }
        if !ok {
            break;
        }
        let h = linalg::symmetrize(&h);
        // reduced coordinates: ν_S = ν + Z y with Z = [I; −1ᵀ]
        let z = DMatrix::from_fn(k, k - 1, |r, c| {
            if r == c {
                1.0
            } else if r == k - 1 {
                -1.0
            } else {
                0.0
            }
        });
        let rg = z.transpose() * DVector::from_column_slice(&gs);
        if rg.amax() < 1e-15 * f.abs().max(1.0) {
            break;
        }
        let mut rh = z.transpose() * &h * &z;
        let lmin = linalg::min_eigenvalue(&rh);
        let scale = rh.amax().max(1e-300);
        if lmin <= 1e-12 * scale {
            for d in 0..k - 1 {
                rh[(d, d)] += 1e-12 * scale - lmin;
            }
        }
        let Some(dy) = rh.cholesky().map(|c| c.solve(&(-&rg))) else { break };
        let dx = &z * dy;
        // near the optimum f is flat to rounding, so also accept steps that
        // keep f within noise and shrink the reduced gradient
        let noise = 1e-14 * f.abs().max(1.0);
        let reduced_norm = |y: &[f64]| {
            obj.value_and_grad(y).1.map(|g| {
                let gs: Vec<f64> = support.iter().map(|&i| g[i]).collect();
                (z.transpose() * DVector::from_column_slice(&gs)).norm()
            })
        };
        let rg_norm = rg.norm();
        let mut t = 1.0;
        let mut improved = None;
        while t > 1e-6 {
            let mut trial = x.clone();
            for (r, &i) in support.iter().enumerate() {
                trial[i] += t * dx[r];
            }
            if support.iter().all(|&i| trial[i] >= 0.0) {
                let fnew = obj.value(&trial);
                let accept = fnew < f - noise
                    || (fnew <= f + noise && reduced_norm(&trial).is_some_and(|n| n < rg_norm));
                if accept {
                    improved = Some((trial, fnew));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(next) = improved else { break };
        let done = t * dx.amax() <= 1e-15;
        best = next;
        if done {
            break;
        }
    }
    best
}

fn prune(x: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = x.iter().map(|&w| if w > SUPPORT_CUTOFF { w } else { 0.0 }).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|w| *w /= s);
    v
}

fn vech(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Move weight along null directions of `ν ↦ (Σ ν_i J_i, Σ ν_i)` until the
/// support fits the Carathéodory bound. J, and so the criterion, are unchanged.
fn caratheodory_reduce(mats: &[DMatrix<f64>], mut x: Vec<f64>) -> Vec<f64> {
    let n = mats[0].nrows();
    let bound = OptimalDesignResult::caratheodory_bound(n);
    loop {
        let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
        if support.len() <= bound {
            return x;
        }
        let rows = n * (n + 1) / 2 + 1;
        let mut a = DMatrix::zeros(rows, support.len());
        for (c, &i) in support.iter().enumerate() {
            let v = vech(&mats[i]);
            for (r, val) in v.iter().enumerate() {
                a[(r, c)] = *val;
            }
            a[(rows - 1, c)] = 1.0;
        }
        let (_, vecs) = linalg::sym_eigen(&(a.transpose() * &a));
        let d = vecs.column(0);
        // step until the first weight with d > 0 reaches zero
        let mut tmax = f64::INFINITY;
        let mut hit = 0;
        for (c, &i) in support.iter().enumerate() {
            if d[c] > 1e-15 && x[i] / d[c] < tmax {
                tmax = x[i] / d[c];
                hit = i;
            }
        }
        if !tmax.is_finite() {
            return x;
        }
        for (c, &i) in support.iter().enumerate() {
            x[i] = (x[i] - tmax * d[c]).max(0.0);
        }
        x[hit] = 0.0;
        let s: f64 = x.iter().sum();
        x.iter_mut().for_each(|w| *w /= s);
    }
}

fn start_points(m: usize, opts: &OptimizeOptions) -> Vec<Vec<f64>> {
    let total = opts.starts.max(1);
    let mut pts = vec![vec![1.0 / m as f64; m]];
    for i in 0..m {
        if pts.len() >= total {
            break;
        }
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        pts.push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while pts.len() < total {
        let g: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let s: f64 = g.iter().sum();
        pts.push(g.into_iter().map(|x| x / s).collect());
    }
    pts
}

/// True when `a` should be preferred to `b` among designs of equal value.
fn tie_break(a: &[f64], b: &[f64]) -> bool {
    let sa = a.iter().filter(|&&w| w > 0.0).count();
    let sb = b.iter().filter(|&&w| w > 0.0).count();
    if sa != sb {
        return sa < sb;
    }
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-9 {
            return x < y;
        }
    }
    false
}

fn check_candidates(fims: &[FisherMatrix]) -> Result<()> {
    let Some(first) = fims.first() else {
        return Err(Error::InvalidArgument("at least one candidate design is required".into()));
    };
    if fims.iter().any(|j| j.n() != first.n()) {
        return Err(Error::InvalidArgument("candidate Fisher matrices differ in size".into()));
    }
    if fims.iter().all(|j| j.entries().amax() == 0.0) {
        return Err(Error::DegenerateModel("every candidate Fisher matrix is zero".into()));
    }
    Ok(())
}

/// Minimize `Ψ(Σ ν_i J_i)` over the probability simplex.
pub fn optimize_frequencies(
    crit: &OptimalityCriterion,
    fims: &[FisherMatrix],
    opts: &OptimizeOptions,
) -> Result<OptimalDesignResult> {
    crit.validate()?;
    if matches!(crit, OptimalityCriterion::Lowner) {
        return Err(Error::InvalidArgument(
            "the Löwner order is not a scalar criterion; use lowner_check".into(),
        ));
    }
    check_candidates(fims)?;
    let obj = Objective {
        crit,
        mats: fims.iter().map(|j| j.entries().clone()).collect(),
    };
    // surface size mismatches between the criterion and J
    let _ = evaluate_spectrum(crit, &Spectrum::new(&obj.mats[0]))?;
    let m = fims.len();
    if m == 1 {
        let value = obj.value(&[1.0]);
        return finish(crit, vec![1.0], value);
    }

    let run = |x0: &Vec<f64>| {
        let (x, f) = descend(&obj, x0.clone(), opts);
        if !f.is_finite() {
            return (x, f);
        }
        let (x, _) = polish(&obj, x, f);
        let x = caratheodory_reduce(&obj.mats, prune(&x));
        let f = obj.value(&x);
        (x, f)
    };
    let starts = start_points(m, opts);
    let runs: Vec<(Vec<f64>, f64)> = if opts.parallel {
        starts.par_iter().map(run).collect()
    } else {
        starts.iter().map(run).collect()
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for (x, f) in runs {
        if !f.is_finite() {
            continue;
        }
        best = match best {
            None => Some((x, f)),
            Some((bx, bf)) => {
                let tol = 1e-10 * bf.abs().max(1.0);
                if f < bf - tol || ((f - bf).abs() <= tol && tie_break(&x, &bx)) {
                    Some((x, f))
                } else {
                    Some((bx, bf))
                }
            }
        };
    }
    let Some((x, f)) = best else {
        return Err(Error::DegenerateModel(format!(
            "criterion {crit} is infinite for every mixture of the candidates"
        )));
    };
    finish(crit, x, f)
}

fn finish(crit: &OptimalityCriterion, weights: Vec<f64>, value: f64) -> Result<OptimalDesignResult> {
    let support_size = weights.iter().filter(|&&w| w > SUPPORT_CUTOFF).count();
    log::debug!("{crit}: weights {weights:?}, value {value}");
    Ok(OptimalDesignResult {
        criterion: crit.clone(),
        theta: None,
        weights,
        value,
        support_size,
        branch: DesignBranch::Numerical,
    })
}

/// Closed-form γ-optimal weights for `J = diag(ν_i / a_i)`.
///
/// Returns `ν_i ∝ a_i^{γ/(1+γ)}` and the criterion value
/// `n^{−1/γ} (Σ a_i^{γ/(1+γ)})^{(1+γ)/γ}`.
pub fn gamma_optimal_diagonal(a: &[f64], gamma: f64) -> Result<(Vec<f64>, f64)> {
    if a.is_empty() || a.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::domain("gamma-diagonal", "every a_i must be positive"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("γ must be finite and positive, got {gamma}")));
    }
    let q = gamma / (1.0 + gamma);
    let p: Vec<f64> = a.iter().map(|x| x.powf(q)).collect();
    let s: f64 = p.iter().sum();
    let n = a.len() as f64;
    let value = n.powf(-1.0 / gamma) * s.powf(1.0 / q);
    Ok((p.into_iter().map(|x| x / s).collect(), value))
}
