//! Static versus adaptive discrete designs for estimating the noise asymmetry ε1.
//!
//! Two designs are available: the axis-1 and axis-2 Pauli settings. Each use
//! of design `i` yields a `+` click with probability `p_i = (1 ± ε1 + ε2)/2`.
//! The adaptive scheme splits the budget into K steps and steers the split
//! towards `λ* = (f1 − f2)/(f1 + f2)` using plug-in estimates of `f_i`.

use rand::SeedableRng;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{f_values, AsymmetryPoint};

/// Default initial guess `f̂1 = f̂2 = √3/4`, the value at ε = (0, ½).
pub const F_INIT: f64 = 0.433_012_701_892_219_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveConfig {
    #[serde(rename = "N")]
    pub n_total: u64,
    #[serde(rename = "K")]
    pub k_steps: usize,
    pub runway: u64,
    /// Uses per adaptive step; defaults to an equal split of `N − runway`.
    pub step_sizes: Option<Vec<u64>>,
    pub f_init: (f64, f64),
    pub seed: u64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            n_total: 200,
            k_steps: 10,
            runway: 0,
            step_sizes: None,
            f_init: (F_INIT, F_INIT),
            seed: 0,
        }
    }
}

impl AdaptiveConfig {
    pub fn new(n_total: u64, k_steps: usize, runway: u64) -> Result<Self> {
        let c = Self {
            n_total,
            k_steps,
            runway,
            ..Default::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_steps == 0 || self.n_total < self.k_steps as u64 {
            return Err(Error::InvalidArgument(format!(
                "need N ≥ K ≥ 1, got N = {}, K = {}",
                self.n_total, self.k_steps
            )));
        }
        if self.runway >= self.n_total {
            return Err(Error::InvalidArgument(format!(
                "runway {} must be smaller than N = {}",
                self.runway, self.n_total
            )));
        }
        let rest = self.n_total - self.runway;
        match &self.step_sizes {
            Some(m) => {
                if m.len() != self.k_steps {
                    return Err(Error::InvalidArgument(format!(
                        "{} step sizes given for K = {}",
                        m.len(),
                        self.k_steps
                    )));
                }
                if m.iter().sum::<u64>() != rest {
                    return Err(Error::InvalidArgument(format!(
                        "step sizes sum to {}, expected N − runway = {rest}",
                        m.iter().sum::<u64>()
                    )));
                }
                if m.contains(&0) {
                    return Err(Error::InvalidArgument("every step needs at least one use".into()));
                }
            }
            None if rest < self.k_steps as u64 => {
                return Err(Error::InvalidArgument(format!(
                    "N − runway = {rest} cannot fill K = {} steps",
                    self.k_steps
                )));
            }
            None => {}
        }
        let (a, b) = self.f_init;
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
            return Err(Error::InvalidArgument("f_init must be nonnegative".into()));
        }
        Ok(())
    }

    /// `M_1, …, M_K`.
    pub fn steps(&self) -> Vec<u64> {
        if let Some(m) = &self.step_sizes {
            return m.clone();
        }
        let k = self.k_steps as u64;
        let rest = self.n_total - self.runway;
        let (base, extra) = (rest / k, rest % k);
        (0..k).map(|i| base + u64::from(i < extra)).collect()
    }
}

/// Outcome of one simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    /// `+` clicks per step for designs 1 and 2 (runway first, when present).
    pub step_counts: Vec<[u64; 2]>,
    /// Uses per step for designs 1 and 2.
    pub step_uses: Vec<[u64; 2]>,
    /// Cumulative clicks `n_{1:K,i}`.
    pub counts: [u64; 2],
    /// Cumulative uses `N_{1:K,i}`.
    pub uses: [u64; 2],
    pub estimate: f64,
    /// `2N_{1:K,1}/N − 1`.
    pub lambda_eff: f64,
    /// λ chosen at each adaptive step.
    pub lambda_trace: Vec<f64>,
}

impl TrialRecord {
    fn from_steps(step_counts: Vec<[u64; 2]>, step_uses: Vec<[u64; 2]>, lambda_trace: Vec<f64>) -> Result<Self> {
        let sum = |v: &[[u64; 2]], i: usize| v.iter().map(|x| x[i]).sum::<u64>();
        let counts = [sum(&step_counts, 0), sum(&step_counts, 1)];
        let uses = [sum(&step_uses, 0), sum(&step_uses, 1)];
        let estimate = estimator(counts[0], uses[0], counts[1], uses[1])?;
        let total = (uses[0] + uses[1]) as f64;
        Ok(Self {
            step_counts,
            step_uses,
            counts,
            uses,
            estimate,
            lambda_eff: 2.0 * uses[0] as f64 / total - 1.0,
            lambda_trace,
        })
    }
}

/// Binomial number of `+` clicks from `uses` runs of the axis-`axis` design.
pub fn sample_counts<R: Rng + ?Sized>(eps: &AsymmetryPoint, axis: usize, uses: u64, rng: &mut R) -> Result<u64> {
    if axis != 1 && axis != 2 {
        return Err(Error::InvalidArgument(format!("design axis must be 1 or 2, got {axis}")));
    }
    let p = eps.plus_probability(axis);
    if !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(Error::DegenerateModel(format!("click probability {p} outside [0, 1]")));
    }
    if uses == 0 {
        return Ok(0);
    }
    let b = Binomial::new(uses, p.clamp(0.0, 1.0))
        .map_err(|e| Error::DegenerateModel(format!("binomial({uses}, {p}): {e}")))?;
    Ok(b.sample(rng))
}

/// `ε̂1 = n1/N1 − n2/N2`.
pub fn estimator(n1: u64, uses1: u64, n2: u64, uses2: u64) -> Result<f64> {
    if uses1 == 0 || uses2 == 0 {
        return Err(Error::UndefinedEstimator(format!(
            "both designs need at least one use, got N1 = {uses1}, N2 = {uses2}"
        )));
    }
    Ok(n1 as f64 / uses1 as f64 - n2 as f64 / uses2 as f64)
}

/// Integer split `(N1, N2)` of `n` uses at imbalance λ, rounding half to even.
pub fn split_uses(n: u64, lambda: f64) -> (u64, u64) {
    let x = 0.5 * (1.0 + lambda) * n as f64;
    let n1 = (x.round_ties_even().max(0.0) as u64).min(n);
    (n1, n - n1)
}

/// `f1²/N1 + f2²/N2` with `N_{1,2} = (1±λ)N/2` rounded as in [`split_uses`].
pub fn static_mse_analytic(eps: &AsymmetryPoint, n: u64, lambda: f64) -> f64 {
    let (n1, n2) = split_uses(n, lambda);
    if n1 == 0 || n2 == 0 {
        return f64::INFINITY;
    }
    let f = f_values(eps);
    f.f1 * f.f1 / n1 as f64 + f.f2 * f.f2 / n2 as f64
}

/// `f̂ = √((n/N)(1 − n/N))`.
pub fn f_hat(n: u64, uses: u64) -> f64 {
    if uses == 0 {
        return 0.0;
    }
    let q = n as f64 / uses as f64;
    (q * (1.0 - q)).max(0.0).sqrt()
}

/// λ for the next step of `m_next` uses, given cumulative uses so far.
///
/// Allocates `N_{k+1,1} = [f̂1/(f̂1+f̂2)·(N_{1:k,1}+N_{1:k,2}+M) − N_{1:k,1}]`
/// clamped to `[0, M]`, so the cumulative split approaches λ*.
pub fn next_lambda(fh1: f64, fh2: f64, sofar1: u64, sofar2: u64, m_next: u64) -> f64 {
    let s = fh1 + fh2;
    if s <= 0.0 || m_next == 0 {
        return 0.0;
    }
    let m = m_next as f64;
    let x = (fh1 * m + fh1 * sofar2 as f64 - fh2 * sofar1 as f64) / (s * m);
    2.0 * x.clamp(0.0, 1.0) - 1.0
}

/// Equal-split static experiment with imbalance λ.
pub fn run_static<R: Rng + ?Sized>(eps: &AsymmetryPoint, n: u64, lambda: f64, rng: &mut R) -> Result<TrialRecord> {
    let (n1, n2) = split_uses(n, lambda);
    let c1 = sample_counts(eps, 1, n1, rng)?;
    let c2 = sample_counts(eps, 2, n2, rng)?;
    TrialRecord::from_steps(vec![[c1, c2]], vec![[n1, n2]], vec![lambda])
}

/// Runway followed by K adaptive steps.
pub fn run_adaptive<R: Rng + ?Sized>(eps: &AsymmetryPoint, config: &AdaptiveConfig, rng: &mut R) -> Result<TrialRecord> {
    config.validate()?;
    let mut step_counts = Vec::with_capacity(config.k_steps + 1);
    let mut step_uses = Vec::with_capacity(config.k_steps + 1);
    let mut lambda_trace = Vec::with_capacity(config.k_steps);
    let (mut n, mut uses) = ([0u64; 2], [0u64; 2]);
    if config.runway > 0 {
        let (r1, r2) = split_uses(config.runway, 0.0);
        let c = [sample_counts(eps, 1, r1, rng)?, sample_counts(eps, 2, r2, rng)?];
        n = c;
        uses = [r1, r2];
        step_counts.push(c);
        step_uses.push([r1, r2]);
    }
    for m in config.steps() {
        // an arm without data keeps its initial guess
        let fh1 = if uses[0] > 0 { f_hat(n[0], uses[0]) } else { config.f_init.0 };
        let fh2 = if uses[1] > 0 { f_hat(n[1], uses[1]) } else { config.f_init.1 };
        let lambda = next_lambda(fh1, fh2, uses[0], uses[1], m);
        let (m1, m2) = split_uses(m, lambda);
        let c = [sample_counts(eps, 1, m1, rng)?, sample_counts(eps, 2, m2, rng)?];
        n = [n[0] + c[0], n[1] + c[1]];
        uses = [uses[0] + m1, uses[1] + m2];
        step_counts.push(c);
        step_uses.push([m1, m2]);
        lambda_trace.push(lambda);
    }
    TrialRecord::from_steps(step_counts, step_uses, lambda_trace)
}

/// `V_static/V(λ) = (1−λ²)/(1 − λ(f1²−f2²)/(f1²+f2²))`.
pub fn analytic_ratio(eps: &AsymmetryPoint, lambda: f64) -> f64 {
    let f = f_values(eps);
    let (a, b) = (f.f1 * f.f1, f.f2 * f.f2);
    if a + b == 0.0 {
        return if lambda == 0.0 { 1.0 } else { f64::NAN };
    }
    (1.0 - lambda * lambda) / (1.0 - lambda * (a - b) / (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseRatio {
    pub mse_static: f64,
    pub mse_adapt: f64,
    pub se_static: f64,
    pub se_adapt: f64,
    /// `mse_static / mse_adapt`.
    pub ratio: f64,
    /// Delta-method standard error of `ratio`.
    pub se_ratio: f64,
    pub mean_lambda_eff: f64,
    pub analytic_ratio_at_mean_lambda: f64,
}

/// Mix a seed with coordinates into a new 64-bit seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h = h.wrapping_add(p.wrapping_mul(0xbf58_476d_1ce4_e5b9)).wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

/// Independent generator for replica `replica` of scheme `scheme` (0 static, 1 adaptive).
fn replica_rng(seed: u64, replica: u64, scheme: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * replica + scheme);
    rng
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo MSE of the static (λ = 0) and adaptive schemes at ε.
pub fn mse_ratio(eps: &AsymmetryPoint, config: &AdaptiveConfig, replicas: usize, seed: u64) -> Result<MseRatio> {
    mse_ratio_with(eps, config, replicas, seed, true)
}

fn mse_ratio_with(
    eps: &AsymmetryPoint,
    config: &AdaptiveConfig,
    replicas: usize,
    seed: u64,
    parallel: bool,
) -> Result<MseRatio> {
    config.validate()?;
    if replicas < 2 {
        return Err(Error::InvalidArgument("at least two replicas are needed".into()));
    }
    let truth = eps.eps1();
    let one = |r: usize| -> Result<(f64, f64, f64)> {
        let s = run_static(eps, config.n_total, 0.0, &mut replica_rng(seed, r as u64, 0))?;
        let a = run_adaptive(eps, config, &mut replica_rng(seed, r as u64, 1))?;
        Ok(((s.estimate - truth).powi(2), (a.estimate - truth).powi(2), a.lambda_eff))
    };
    let draws: Vec<(f64, f64, f64)> = if parallel {
        (0..replicas).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..replicas).map(one).collect::<Result<_>>()?
    };
    let st: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let ad: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let (mse_static, se_static) = mean_and_se(&st);
    let (mse_adapt, se_adapt) = mean_and_se(&ad);
    let mean_lambda_eff = draws.iter().map(|d| d.2).sum::<f64>() / replicas as f64;
    let ratio = mse_static / mse_adapt;
    let se_ratio = ratio.abs() * ((se_static / mse_static).powi(2) + (se_adapt / mse_adapt).powi(2)).sqrt();
    Ok(MseRatio {
        mse_static,
        mse_adapt,
        se_static,
        se_adapt,
        ratio,
        se_ratio,
        mean_lambda_eff,
        analytic_ratio_at_mean_lambda: analytic_ratio(eps, mean_lambda_eff),
    })
}

/// Uniform grid over `θ1, θ2 ≥ 0`, `θ1 + θ2 ≤ 1` (θ3 = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub step: f64,
    /// Keep only points with noise strength `1 − ε2 ≤ 0.5`.
    pub low_noise_only: bool,
}

impl GridSpec {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            low_noise_only: false,
        }
    }

    /// Grid indices `(i, j)` with `θ = (i, j)·step`.
    pub fn points(&self) -> Result<Vec<(u64, u64)>> {
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::InvalidArgument(format!("grid step {} not in (0, 1]", self.step)));
        }
        let n = (1.0 / self.step).round() as u64;
        if ((n as f64) * self.step - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("grid step {} does not divide 1", self.step)));
        }
        let mut pts = Vec::new();
        for i in 0..=n {
            for j in 0..=(n - i) {
                if self.low_noise_only && 2 * (i + j) > n {
                    continue;
                }
                pts.push((i, j));
            }
        }
        Ok(pts)
    }

    fn theta(&self, i: u64, j: u64) -> (f64, f64) {
        let n = (1.0 / self.step).round();
        (i as f64 / n, j as f64 / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta1: f64,
    pub theta2: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub log10_ratio_theta: f64,
    pub noise_bin: f64,
    pub mse_static: f64,
    pub mse_adapt: f64,
    pub ratio: f64,
    pub se_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Grid points without a usable estimate (both MSEs vanish).
    pub skipped: Vec<(f64, f64)>,
}

/// MSE ratio at every grid point; point `(i, j)` is simulated with seed `derive_seed(seed, [i, j])`.
pub fn grid_sweep(grid: &GridSpec, config: &AdaptiveConfig, replicas: usize, seed: u64) -> Result<SweepResult> {
    config.validate()?;
    let pts = grid.points()?;
    let results: Vec<Result<Option<SweepRow>>> = pts
        .par_iter()
        .map(|&(i, j)| {
            let (t1, t2) = grid.theta(i, j);
            let eps = AsymmetryPoint::from_theta(t1, t2)?;
            let f = f_values(&eps);
            if f.f1 == 0.0 && f.f2 == 0.0 {
                return Ok(None);
            }
            let r = mse_ratio_with(&eps, config, replicas, derive_seed(seed, &[i, j]), false)?;
            Ok(Some(SweepRow {
                theta1: t1,
                theta2: t2,
                eps1: eps.eps1(),
                eps2: eps.eps2(),
                log10_ratio_theta: (t1 / t2).log10(),
                noise_bin: 1.0 - eps.eps2(),
                mse_static: r.mse_static,
                mse_adapt: r.mse_adapt,
                ratio: r.ratio,
                se_ratio: r.se_ratio,
            }))
        })
        .collect();
    let mut rows = Vec::with_capacity(pts.len());
    let mut skipped = Vec::new();
    for (res, &(i, j)) in results.into_iter().zip(&pts) {
        match res? {
            Some(row) => rows.push(row),
            None => {
                let t = grid.theta(i, j);
                log::info!("skipping θ = ({}, {}): deterministic outcomes", t.0, t.1);
                skipped.push(t);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::DegenerateModel("every grid point was skipped".into()));
    }
    Ok(SweepResult { rows, skipped })
}

/// Fresh generator for callers that just need a seeded stream.
pub fn seeded_rng(seed: u64) -> impl RngCore {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(a: f64, b: f64) -> AsymmetryPoint {
        AsymmetryPoint::new(a, b).unwrap()
    }

    #[test]
    fn deterministic_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_counts(&eps(0.0, 1.0), 1, 57, &mut rng).unwrap(), 57);
        let r = run_static(&eps(0.0, 1.0), 200, 0.0, &mut rng).unwrap();
        assert_eq!(r.uses, [100, 100]);
        assert_eq!(r.estimate, 0.0);
    }

    #[test]
    fn estimator_examples() {
        assert_eq!(estimator(75, 100, 25, 100).unwrap(), 0.5);
        assert_eq!(estimator(3, 10, 6, 20).unwrap(), 0.0);
        assert!(matches!(estimator(1, 0, 1, 2), Err(Error::UndefinedEstimator(_))));
    }

    #[test]
    fn f_hat_examples() {
        assert_eq!(f_hat(0, 10), 0.0);
        assert_eq!(f_hat(5, 10), 0.5);
        assert!((f_hat(3, 4) - 3f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn analytic_static_mse() {
        assert!((static_mse_analytic(&eps(0.0, 0.5), 200, 0.0) - 0.00375).abs() < 1e-15);
        assert!(static_mse_analytic(&eps(0.0, 0.5), 200, 1.0).is_infinite());
    }

    #[test]
    fn next_lambda_cases() {
        assert_eq!(next_lambda(0.3, 0.3, 50, 50, 20), 0.0);
        assert_eq!(next_lambda(0.3, 0.0, 0, 0, 20), 1.0);
        assert_eq!(next_lambda(0.0, 0.0, 10, 30, 20), 0.0);
        assert_eq!(next_lambda(F_INIT, F_INIT, 0, 0, 20), 0.0);
        // history already heavy on design 1: everything goes to design 2
        assert_eq!(next_lambda(0.2, 0.2, 80, 0, 20), -1.0);
    }

    #[test]
    fn next_lambda_matches_integer_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let f1: f64 = rng.random_range(0.01..0.5);
            let f2: f64 = rng.random_range(0.01..0.5);
            let s1 = rng.random_range(1..60u64);
            let s2 = rng.random_range(1..60u64);
            let m = rng.random_range(1..40u64);
            let (m1, _) = split_uses(m, next_lambda(f1, f2, s1, s2, m));
            let cost = |k: u64| f1 * f1 / (s1 + k) as f64 + f2 * f2 / (s2 + m - k) as f64;
            let best = (0..=m).min_by(|&a, &b| cost(a).total_cmp(&cost(b))).unwrap();
            assert!(m1.abs_diff(best) <= 1, "f=({f1},{f2}) so far=({s1},{s2}) m={m}: {m1} vs {best}");
        }
    }

    #[test]
    fn adaptive_conserves_uses() {
        let cfg = AdaptiveConfig::new(203, 7, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (a, b) in [(0.9, 0.05), (0.0, 0.5), (-0.5, 0.2)] {
            let r = run_adaptive(&eps(a, b), &cfg, &mut rng).unwrap();
            assert_eq!(r.uses[0] + r.uses[1], 203);
            assert_eq!(r.step_uses.len(), 8);
            assert!((-1.0..=1.0).contains(&r.lambda_eff));
        }
    }

    #[test]
    fn config_validation() {
        assert!(AdaptiveConfig::new(5, 10, 0).is_err());
        assert!(AdaptiveConfig::new(200, 10, 200).is_err());
        let mut c = AdaptiveConfig {
            step_sizes: Some(vec![100, 100]),
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.k_steps = 2;
        assert!(c.validate().is_ok());
        assert_eq!(AdaptiveConfig::new(200, 10, 100).unwrap().steps(), vec![10; 10]);
    }

    #[test]
    fn analytic_ratio_limits() {
        let e = eps(0.5, 0.25);
        assert_eq!(analytic_ratio(&e, 0.0), 1.0);
        let l = crate::models::asymm_lambda_star(&e).unwrap();
        assert!(analytic_ratio(&e, l) >= 1.0);
    }

    #[test]
    fn sweep_is_reproducible() {
        let grid = GridSpec::new(0.25);
        let cfg = AdaptiveConfig::default();
        let a = grid_sweep(&grid, &cfg, 200, 11).unwrap();
        let b = grid_sweep(&grid, &cfg, 200, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.skipped.len(), 3);
    }
}
