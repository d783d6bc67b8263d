use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::criteria::OptimalityCriterion;
use super::optimize::{optimize_frequencies, OptimalDesignResult, OptimizeOptions};
use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;
use crate::linalg;

/// Eigenvalue slack for `J_i − J_k ⪰ 0`.
pub const LOWNER_TOL: f64 = 1e-9;
/// Number of random weight matrices in the W-sweep.
pub const SWEEP_WEIGHTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LownerReport {
    /// A candidate that dominates every other one.
    pub dominant: Option<usize>,
    /// Optimal weights of the weighted A-criterion for each sampled W.
    pub sweep_weights: Vec<Vec<f64>>,
    /// One design is optimal for every sampled W.
    pub sweep_w_independent: bool,
    /// The eigenvalue test and the sweep agree.
    pub consistent: bool,
}

fn dominates(a: &FisherMatrix, b: &FisherMatrix) -> bool {
    let d = a.entries() - b.entries();
    let scale = a.entries().amax().max(b.entries().amax()).max(1.0);
    linalg::min_eigenvalue(&d) >= -LOWNER_TOL * scale
}

/// Index of the first candidate that PSD-dominates all others.
pub fn lowner_dominant(fims: &[FisherMatrix]) -> Option<usize> {
    (0..fims.len()).find(|&i| (0..fims.len()).all(|k| k == i || dominates(&fims[i], &fims[k])))
}

fn random_weight(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = &g * g.transpose() + DMatrix::identity(n, n) * 1e-3;
    let t = w.trace();
    w / t
}

/// Löwner test by eigenvalues of pairwise differences, cross-checked by
/// minimizing weighted A-criteria for random positive W.
pub fn lowner_check(fims: &[FisherMatrix], seed: u64) -> Result<LownerReport> {
    if fims.len() < 2 {
        return Err(Error::InvalidArgument("the Löwner test needs at least two matrices".into()));
    }
    let dominant = lowner_dominant(fims);
    let n = fims[0].n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = OptimizeOptions {
        seed,
        ..Default::default()
    };
    let weights: Vec<DMatrix<f64>> = (0..SWEEP_WEIGHTS).map(|_| random_weight(n, &mut rng)).collect();
    let crits: Vec<OptimalityCriterion> = weights.iter().map(|w| OptimalityCriterion::A(Some(w.clone()))).collect();
    let optima: Vec<OptimalDesignResult> = crits
        .iter()
        .map(|c| optimize_frequencies(c, fims, &opts))
        .collect::<Result<_>>()?;

    // does one of the per-W optima attain the optimum for every W?
    let value_at = |c: &OptimalityCriterion, nu: &[f64]| -> f64 {
        FisherMatrix::weighted_sum(nu, fims)
            .and_then(|j| super::criteria::evaluate_criterion(c, &j))
            .unwrap_or(f64::INFINITY)
    };
    let universal = optima.iter().any(|cand| {
        crits
            .iter()
            .zip(&optima)
            .all(|(c, o)| value_at(c, &cand.weights) <= o.value + 1e-7 * o.value.abs().max(1e-12))
    });
    Ok(LownerReport {
        dominant,
        sweep_weights: optima.into_iter().map(|o| o.weights).collect(),
        sweep_w_independent: universal,
        consistent: dominant.is_some() == universal,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IidReport {
    pub dominant: usize,
    pub weights: Vec<f64>,
    pub dominant_weight: f64,
    pub value: f64,
    pub value_at_dominant: f64,
    /// The optimizer puts all weight on the dominant design, or attains its value.
    pub iid_optimal: bool,
}

/// Check that no mixture beats i.i.d. use of the Löwner-dominant candidate.
pub fn iid_vs_mixed_under_lowner(fims: &[FisherMatrix], crit: &OptimalityCriterion) -> Result<IidReport> {
    let dominant = lowner_dominant(fims)
        .ok_or_else(|| Error::InvalidArgument("no candidate dominates in the Löwner order".into()))?;
    let r = optimize_frequencies(crit, fims, &OptimizeOptions::default())?;
    let value_at_dominant = super::criteria::evaluate_criterion(crit, &fims[dominant])?;
    let dominant_weight = r.weights[dominant];
    let tied = (r.value - value_at_dominant).abs() <= 1e-9 * value_at_dominant.abs().max(1.0);
    Ok(IidReport {
        dominant,
        dominant_weight,
        iid_optimal: dominant_weight >= 1.0 - 1e-8 || tied,
        weights: r.weights,
        value: r.value,
        value_at_dominant,
    })
}
