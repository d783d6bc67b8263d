use nalgebra::DMatrix;
use serde::Serialize;

use super::criteria::{evaluate_detailed, OptimalityCriterion};
use super::optimize::DesignBranch;
use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;

/// Relative tolerance on the equal-weight condition selecting the special branches.
pub const SPECIAL_BRANCH_TOL: f64 = 1e-9;

/// Traces and determinants of a pair of 2×2 Fisher matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryDesignSummary {
    pub j1: FisherMatrix,
    pub j2: FisherMatrix,
    pub t1: f64,
    pub t2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    /// The pair is ordered in the Löwner sense (`D_- ≥ 0`).
    pub lowner_exists: bool,
}

fn det2(m: &DMatrix<f64>) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

fn adj2(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]])
}

impl BinaryDesignSummary {
    pub fn new(j1: FisherMatrix, j2: FisherMatrix) -> Result<Self> {
        if j1.n() != 2 || j2.n() != 2 {
            return Err(Error::InvalidArgument("binary designs need 2×2 Fisher matrices".into()));
        }
        let (a, b) = (j1.entries(), j2.entries());
        let d_minus = det2(&(a - b));
        let scale = (a.amax() + b.amax()).powi(2).max(f64::MIN_POSITIVE);
        Ok(Self {
            t1: a.trace(),
            t2: b.trace(),
            d1: det2(a),
            d2: det2(b),
            d_plus: det2(&(a + b)),
            d_minus,
            lowner_exists: d_minus >= -1e-12 * scale,
            j1,
            j2,
        })
    }

    /// `γ(λ) = 4 det(ν1 J1 + ν2 J2) = D_-λ² + 2(D_1−D_2)λ + D_+`.
    pub fn gamma_d(&self, lambda: f64) -> f64 {
        self.d_minus * lambda * lambda + 2.0 * (self.d1 - self.d2) * lambda + self.d_plus
    }

    /// `J(λ) = ½(1+λ)J1 + ½(1−λ)J2`.
    pub fn mixture(&self, lambda: f64) -> DMatrix<f64> {
        self.j1.entries() * (0.5 * (1.0 + lambda)) + self.j2.entries() * (0.5 * (1.0 - lambda))
    }

    /// `tr(W J(λ)⁻¹)`, or `+∞` where W reaches the kernel of J(λ).
    pub fn gamma_w(&self, w: &DMatrix<f64>, lambda: f64) -> f64 {
        evaluate_detailed(&OptimalityCriterion::A(Some(w.clone())), &self.mixture(lambda))
            .map(|v| v.value)
            .unwrap_or(f64::INFINITY)
    }

    /// Index (0 or 1) of the Löwner-larger matrix when the pair is ordered and distinct.
    fn lowner_winner(&self) -> Option<usize> {
        if !self.lowner_exists {
            return None;
        }
        let diff = self.j1.entries() - self.j2.entries();
        if diff.amax() <= 1e-12 * self.j1.entries().amax().max(self.j2.entries().amax()) {
            return None;
        }
        Some(if diff.trace() >= 0.0 { 0 } else { 1 })
    }
}

/// λ and value of a binary design; `ν = (½(1+λ), ½(1−λ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryOptimum {
    pub lambda: f64,
    pub value: f64,
    pub branch: DesignBranch,
}

impl BinaryOptimum {
    pub fn weights(&self) -> [f64; 2] {
        [0.5 * (1.0 + self.lambda), 0.5 * (1.0 - self.lambda)]
    }
}

/// D-optimal binary design. `value` is `det J(λ*) = γ(λ*)/4`.
pub fn binary_d_optimal(s: &BinaryDesignSummary) -> BinaryOptimum {
    let vertex = |lambda: f64, branch| BinaryOptimum {
        lambda,
        value: s.gamma_d(lambda) / 4.0,
        branch,
    };
    if s.lowner_exists {
        return match s.lowner_winner() {
            Some(0) => vertex(1.0, DesignBranch::Lowner),
            Some(_) => vertex(-1.0, DesignBranch::Lowner),
            None => vertex(0.0, DesignBranch::Lowner),
        };
    }
    let dd = s.d1 - s.d2;
    if dd.abs() < -s.d_minus {
        vertex(-dd / s.d_minus, DesignBranch::Interior)
    } else if s.gamma_d(1.0) >= s.gamma_d(-1.0) {
        vertex(1.0, DesignBranch::Vertex)
    } else {
        vertex(-1.0, DesignBranch::Vertex)
    }
}

/// A-optimal binary design minimizing `tr(W J(λ)⁻¹)` over `λ ∈ [−1, 1]`.
///
/// Works with `tr(W J⁻¹) = tr(W adj J)/det J`, so singular `J1`, `J2` and a
/// rank-deficient W are handled without regularization.
pub fn binary_a_optimal(s: &BinaryDesignSummary, w: &DMatrix<f64>) -> Result<BinaryOptimum> {
    OptimalityCriterion::weighted_a(w.clone())?;
    if w.nrows() != 2 {
        return Err(Error::InvalidArgument("binary designs need a 2×2 weight".into()));
    }
    let (a1, a2) = (
        (w * adj2(s.j1.entries())).trace(),
        (w * adj2(s.j2.entries())).trace(),
    );
    let at = |lambda: f64, branch| BinaryOptimum {
        lambda,
        value: s.gamma_w(w, lambda),
        branch,
    };

    if s.lowner_exists {
        return Ok(match s.lowner_winner() {
            Some(0) => at(1.0, DesignBranch::Lowner),
            Some(_) => at(-1.0, DesignBranch::Lowner),
            None => at(0.0, DesignBranch::Lowner),
        });
    }

    let dd = s.d1 - s.d2;
    if (a1 - a2).abs() <= SPECIAL_BRANCH_TOL * a1.abs().max(a2.abs()) {
        // equal numerators: the A-optimum is the D-optimum
        let a = 0.5 * (a1 + a2);
        return Ok(if dd.abs() - s.d_minus.abs() > 0.0 {
            let lambda = if s.d1 >= s.d2 { 1.0 } else { -1.0 };
            BinaryOptimum {
                lambda,
                value: a / s.d1.max(s.d2),
                branch: DesignBranch::SpecialVertex,
            }
        } else {
            BinaryOptimum {
                lambda: -dd / s.d_minus,
                value: 4.0 * a * s.d_minus / (s.d_plus * s.d_minus - dd * dd),
                branch: DesignBranch::SpecialInterior,
            }
        });
    }

    // γ(λ) = D_-(λ−λ+)(λ−λ−) with real roots since D_- < 0 and γ(0) = D_+ ≥ 0
    let disc = dd * dd - s.d_minus * s.d_plus;
    if disc >= 0.0 {
        let r = disc.sqrt();
        let (x1, x2) = ((-dd + r) / s.d_minus, (-dd - r) / s.d_minus);
        let (lp, lm) = (x1.max(x2), x1.min(x2));
        let numer = |l: f64| 2.0 * ((1.0 + l) * a1 + (1.0 - l) * a2);
        let (np, nm) = (numer(lp), numer(lm));
        if np > 0.0 && nm > 0.0 {
            let lambda = (nm.sqrt() * lp + np.sqrt() * lm) / (np.sqrt() + nm.sqrt());
            if lambda.abs() <= 1.0 {
                return Ok(at(lambda, DesignBranch::Interior));
            }
        }
    }
    let (v1, v2) = (s.gamma_w(w, 1.0), s.gamma_w(w, -1.0));
    Ok(if v1 <= v2 {
        BinaryOptimum {
            lambda: 1.0,
            value: v1,
            branch: DesignBranch::Vertex,
        }
    } else {
        BinaryOptimum {
            lambda: -1.0,
            value: v2,
            branch: DesignBranch::Vertex,
        }
    })
}

/// Dense grid search over `λ ∈ [−1, 1]` with `points` nodes: minimizes
/// `tr(W J(λ)⁻¹)` when `w` is given, otherwise maximizes `det J(λ)`.
pub fn binary_grid_search(s: &BinaryDesignSummary, w: Option<&DMatrix<f64>>, points: usize) -> BinaryOptimum {
    let points = points.max(2);
    let (a, b) = (s.j1.entries(), s.j2.entries());
    let scale = (a.amax() + b.amax()).powi(2);
    // direct 2×2 inverse away from singular mixtures
    let weighted_trace = |w: &DMatrix<f64>, lambda: f64| {
        let (p, q) = (0.5 * (1.0 + lambda), 0.5 * (1.0 - lambda));
        let m = |i, j| p * a[(i, j)] + q * b[(i, j)];
        let (m00, m01, m10, m11) = (m(0, 0), m(0, 1), m(1, 0), m(1, 1));
        let det = m00 * m11 - m01 * m10;
        if det <= 1e-10 * scale {
            return s.gamma_w(w, lambda);
        }
        (w[(0, 0)] * m11 - w[(0, 1)] * m10 - w[(1, 0)] * m01 + w[(1, 1)] * m00) / det
    };
    let mut best = (0.0, f64::NAN);
    for k in 0..points {
        let lambda = -1.0 + 2.0 * k as f64 / (points - 1) as f64;
        let v = match w {
            Some(w) => weighted_trace(w, lambda),
            None => s.gamma_d(lambda) / 4.0,
        };
        let better = match w {
            Some(_) => v < best.1,
            None => v > best.1,
        };
        if best.1.is_nan() || better {
            best = (lambda, v);
        }
    }
    BinaryOptimum {
        lambda: best.0,
        value: best.1,
        branch: DesignBranch::Numerical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(v: [f64; 4]) -> FisherMatrix {
        FisherMatrix::classical(DMatrix::from_row_slice(2, 2, &v)).unwrap()
    }

    #[test]
    fn summary_invariants() {
        let s = BinaryDesignSummary::new(fm([2.0, 0.5, 0.5, 1.0]), fm([1.0, -0.3, -0.3, 3.0])).unwrap();
        assert!((s.d1 - 1.75).abs() < 1e-12);
        assert!((s.d2 - 2.91).abs() < 1e-12);
        assert!((s.gamma_d(0.3) - 4.0 * det2(&s.mixture(0.3))).abs() < 1e-12);
        assert!(!s.lowner_exists);
    }

    #[test]
    fn d_optimal_singular_pair_is_balanced() {
        let s = BinaryDesignSummary::new(fm([1.0, 0.0, 0.0, 0.0]), fm([0.0, 0.0, 0.0, 1.0])).unwrap();
        let r = binary_d_optimal(&s);
        assert_eq!(r.lambda, 0.0);
        assert_eq!(r.weights(), [0.5, 0.5]);
        assert!((r.value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn equal_pair_ties_to_zero() {
        let j = fm([1.0, 0.2, 0.2, 2.0]);
        let s = BinaryDesignSummary::new(j.clone(), j).unwrap();
        assert_eq!(binary_d_optimal(&s).lambda, 0.0);
        let w = DMatrix::identity(2, 2);
        assert_eq!(binary_a_optimal(&s, &w).unwrap().lambda, 0.0);
    }

    #[test]
    fn ordered_pair_takes_the_larger_vertex() {
        let s = BinaryDesignSummary::new(fm([1.0, 0.0, 0.0, 1.0]), fm([2.0, 0.0, 0.0, 2.0])).unwrap();
        assert!(s.lowner_exists);
        assert_eq!(binary_d_optimal(&s).lambda, -1.0);
        let r = binary_a_optimal(&s, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(r.lambda, -1.0);
        assert!((r.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn asymmetry_style_rank_one_pair() {
        let (f1, f2) = (0.3_f64, 0.45_f64);
        let j1 = fm([1.0, 1.0, 1.0, 1.0]).scaled(1.0 / (4.0 * f1 * f1));
        let j2 = fm([1.0, -1.0, -1.0, 1.0]).scaled(1.0 / (4.0 * f2 * f2));
        let s = BinaryDesignSummary::new(j1, j2).unwrap();
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let r = binary_a_optimal(&s, &w).unwrap();
        assert_eq!(r.branch, DesignBranch::Interior);
        assert!((r.lambda - (f1 - f2) / (f1 + f2)).abs() < 1e-12);
        assert!((r.value - (f1 + f2).powi(2)).abs() < 1e-12);
    }
}
