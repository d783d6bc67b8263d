//! Closed forms for the linear scaling channel, the Pauli channel and the
//! two-parameter noise-asymmetry family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{mixed_fisher, partial_fisher, Design, MixedDesign};
use crate::quantum::{Asymmetry, ChannelFamily, LinearScaling, ParamPoint, PauliChannel};

const EPS_TOL: f64 = 1e-12;

/// Noise asymmetry `ε1 = θ1 − θ2` and `ε2 = 1 − (θ1 + θ2)` of a Pauli channel with θ3 = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct AsymmetryPoint {
    eps1: f64,
    eps2: f64,
}

impl AsymmetryPoint {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self> {
        if !(eps1.is_finite() && eps2.is_finite()) {
            return Err(Error::domain("asymmetry", "ε must be finite"));
        }
        Asymmetry.check_domain(&[eps1, eps2])?;
        Ok(Self {
            eps1: eps1.clamp(-1.0, 1.0),
            eps2: eps2.clamp(0.0, 1.0 - eps1.abs().min(1.0)).max(0.0),
        })
    }

    pub fn from_theta(theta1: f64, theta2: f64) -> Result<Self> {
        let (e1, e2) = Asymmetry::from_pauli(theta1, theta2);
        Self::new(e1, e2)
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    pub fn theta(&self) -> (f64, f64) {
        Asymmetry::to_pauli(self.eps1, self.eps2)
    }

    pub fn param_point(&self) -> ParamPoint {
        ParamPoint::from([self.eps1, self.eps2])
    }

    /// Probability of the `+` outcome for the axis-`axis` Pauli design.
    pub fn plus_probability(&self, axis: usize) -> f64 {
        match axis {
            1 => 0.5 * (1.0 + self.eps1 + self.eps2),
            _ => 0.5 * (1.0 - self.eps1 + self.eps2),
        }
    }
}

impl TryFrom<[f64; 2]> for AsymmetryPoint {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<AsymmetryPoint> for [f64; 2] {
    fn from(p: AsymmetryPoint) -> Self {
        [p.eps1, p.eps2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTriple {
    pub f1: f64,
    pub f2: f64,
    pub f0: f64,
}

/// `f_{1,2} = ½√(1−(ε1±ε2)²)`, `f0 = √((1−ε2)ε2)`.
pub fn f_values(eps: &AsymmetryPoint) -> FTriple {
    let (e1, e2) = (eps.eps1, eps.eps2);
    FTriple {
        f1: 0.5 * (1.0 - (e1 + e2).powi(2)).max(0.0).sqrt(),
        f2: 0.5 * (1.0 - (e1 - e2).powi(2)).max(0.0).sqrt(),
        f0: ((1.0 - e2) * e2).max(0.0).sqrt(),
    }
}

/// Single pure-state design with Bloch components `(s1, s2, 0)`: `¼(1/s1² + 1/s2²) − ε1²`.
pub fn asymm_m1_cr_value(eps: &AsymmetryPoint, s1: f64, s2: f64) -> Result<f64> {
    if s1 * s1 + s2 * s2 > 1.0 + EPS_TOL {
        return Err(Error::InvalidState(format!("s1² + s2² = {} > 1", s1 * s1 + s2 * s2)));
    }
    if s1 == 0.0 || s2 == 0.0 {
        return Err(Error::DegenerateModel(
            "s1·s2 = 0 gives a singular design; use asymm_singular_value".into(),
        ));
    }
    Ok(0.25 * (1.0 / (s1 * s1) + 1.0 / (s2 * s2)) - eps.eps1 * eps.eps1)
}

/// Best singular design: `min{f1², f2²}` and the Pauli axis (1 or 2) achieving it.
/// Ties go to axis 1.
pub fn asymm_singular_value(eps: &AsymmetryPoint) -> (f64, usize) {
    let f = f_values(eps);
    let (a, b) = (f.f1 * f.f1, f.f2 * f.f2);
    if a <= b {
        (a, 1)
    } else {
        (b, 2)
    }
}

/// Mixture of the two axis designs with weight `ν1` on axis 1: `f1²/ν1 + f2²/ν2`.
pub fn asymm_m2_cr_value(eps: &AsymmetryPoint, nu1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&nu1) {
        return Err(Error::InvalidArgument(format!("ν1 = {nu1} not in [0, 1]")));
    }
    if nu1 == 0.0 || nu1 == 1.0 {
        return Ok(f64::INFINITY);
    }
    let f = f_values(eps);
    Ok(f.f1 * f.f1 / nu1 + f.f2 * f.f2 / (1.0 - nu1))
}

/// Difference between the best regular single design and the two-design mixture
/// at `ν_{1,2} = (1±λ)/2`.
pub fn delta_m1_m2(eps: &AsymmetryPoint, lambda: f64) -> Result<f64> {
    if !(lambda > -1.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("λ = {lambda} not in (−1, 1)")));
    }
    let (e1, e2) = (eps.eps1, eps.eps2);
    let nu1 = 0.5 * (1.0 + lambda);
    let nu2 = 0.5 * (1.0 - lambda);
    Ok((e2 * e2 - 2.0 * lambda * e1 * e2 - lambda * lambda * (1.0 - e1 * e1)) / (4.0 * nu1 * nu2))
}

/// `(J[e_PT]⁻¹)₁₁ = 3(4f1²f2² + f0²(f1²+f2²))/(f1²+f2²+f0²)` for uniform Pauli-QPT.
pub fn pauli_qpt_partial_inverse(eps: &AsymmetryPoint) -> Result<f64> {
    let f = f_values(eps);
    let (a, b, c) = (f.f1 * f.f1, f.f2 * f.f2, f.f0 * f.f0);
    let den = a + b + c;
    if den <= 0.0 {
        return Err(Error::DegenerateModel(format!(
            "all f vanish at ε = ({}, {})",
            eps.eps1, eps.eps2
        )));
    }
    Ok(3.0 * (4.0 * a * b + c * (a + b)) / den)
}

/// The same quantity through the classical Fisher matrix of the three Pauli
/// designs and the Schur complement of the ε2 block.
pub fn pauli_qpt_partial_inverse_schur(eps: &AsymmetryPoint) -> Result<f64> {
    let mixed = MixedDesign::uniform(Design::pauli_trio())?;
    let j = mixed_fisher(&Asymmetry, &mixed, &eps.param_point())?;
    let part = partial_fisher(&j, &[0])?;
    Ok(part.partial_inverse[(0, 0)])
}

/// `λ* = (f1−f2)/(f1+f2)`.
pub fn asymm_lambda_star(eps: &AsymmetryPoint) -> Result<f64> {
    let f = f_values(eps);
    if f.f1 + f.f2 <= 0.0 {
        return Err(Error::DegenerateModel("f1 = f2 = 0: λ* is undefined".into()));
    }
    Ok((f.f1 - f.f2) / (f.f1 + f.f2))
}

fn theta3(theta: &ParamPoint, family: &dyn ChannelFamily) -> Result<[f64; 3]> {
    family.validate(theta)?;
    let t = theta.as_slice();
    Ok([t[0], t[1], t[2]])
}

/// γ-optimal Pauli-design weights for the scaling channel: `ν_i ∝ (1−θ_i²)^{γ/(1+γ)}`.
pub fn scaling_optimal_nu(theta: &ParamPoint, gamma: f64) -> Result<Vec<f64>> {
    let t = theta3(theta, &LinearScaling)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("γ must be finite and positive, got {gamma}")));
    }
    let q = gamma / (1.0 + gamma);
    let p: Vec<f64> = t.iter().map(|x| (1.0 - x * x).max(0.0).powf(q)).collect();
    let s: f64 = p.iter().sum();
    Ok(p.into_iter().map(|x| x / s).collect())
}

/// `(tr J[e_PT]⁻¹, tr J[e_*]⁻¹) = (3Σ(1−θ_i²), (Σ√(1−θ_i²))²)` for the scaling channel.
pub fn scaling_a_values(theta: &ParamPoint) -> Result<(f64, f64)> {
    let t = theta3(theta, &LinearScaling)?;
    let pt = 3.0 * t.iter().map(|x| 1.0 - x * x).sum::<f64>();
    let opt = t.iter().map(|x| (1.0 - x * x).max(0.0).sqrt()).sum::<f64>().powi(2);
    Ok((pt, opt))
}

/// A-optimal Pauli-design weights for the Pauli channel, `ν_i ∝ √(1−ξ_i²)`,
/// and the optimal value `(3/16)(Σ√(1−ξ_i²))²`.
pub fn pauli_optimal_nu_a(theta: &ParamPoint) -> Result<(Vec<f64>, f64)> {
    let t = theta3(theta, &PauliChannel)?;
    let r: Vec<f64> = PauliChannel::xi(&t)
        .iter()
        .map(|x| (1.0 - x * x).max(0.0).sqrt())
        .collect();
    let s: f64 = r.iter().sum();
    Ok((r.iter().map(|x| x / s).collect(), 3.0 / 16.0 * s * s))
}

/// One point of the Pauli-QPT versus two-design comparison surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig1Row {
    pub eps1: f64,
    pub eps2: f64,
    pub value_pt: f64,
    pub value_m2: f64,
    pub difference: f64,
}

/// Evaluate `pauli_qpt_partial_inverse − asymm_m2_cr_value(·, ½)` on the
/// in-domain ε grid with the given step. Points where every f vanishes are skipped.
pub fn fig1_grid(step: f64) -> Result<Vec<Fig1Row>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid step {step} not in (0, 1]")));
    }
    let n = (1.0 / step).round() as i64;
    let mut rows = Vec::new();
    for i1 in -n..=n {
        for i2 in 0..=(n - i1.abs()) {
            let eps = AsymmetryPoint::new(i1 as f64 / n as f64, i2 as f64 / n as f64)?;
            let value_pt = match pauli_qpt_partial_inverse(&eps) {
                Ok(v) => v,
                Err(e) if e.is_numerical() => continue,
                Err(e) => return Err(e),
            };
            let value_m2 = asymm_m2_cr_value(&eps, 0.5)?;
            rows.push(Fig1Row {
                eps1: eps.eps1,
                eps2: eps.eps2,
                value_pt,
                value_m2,
                difference: value_pt - value_m2,
            });
        }
    }
    Ok(rows)
}

/// Sign pattern of a Fig. 1 grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignSummary {
    pub points: usize,
    pub nonnegative: usize,
    pub fraction_nonnegative: f64,
    /// Smallest `|ε1| + ε2` over the negative points.
    pub min_band_of_negatives: f64,
}

pub fn fig1_sign_summary(rows: &[Fig1Row]) -> SignSummary {
    let nonnegative = rows.iter().filter(|r| r.difference >= -1e-12).count();
    let min_band_of_negatives = rows
        .iter()
        .filter(|r| r.difference < -1e-12)
        .map(|r| r.eps1.abs() + r.eps2)
        .fold(f64::INFINITY, f64::min);
    SignSummary {
        points: rows.len(),
        nonnegative,
        fraction_nonnegative: nonnegative as f64 / rows.len().max(1) as f64,
        min_band_of_negatives,
    }
}
