use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;
use crate::linalg;

/// Relative eigenvalue cutoff used to decide the rank of an information matrix.
pub const RANK_TOL: f64 = 1e-10;
/// Weight (or c-vector) mass outside the range of J that makes a criterion infinite.
pub const RANGE_TOL: f64 = 1e-9;

/// Scalarization of an information matrix; smaller is better.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimalityCriterion {
    /// Matrix order; has no scalar value.
    Lowner,
    /// `tr(W J⁻¹)`; `None` means `W = I`.
    A(Option<DMatrix<f64>>),
    /// `−log det J`.
    D,
    /// `λ_max(J⁻¹)`.
    E,
    /// `cᵀ J⁻¹ c`.
    C(DVector<f64>),
    /// `((1/n) tr J^{−γ})^{1/γ}`.
    Gamma(f64),
    /// `p Ψ1 + (1−p) Ψ2`.
    Compound(f64, Box<OptimalityCriterion>, Box<OptimalityCriterion>),
}

impl OptimalityCriterion {
    pub fn a() -> Self {
        Self::A(None)
    }

    pub fn weighted_a(w: DMatrix<f64>) -> Result<Self> {
        let c = Self::A(Some(w));
        c.validate()?;
        Ok(c)
    }

    pub fn gamma(g: f64) -> Result<Self> {
        let c = Self::Gamma(g);
        c.validate()?;
        Ok(c)
    }

    pub fn compound(p: f64, first: Self, second: Self) -> Result<Self> {
        let c = Self::Compound(p, Box::new(first), Box::new(second));
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::A(Some(w)) => {
                if !w.is_square() || !linalg::is_psd(w, 1e-12) {
                    return Err(Error::InvalidArgument("A-criterion weight must be square PSD".into()));
                }
                if linalg::max_abs_diff(w, &w.transpose()) > 1e-12 {
                    return Err(Error::InvalidArgument("A-criterion weight must be symmetric".into()));
                }
            }
            Self::Gamma(g) if !(g.is_finite() && *g > 0.0) => {
                return Err(Error::InvalidArgument(format!("γ must be finite and positive, got {g}")));
            }
            Self::Compound(p, a, b) => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidArgument(format!("compound weight {p} not in [0, 1]")));
                }
                a.validate()?;
                b.validate()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Short name used in reports.
    pub fn label(&self) -> String {
        match self {
            Self::Lowner => "lowner".into(),
            Self::A(None) => "A".into(),
            Self::A(Some(_)) => "A[W]".into(),
            Self::D => "D".into(),
            Self::E => "E".into(),
            Self::C(_) => "c".into(),
            Self::Gamma(g) => format!("gamma({g})"),
            Self::Compound(p, a, b) => format!("compound({p}, {}, {})", a.label(), b.label()),
        }
    }
}

impl fmt::Display for OptimalityCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl Serialize for OptimalityCriterion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        match self {
            Self::Lowner => map.serialize_entry("name", "lowner")?,
            Self::A(w) => {
                map.serialize_entry("name", "A")?;
                if let Some(w) = w {
                    map.serialize_entry("weight", &rows(w))?;
                }
            }
            Self::D => map.serialize_entry("name", "D")?,
            Self::E => map.serialize_entry("name", "E")?,
            Self::C(c) => {
                map.serialize_entry("name", "c")?;
                map.serialize_entry("c", c.as_slice())?;
            }
            Self::Gamma(g) => {
                map.serialize_entry("name", "gamma")?;
                map.serialize_entry("gamma", g)?;
            }
            Self::Compound(p, a, b) => {
                map.serialize_entry("name", "compound")?;
                map.serialize_entry("p", p)?;
                map.serialize_entry("first", a.as_ref())?;
                map.serialize_entry("second", b.as_ref())?;
            }
        }
        map.end()
    }
}

/// Criterion value with rank diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionValue {
    /// `+∞` when the criterion cannot be estimated from J.
    pub value: f64,
    pub rank_deficient: bool,
    /// The weight matrix or c-vector reaches directions J carries no information about.
    pub off_range: bool,
}

/// Eigen-structure of J reused across criteria.
pub(crate) struct Spectrum {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    rank: usize,
    cutoff: f64,
}

impl Spectrum {
    pub(crate) fn new(j: &DMatrix<f64>) -> Self {
        let (values, vectors) = linalg::sym_eigen(j);
        let lmax = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let cutoff = (RANK_TOL * lmax).max(f64::MIN_POSITIVE);
        let rank = values.iter().filter(|&&v| v > cutoff).count();
        Self {
            values,
            vectors,
            rank,
            cutoff,
        }
    }

    fn n(&self) -> usize {
        self.values.len()
    }

    fn full_rank(&self) -> bool {
        self.rank == self.n()
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let cut = self.cutoff;
        linalg::spectral_map(&self.values, &self.vectors, |v| if v > cut { f(v) } else { 0.0 })
    }

    fn pinv(&self) -> DMatrix<f64> {
        self.map(|v| 1.0 / v)
    }

    fn kernel_projector(&self) -> DMatrix<f64> {
        let cut = self.cutoff;
        linalg::spectral_map(&self.values, &self.vectors, |v| if v > cut { 0.0 } else { 1.0 })
    }
}

/// Value of a criterion at J. Errors for [`OptimalityCriterion::Lowner`].
pub fn evaluate_criterion(crit: &OptimalityCriterion, j: &FisherMatrix) -> Result<f64> {
    Ok(evaluate_detailed(crit, j.entries())?.value)
}

/// Value of a criterion at a raw symmetric matrix, with rank diagnostics.
///
/// Rank-deficient J gives `+∞` for D, E and γ; for A and c the pseudo-inverse
/// is used unless the weight or c-vector has support off the range of J.
pub fn evaluate_detailed(crit: &OptimalityCriterion, j: &DMatrix<f64>) -> Result<CriterionValue> {
    let spec = Spectrum::new(j);
    evaluate_spectrum(crit, &spec)
}

pub(crate) fn evaluate_spectrum(crit: &OptimalityCriterion, spec: &Spectrum) -> Result<CriterionValue> {
    let n = spec.n();
    let rank_deficient = !spec.full_rank();
    let plain = |value: f64| CriterionValue {
        value,
        rank_deficient,
        off_range: false,
    };
    let out = match crit {
        OptimalityCriterion::Lowner => {
            return Err(Error::InvalidArgument(
                "the Löwner order has no scalar value; use lowner_check".into(),
            ))
        }
        OptimalityCriterion::A(w) => {
            let w = match w {
                Some(w) if w.nrows() != n => {
                    return Err(Error::InvalidArgument("weight size does not match J".into()))
                }
                Some(w) => w.clone(),
                None => DMatrix::identity(n, n),
            };
            let leak = (spec.kernel_projector() * &w).trace();
            if leak > RANGE_TOL * w.trace().max(1.0) {
                CriterionValue {
                    value: f64::INFINITY,
                    rank_deficient,
                    off_range: true,
                }
            } else {
                plain((w * spec.pinv()).trace())
            }
        }
        OptimalityCriterion::D => {
            if rank_deficient {
                plain(f64::INFINITY)
            } else {
                plain(-spec.values.iter().map(|v| v.ln()).sum::<f64>())
            }
        }
        OptimalityCriterion::E => {
            if rank_deficient {
                plain(f64::INFINITY)
            } else {
                plain(1.0 / spec.values[0])
            }
        }
        OptimalityCriterion::C(c) => {
            if c.len() != n {
                return Err(Error::InvalidArgument("c-vector size does not match J".into()));
            }
            let leak = (spec.kernel_projector() * c).norm_squared();
            if leak > RANGE_TOL * c.norm_squared().max(1.0) {
                CriterionValue {
                    value: f64::INFINITY,
                    rank_deficient,
                    off_range: true,
                }
            } else {
                plain((c.transpose() * spec.pinv() * c)[(0, 0)])
            }
        }
        OptimalityCriterion::Gamma(g) => {
            if rank_deficient {
                plain(f64::INFINITY)
            } else {
                let mean = spec.values.iter().map(|v| v.powf(-g)).sum::<f64>() / n as f64;
                plain(mean.powf(1.0 / g))
            }
        }
        OptimalityCriterion::Compound(p, a, b) => {
            let va = evaluate_spectrum(a, spec)?;
            let vb = evaluate_spectrum(b, spec)?;
            // avoid 0·∞
            let value = if *p == 0.0 {
                vb.value
            } else if *p == 1.0 {
                va.value
            } else {
                p * va.value + (1.0 - p) * vb.value
            };
            CriterionValue {
                value,
                rank_deficient,
                off_range: va.off_range || vb.off_range,
            }
        }
    };
    Ok(out)
}

/// Matrix gradient `G = ∂Ψ/∂J` so that `dΨ = tr(G dJ)`; `None` where Ψ is infinite.
pub(crate) fn gradient_spectrum(crit: &OptimalityCriterion, spec: &Spectrum) -> Option<DMatrix<f64>> {
    let n = spec.n();
    match crit {
        OptimalityCriterion::Lowner => None,
        OptimalityCriterion::A(w) => {
            let inv = spec.pinv();
            let w = w.clone().unwrap_or_else(|| DMatrix::identity(n, n));
            Some(-(&inv * w * &inv))
        }
        OptimalityCriterion::D => spec.full_rank().then(|| -spec.pinv()),
        OptimalityCriterion::E => spec.full_rank().then(|| {
            let v = spec.vectors.column(0);
            let l = spec.values[0];
            -(v * v.transpose()) / (l * l)
        }),
        OptimalityCriterion::C(c) => {
            let inv = spec.pinv();
            let u = &inv * c;
            Some(-(&u * u.transpose()))
        }
        OptimalityCriterion::Gamma(g) => spec.full_rank().then(|| {
            let s = spec.values.iter().map(|v| v.powf(-g)).sum::<f64>() / n as f64;
            let scale = s.powf(1.0 / g - 1.0) / n as f64;
            -spec.map(|v| v.powf(-g - 1.0)) * scale
        }),
        OptimalityCriterion::Compound(p, a, b) => {
            let ga = if *p > 0.0 { Some(gradient_spectrum(a, spec)? * *p) } else { None };
            let gb = if *p < 1.0 {
                Some(gradient_spectrum(b, spec)? * (1.0 - p))
            } else {
                None
            };
            match (ga, gb) {
                (Some(x), Some(y)) => Some(x + y),
                (Some(x), None) | (None, Some(x)) => Some(x),
                (None, None) => None,
            }
        }
    }
}

/// Efficiency `η = Ψ[e_*] / Ψ[e]`, clipped to `[0, 1]`.
pub fn efficiency(crit: &OptimalityCriterion, value_at_e: f64, value_at_opt: f64) -> Result<f64> {
    if matches!(crit, OptimalityCriterion::D) {
        // −log det can be negative; compare on the det⁻¹ scale
        return efficiency(&OptimalityCriterion::E, value_at_e.exp(), value_at_opt.exp());
    }
    if !(value_at_e.is_finite() || value_at_e == f64::INFINITY) || value_at_e <= 0.0 {
        return Err(Error::UndefinedEfficiency(format!(
            "criterion value {value_at_e} at the design is not positive"
        )));
    }
    if !(value_at_opt.is_finite() && value_at_opt > 0.0) {
        return Err(Error::UndefinedEfficiency(format!(
            "optimal criterion value {value_at_opt} is not positive"
        )));
    }
    Ok((value_at_opt / value_at_e).clamp(0.0, 1.0))
}

/// Numerical check that the γ family recovers the D and E criteria at its limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaLimitsReport {
    /// `(det J⁻¹)^{1/n}`
    pub d_value: f64,
    /// `(1/n) tr J⁻¹`
    pub a_value: f64,
    /// `λ_max(J⁻¹)`
    pub e_value: f64,
    pub gamma_small: f64,
    pub gamma_large: f64,
    pub d_limit_rel_error: f64,
    pub e_limit_rel_error: f64,
    /// `d_value ≤ a_value ≤ e_value` (up to rounding).
    pub liapunov_holds: bool,
    pub consistent: bool,
}

const GAMMA_SMALL: f64 = 1e-6;
const GAMMA_LARGE: f64 = 1e3;

pub fn gamma_limits_consistency(j: &FisherMatrix) -> Result<GammaLimitsReport> {
    let spec = Spectrum::new(j.entries());
    if !spec.full_rank() {
        return Err(Error::InvalidArgument("J must be positive definite".into()));
    }
    let n = spec.n() as f64;
    let d_value = (-spec.values.iter().map(|v| v.ln()).sum::<f64>() / n).exp();
    let a_value = spec.values.iter().map(|v| 1.0 / v).sum::<f64>() / n;
    let e_value = 1.0 / spec.values[0];
    let gv = |g: f64| evaluate_spectrum(&OptimalityCriterion::Gamma(g), &spec).map(|v| v.value);
    let gamma_small = gv(GAMMA_SMALL)?;
    let gamma_large = gv(GAMMA_LARGE)?;
    let d_limit_rel_error = (gamma_small - d_value).abs() / d_value;
    let e_limit_rel_error = (gamma_large - e_value).abs() / e_value;
    let slack = 1e-12 * e_value;
    let liapunov_holds = d_value <= a_value + slack && a_value <= e_value + slack;
    Ok(GammaLimitsReport {
        d_value,
        a_value,
        e_value,
        gamma_small,
        gamma_large,
        d_limit_rel_error,
        e_limit_rel_error,
        liapunov_holds,
        consistent: liapunov_holds && d_limit_rel_error < 1e-2 && e_limit_rel_error < 1e-2,
    })
}
