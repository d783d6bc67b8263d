//! Qubit states, measurements and parametric channel families.
//!
//! States and channels live in the Bloch picture: a density matrix
//! `ρ = (I + s·σ)/2` is stored as its real 3-vector `s`, and every channel is
//! an affine map `s ↦ A s + b` on that vector. Density-matrix and Kraus forms
//! exist for validation and cross-checks.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2×2 complex operator.
pub type Operator = Matrix2<Complex64>;

/// Tolerance on the Bloch norm.
pub const STATE_TOL: f64 = 1e-12;
/// Tolerance for POVM positivity and completeness, and for Kraus completeness.
pub const MEASUREMENT_TOL: f64 = 1e-10;
/// Slack allowed when checking that a channel maps the Bloch ball into itself.
pub const CHANNEL_TOL: f64 = 1e-10;
/// Probabilities in `[-PROB_CLIP, 0)` are clipped to zero.
pub const PROB_CLIP: f64 = 1e-12;
/// Step of the central finite-difference fallback for partial derivatives.
pub const FD_STEP: f64 = 1e-6;

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity_op() -> Operator {
    Operator::identity()
}

/// Pauli matrix `σ_axis` for `axis ∈ {1, 2, 3}`.
///
/// # Panics
/// On any other axis value.
pub fn pauli(axis: usize) -> Operator {
    match axis {
        1 => Operator::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
        2 => Operator::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
        3 => Operator::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
        _ => panic!("Pauli axis must be 1, 2 or 3, got {axis}"),
    }
}

/// Largest entrywise modulus of `a − a†`.
pub fn hermiticity_defect(a: &Operator) -> f64 {
    let d = a - a.adjoint();
    d.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn max_entry_diff(a: &Operator, b: &Operator) -> f64 {
    (a - b).iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian operator.
pub fn hermitian_eigen(a: &Operator) -> ([f64; 2], Operator) {
    let h = (a + a.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let (v0, v1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    if v0 <= v1 {
        ([v0, v1], eig.eigenvectors)
    } else {
        let mut vecs = Operator::zeros();
        vecs.set_column(0, &eig.eigenvectors.column(1));
        vecs.set_column(1, &eig.eigenvectors.column(0));
        ([v1, v0], vecs)
    }
}

/// Real coordinates `(tr A, tr Aσ1, tr Aσ2, tr Aσ3)` of a Hermitian operator.
pub fn pauli_coordinates(a: &Operator) -> (f64, Vector3<f64>) {
    let t = a.trace().re;
    let v = Vector3::new(
        (a * pauli(1)).trace().re,
        (a * pauli(2)).trace().re,
        (a * pauli(3)).trace().re,
    );
    (t, v)
}

/// Operator `(t I + v·σ)/2`.
pub fn from_pauli_coordinates(t: f64, v: &Vector3<f64>) -> Operator {
    let mut out = identity_op() * c(t, 0.0);
    for k in 0..3 {
        out += pauli(k + 1) * c(v[k], 0.0);
    }
    out * c(0.5, 0.0)
}

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

/// A qubit density matrix in Bloch form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct QubitState {
    bloch: Vector3<f64>,
}

impl QubitState {
    pub fn new(bloch: [f64; 3]) -> Result<Self> {
        Self::from_vector(Vector3::from(bloch))
    }

    pub fn from_vector(bloch: Vector3<f64>) -> Result<Self> {
        if bloch.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidState("non-finite Bloch component".into()));
        }
        let norm = bloch.norm();
        if norm > 1.0 + STATE_TOL {
            return Err(Error::InvalidState(format!(
                "Bloch vector norm {norm} exceeds 1"
            )));
        }
        Ok(Self { bloch })
    }

    pub fn maximally_mixed() -> Self {
        Self {
            bloch: Vector3::zeros(),
        }
    }

    pub fn bloch(&self) -> Vector3<f64> {
        self.bloch
    }

    pub fn is_pure(&self) -> bool {
        (self.bloch.norm() - 1.0).abs() <= STATE_TOL
    }
}

impl TryFrom<[f64; 3]> for QubitState {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QubitState> for [f64; 3] {
    fn from(s: QubitState) -> Self {
        [s.bloch[0], s.bloch[1], s.bloch[2]]
    }
}

/// `ρ = (I + Σ s_i σ_i)/2`.
pub fn bloch_to_density(state: &QubitState) -> Operator {
    from_pauli_coordinates(1.0, &state.bloch)
}

/// Recover the Bloch vector `s_i = tr{ρ σ_i}` of a density matrix.
pub fn density_to_bloch(rho: &Operator) -> Result<QubitState> {
    if hermiticity_defect(rho) > STATE_TOL {
        return Err(Error::InvalidState("density matrix is not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > MEASUREMENT_TOL || tr.im.abs() > MEASUREMENT_TOL {
        return Err(Error::InvalidState(format!("trace {tr} is not 1")));
    }
    let (vals, _) = hermitian_eigen(rho);
    if vals[0] < -MEASUREMENT_TOL {
        return Err(Error::InvalidState(format!(
            "density matrix has negative eigenvalue {}",
            vals[0]
        )));
    }
    let (_, v) = pauli_coordinates(rho);
    QubitState::from_vector(v)
}

/// Bloch vector `p·s1 + (1−p)·s2` of the convex mixture of two states.
pub fn mix_states(s1: &QubitState, s2: &QubitState, p: f64) -> Result<QubitState> {
    check_probability(p)?;
    QubitState::from_vector(s1.bloch * p + s2.bloch * (1.0 - p))
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "mixing probability {p} not in [0, 1]"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Measurements
// ---------------------------------------------------------------------------

/// Positive operator-valued measure with outcomes labelled `0..len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    outcomes: Vec<Operator>,
    // (tr Π_x, tr Π_x σ) per outcome
    coords: Vec<(f64, Vector3<f64>)>,
}

impl Povm {
    pub fn new(outcomes: Vec<Operator>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidMeasurement("no outcomes".into()));
        }
        let mut total = Operator::zeros();
        for (x, op) in outcomes.iter().enumerate() {
            if hermiticity_defect(op) > MEASUREMENT_TOL {
                return Err(Error::InvalidMeasurement(format!(
                    "outcome {x} is not Hermitian"
                )));
            }
            let (vals, _) = hermitian_eigen(op);
            if vals[0] < -MEASUREMENT_TOL {
                return Err(Error::InvalidMeasurement(format!(
                    "outcome {x} has negative eigenvalue {}",
                    vals[0]
                )));
            }
            total += op;
        }
        let defect = max_entry_diff(&total, &identity_op());
        if defect > MEASUREMENT_TOL {
            return Err(Error::InvalidMeasurement(format!(
                "outcomes sum to identity only within {defect:e}"
            )));
        }
        let coords = outcomes.iter().map(pauli_coordinates).collect();
        Ok(Self { outcomes, coords })
    }

    /// Two-outcome projective measurement `{(I ± σ_axis)/2}`, `+` first.
    pub fn projective(axis: usize) -> Result<Self> {
        check_axis(axis)?;
        let s = pauli(axis);
        let plus = (identity_op() + s) * c(0.5, 0.0);
        let minus = (identity_op() - s) * c(0.5, 0.0);
        Self::new(vec![plus, minus])
    }

    /// Projective measurement onto an orthonormal basis given as the columns of `basis`.
    pub fn from_basis(basis: &Operator) -> Result<Self> {
        let ops = (0..2)
            .map(|k| {
                let v = basis.column(k);
                v * v.adjoint()
            })
            .collect();
        Self::new(ops)
    }

    pub fn outcomes(&self) -> &[Operator] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// `(tr Π_x, tr Π_x σ)` for each outcome.
    pub fn pauli_coords(&self) -> &[(f64, Vector3<f64>)] {
        &self.coords
    }
}

fn check_axis(axis: usize) -> Result<()> {
    if !(1..=3).contains(&axis) {
        return Err(Error::InvalidArgument(format!(
            "axis must be 1, 2 or 3, got {axis}"
        )));
    }
    Ok(())
}

/// Randomized measurement: run `p1` with probability `p`, else `p2`. The
/// outcome list is `{p Π_x} ⧺ {(1−p) Π'_y}`.
pub fn mix_povms(p1: &Povm, p2: &Povm, p: f64) -> Result<Povm> {
    check_probability(p)?;
    let ops = p1
        .outcomes
        .iter()
        .map(|o| o * c(p, 0.0))
        .chain(p2.outcomes.iter().map(|o| o * c(1.0 - p, 0.0)))
        .collect();
    Povm::new(ops)
}

/// The `+1` eigenstate of `σ_axis` with the projective measurement along the same axis.
pub fn pauli_design(axis: usize) -> Result<(QubitState, Povm)> {
    check_axis(axis)?;
    let mut s = [0.0; 3];
    s[axis - 1] = 1.0;
    Ok((QubitState::new(s)?, Povm::projective(axis)?))
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

/// Affine map `s ↦ linear·s + offset` on Bloch vectors. Also used for
/// parameter derivatives of a channel's action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub linear: Matrix3<f64>,
    pub offset: Vector3<f64>,
}

impl AffineMap {
    pub fn new(linear: Matrix3<f64>, offset: Vector3<f64>) -> Self {
        Self { linear, offset }
    }

    pub fn diagonal(d: [f64; 3]) -> Self {
        Self::new(
            Matrix3::from_diagonal(&Vector3::from(d)),
            Vector3::zeros(),
        )
    }

    pub fn zero() -> Self {
        Self::new(Matrix3::zeros(), Vector3::zeros())
    }

    pub fn apply(&self, s: &Vector3<f64>) -> Vector3<f64> {
        self.linear * s + self.offset
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.linear * k, self.offset * k)
    }

    pub fn add(&self, other: &AffineMap) -> Self {
        Self::new(self.linear + other.linear, self.offset + other.offset)
    }

    pub fn max_abs_diff(&self, other: &AffineMap) -> f64 {
        let l = (self.linear - other.linear).amax();
        let o = (self.offset - other.offset).amax();
        l.max(o)
    }
}

/// Fixed probe directions for channel validation: the 6 axis poles plus the
/// 26 normalized directions of the 3×3×3 cube around the origin.
fn probe_directions() -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(32);
    for k in 0..3 {
        let mut v = Vector3::zeros();
        v[k] = 1.0;
        out.push(v);
        out.push(-v);
    }
    for i in -1..=1 {
        for j in -1..=1 {
            for k in -1..=1 {
                if i == 0 && j == 0 && k == 0 {
                    continue;
                }
                out.push(Vector3::new(i as f64, j as f64, k as f64).normalize());
            }
        }
    }
    out
}

/// A qubit channel in affine Bloch form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineBlochChannel {
    map: AffineMap,
}

impl AffineBlochChannel {
    pub fn new(map: AffineMap) -> Result<Self> {
        if map.linear.iter().chain(map.offset.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidChannel("non-finite entry".into()));
        }
        for dir in probe_directions() {
            let img = map.apply(&dir);
            if img.norm() > 1.0 + CHANNEL_TOL {
                return Err(Error::InvalidChannel(format!(
                    "maps unit vector {dir:?} outside the Bloch ball (|image| = {})",
                    img.norm()
                )));
            }
        }
        Ok(Self { map })
    }

    pub fn identity() -> Self {
        Self {
            map: AffineMap::diagonal([1.0, 1.0, 1.0]),
        }
    }

    pub fn map(&self) -> &AffineMap {
        &self.map
    }

    pub fn apply(&self, state: &QubitState) -> QubitState {
        // validated maps send the ball into itself; clamp rounding noise
        let out = self.map.apply(&state.bloch());
        let n = out.norm();
        let out = if n > 1.0 { out / n } else { out };
        QubitState { bloch: out }
    }

    /// Density-matrix action, for cross-checks against Kraus forms.
    pub fn apply_density(&self, rho: &Operator) -> Operator {
        let (t, v) = pauli_coordinates(rho);
        let out = self.map.linear * v + self.map.offset * t;
        from_pauli_coordinates(t, &out)
    }
}

/// Channel in Kraus form `ρ ↦ Σ_k E_k ρ E_k†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    ops: Vec<Operator>,
}

impl KrausChannel {
    pub fn new(ops: Vec<Operator>) -> Result<Self> {
        let total: Operator = ops.iter().map(|e| e.adjoint() * e).sum();
        let defect = max_entry_diff(&total, &identity_op());
        if defect > MEASUREMENT_TOL {
            return Err(Error::InvalidChannel(format!(
                "Kraus operators are not trace preserving (defect {defect:e})"
            )));
        }
        Ok(Self { ops })
    }

    pub fn ops(&self) -> &[Operator] {
        &self.ops
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        self.ops.iter().map(|e| e * rho * e.adjoint()).sum()
    }

    /// Affine Bloch form: `offset = image of I/2`, columns from the Pauli images.
    pub fn to_affine(&self) -> Result<AffineBlochChannel> {
        let (_, offset) = pauli_coordinates(&self.apply(&(identity_op() * c(0.5, 0.0))));
        let mut linear = Matrix3::zeros();
        for k in 0..3 {
            let (_, img) = pauli_coordinates(&self.apply(&(pauli(k + 1) * c(0.5, 0.0))));
            linear.set_column(k, &img);
        }
        AffineBlochChannel::new(AffineMap::new(linear, offset))
    }
}

/// Outcome distribution `p(x) = tr{T(ρ) Π_x}`.
///
/// Values in `[-1e-12, 0)` are clipped to zero and the vector renormalized.
pub fn born_probabilities(
    state: &QubitState,
    channel: &AffineBlochChannel,
    povm: &Povm,
) -> Result<Vec<f64>> {
    let out = channel.apply(state).bloch();
    probabilities_for_bloch(&out, povm)
}

pub(crate) fn probabilities_for_bloch(r: &Vector3<f64>, povm: &Povm) -> Result<Vec<f64>> {
    let mut probs = Vec::with_capacity(povm.len());
    for (x, (t, v)) in povm.pauli_coords().iter().enumerate() {
        let p = 0.5 * (t + v.dot(r));
        if p < -PROB_CLIP {
            return Err(Error::InvalidMeasurement(format!(
                "outcome {x} has probability {p}"
            )));
        }
        probs.push(p.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > MEASUREMENT_TOL {
        return Err(Error::InvalidMeasurement(format!(
            "probabilities sum to {total}"
        )));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

// ---------------------------------------------------------------------------
// Parametric families
// ---------------------------------------------------------------------------

/// Channel parameter vector θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("θ must be finite".into()));
        }
        Ok(Self(theta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ParamPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParamPoint> for Vec<f64> {
    fn from(p: ParamPoint) -> Self {
        p.0
    }
}

impl<const N: usize> From<[f64; N]> for ParamPoint {
    /// # Panics
    /// On non-finite entries.
    fn from(v: [f64; N]) -> Self {
        Self::new(v.to_vec()).expect("finite parameter vector")
    }
}

/// A smooth family `θ ↦ T_θ` of qubit channels.
pub trait ChannelFamily: Send + Sync {
    fn name(&self) -> &str;

    fn n_params(&self) -> usize;

    /// Domain membership of a raw parameter vector (length already checked).
    fn check_domain(&self, theta: &[f64]) -> Result<()>;

    /// The affine action at θ, without domain checks.
    fn affine_map(&self, theta: &[f64]) -> AffineMap;

    /// Exact `∂(action)/∂θ_i`, when the family knows them.
    fn analytic_partials(&self, _theta: &[f64]) -> Option<Vec<AffineMap>> {
        None
    }

    fn validate(&self, theta: &ParamPoint) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::domain(
                self.name(),
                format!("expected {} parameters, got {}", self.n_params(), theta.len()),
            ));
        }
        self.check_domain(theta.as_slice())
    }

    fn eval(&self, theta: &ParamPoint) -> Result<AffineBlochChannel> {
        self.validate(theta)?;
        AffineBlochChannel::new(self.affine_map(theta.as_slice()))
    }

    fn partials(&self, theta: &ParamPoint) -> Result<Vec<AffineMap>> {
        self.validate(theta)?;
        match self.analytic_partials(theta.as_slice()) {
            Some(p) => Ok(p),
            None => self.finite_difference_partials(theta),
        }
    }

    /// Central differences with step [`FD_STEP`]; one-sided where a central
    /// stencil would leave the domain.
    fn finite_difference_partials(&self, theta: &ParamPoint) -> Result<Vec<AffineMap>> {
        self.validate(theta)?;
        let base = theta.as_slice();
        let inside = |t: &[f64]| self.check_domain(t).is_ok();
        (0..self.n_params())
            .map(|i| {
                let mut plus = base.to_vec();
                let mut minus = base.to_vec();
                plus[i] += FD_STEP;
                minus[i] -= FD_STEP;
                let f = |t: &[f64]| self.affine_map(t);
                match (inside(&plus), inside(&minus)) {
                    (true, true) => Ok(f(&plus).add(&f(&minus).scaled(-1.0)).scaled(0.5 / FD_STEP)),
                    (true, false) => Ok(f(&plus).add(&f(base).scaled(-1.0)).scaled(1.0 / FD_STEP)),
                    (false, true) => Ok(f(base).add(&f(&minus).scaled(-1.0)).scaled(1.0 / FD_STEP)),
                    (false, false) => Err(Error::domain(
                        self.name(),
                        format!("no finite-difference stencil fits in the domain along θ_{}", i + 1),
                    )),
                }
            })
            .collect()
    }
}

const DOMAIN_TOL: f64 = 1e-12;

/// `s ↦ (θ1 s1, θ2 s2, θ3 s3)` on the closed ball `Σθ_i² ≤ 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearScaling;

impl ChannelFamily for LinearScaling {
    fn name(&self) -> &str {
        "scaling"
    }

    fn n_params(&self) -> usize {
        3
    }

    fn check_domain(&self, t: &[f64]) -> Result<()> {
        let r2: f64 = t.iter().map(|x| x * x).sum();
        if r2 > 1.0 + DOMAIN_TOL {
            return Err(Error::domain(self.name(), format!("Σθ² = {r2} > 1")));
        }
        Ok(())
    }

    fn affine_map(&self, t: &[f64]) -> AffineMap {
        AffineMap::diagonal([t[0], t[1], t[2]])
    }

    fn analytic_partials(&self, _t: &[f64]) -> Option<Vec<AffineMap>> {
        Some(
            (0..3)
                .map(|i| {
                    let mut d = [0.0; 3];
                    d[i] = 1.0;
                    AffineMap::diagonal(d)
                })
                .collect(),
        )
    }
}

/// Pauli channel `(1−Σθ_i)ρ + Σ θ_i σ_i ρ σ_i` on the open simplex.
#[derive(Debug, Clone, Copy, Default)]
pub struct PauliChannel;

impl PauliChannel {
    /// Diagonal scalings `ξ_i = 1 + 2θ_i − 2Σ_j θ_j`.
    pub fn xi(t: &[f64]) -> [f64; 3] {
        let total: f64 = t.iter().sum();
        [
            1.0 + 2.0 * t[0] - 2.0 * total,
            1.0 + 2.0 * t[1] - 2.0 * total,
            1.0 + 2.0 * t[2] - 2.0 * total,
        ]
    }

    pub fn kraus(t: &[f64]) -> Result<KrausChannel> {
        let total: f64 = t.iter().sum();
        let mut ops = vec![identity_op() * c((1.0 - total).max(0.0).sqrt(), 0.0)];
        for (i, &ti) in t.iter().enumerate() {
            ops.push(pauli(i + 1) * c(ti.max(0.0).sqrt(), 0.0));
        }
        KrausChannel::new(ops)
    }
}

impl ChannelFamily for PauliChannel {
    fn name(&self) -> &str {
        "pauli"
    }

    fn n_params(&self) -> usize {
        3
    }

    fn check_domain(&self, t: &[f64]) -> Result<()> {
        if let Some(i) = t.iter().position(|&x| x <= 0.0) {
            return Err(Error::domain(
                self.name(),
                format!("θ_{} = {} must be positive", i + 1, t[i]),
            ));
        }
        let total: f64 = t.iter().sum();
        if 1.0 - total <= 0.0 {
            return Err(Error::domain(
                self.name(),
                format!("1 − Σθ = {} must be positive", 1.0 - total),
            ));
        }
        Ok(())
    }

    fn affine_map(&self, t: &[f64]) -> AffineMap {
        AffineMap::diagonal(Self::xi(t))
    }

    fn analytic_partials(&self, _t: &[f64]) -> Option<Vec<AffineMap>> {
        Some(
            (0..3)
                .map(|j| {
                    let mut d = [-2.0; 3];
                    d[j] = 0.0;
                    AffineMap::diagonal(d)
                })
                .collect(),
        )
    }
}

/// Two-parameter Pauli channel (θ3 = 0) in asymmetry coordinates
/// `ε1 = θ1 − θ2`, `ε2 = 1 − (θ1 + θ2)`; acts as
/// `diag(ε1+ε2, −ε1+ε2, 2ε2−1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Asymmetry;

impl Asymmetry {
    /// `(ε1, ε2)` from the Pauli parameters `(θ1, θ2)`.
    pub fn from_pauli(theta1: f64, theta2: f64) -> (f64, f64) {
        (theta1 - theta2, 1.0 - (theta1 + theta2))
    }

    /// `(θ1, θ2)` from `(ε1, ε2)`.
    pub fn to_pauli(eps1: f64, eps2: f64) -> (f64, f64) {
        ((1.0 - eps2 + eps1) / 2.0, (1.0 - eps2 - eps1) / 2.0)
    }
}

impl ChannelFamily for Asymmetry {
    fn name(&self) -> &str {
        "asymmetry"
    }

    fn n_params(&self) -> usize {
        2
    }

    fn check_domain(&self, t: &[f64]) -> Result<()> {
        let (e1, e2) = (t[0], t[1]);
        if !(-1.0 - DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&e1) {
            return Err(Error::domain(self.name(), format!("ε1 = {e1} not in [−1, 1]")));
        }
        if !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&e2) {
            return Err(Error::domain(self.name(), format!("ε2 = {e2} not in [0, 1]")));
        }
        if e2 > 1.0 - e1.abs() + DOMAIN_TOL {
            return Err(Error::domain(
                self.name(),
                format!("ε2 = {e2} exceeds 1 − |ε1| = {}", 1.0 - e1.abs()),
            ));
        }
        Ok(())
    }

    fn affine_map(&self, t: &[f64]) -> AffineMap {
        let (e1, e2) = (t[0], t[1]);
        AffineMap::diagonal([e1 + e2, -e1 + e2, 2.0 * e2 - 1.0])
    }

    fn analytic_partials(&self, _t: &[f64]) -> Option<Vec<AffineMap>> {
        Some(vec![
            AffineMap::diagonal([1.0, -1.0, 0.0]),
            AffineMap::diagonal([1.0, 1.0, 2.0]),
        ])
    }
}

/// One-parameter line `t ↦ base + t·direction` through another family.
#[derive(Debug, Clone)]
pub struct LineSlice<F> {
    parent: F,
    base: Vec<f64>,
    direction: Vec<f64>,
    name: String,
}

impl<F: ChannelFamily> LineSlice<F> {
    pub fn new(parent: F, base: Vec<f64>, direction: Vec<f64>) -> Result<Self> {
        let n = parent.n_params();
        if base.len() != n || direction.len() != n {
            return Err(Error::InvalidArgument(format!(
                "slice of `{}` needs {n}-vectors",
                parent.name()
            )));
        }
        let name = format!("{}-slice", parent.name());
        Ok(Self {
            parent,
            base,
            direction,
            name,
        })
    }

    fn point(&self, t: f64) -> Vec<f64> {
        self.base
            .iter()
            .zip(&self.direction)
            .map(|(b, d)| b + t * d)
            .collect()
    }
}

impl<F: ChannelFamily> ChannelFamily for LineSlice<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_params(&self) -> usize {
        1
    }

    fn check_domain(&self, t: &[f64]) -> Result<()> {
        self.parent.check_domain(&self.point(t[0]))
    }

    fn affine_map(&self, t: &[f64]) -> AffineMap {
        self.parent.affine_map(&self.point(t[0]))
    }

    fn analytic_partials(&self, t: &[f64]) -> Option<Vec<AffineMap>> {
        let parts = self.parent.analytic_partials(&self.point(t[0]))?;
        let d = parts
            .iter()
            .zip(&self.direction)
            .fold(AffineMap::zero(), |acc, (p, &w)| acc.add(&p.scaled(w)));
        Some(vec![d])
    }
}

/// Named channel families for CLI and configuration use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Scaling,
    Pauli,
    Asymmetry,
}

impl FamilyKind {
    pub fn family(self) -> Box<dyn ChannelFamily> {
        match self {
            FamilyKind::Scaling => Box::new(LinearScaling),
            FamilyKind::Pauli => Box::new(PauliChannel),
            FamilyKind::Asymmetry => Box::new(Asymmetry),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Scaling => "scaling",
            FamilyKind::Pauli => "pauli",
            FamilyKind::Asymmetry => "asymmetry",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaling" => Ok(FamilyKind::Scaling),
            "pauli" => Ok(FamilyKind::Pauli),
            "asymmetry" => Ok(FamilyKind::Asymmetry),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

pub fn linear_scaling_family() -> LinearScaling {
    LinearScaling
}

pub fn pauli_channel_family() -> PauliChannel {
    PauliChannel
}

pub fn asymmetry_family() -> Asymmetry {
    Asymmetry
}
