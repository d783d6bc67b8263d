//! Fisher information of designs and input states.
//!
//! * [`classical_fisher`] — information of the outcome distribution of one
//!   design `e = (ρ, Π)`.
//! * [`mixed_fisher`] — the ν-weighted sum over a mixed design.
//! * [`sld_operators`] / [`sld_qfi`] — symmetric logarithmic derivatives and
//!   the SLD quantum Fisher information of the output state `T_θ(ρ)`.
//! * [`partial_fisher`] — Schur-complement information for a parameter block
//!   in the presence of nuisance parameters.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quantum::{
    self, hermitian_eigen, ChannelFamily, Operator, ParamPoint, Povm,
    QubitState,
};

/// Outcomes with probability at or below this are dropped from the Fisher sum.
pub const PROB_FLOOR: f64 = 1e-12;
/// Eigenvalue sums at or below this are treated as off-support in the SLD solve.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Maximum allowed SLD equation residual.
pub const SLD_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FisherKind {
    Classical,
    SldQuantum,
}

/// Symmetric PSD information matrix, tagged with its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    kind: FisherKind,
    entries: DMatrix<f64>,
}

impl FisherMatrix {
    /// Wraps a matrix after checking shape, symmetry (1e-10) and PSD (−1e-9).
    /// The stored matrix is exactly symmetrized.
    pub fn new(kind: FisherKind, entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidArgument("Fisher matrix must be square".into()));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateModel("non-finite Fisher entry".into()));
        }
        let asym = linalg::max_abs_diff(&entries, &entries.transpose());
        if asym > 1e-10 * entries.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "Fisher matrix is not symmetric (defect {asym:e})"
            )));
        }
        let entries = linalg::symmetrize(&entries);
        let lmin = linalg::min_eigenvalue(&entries);
        if lmin < -1e-9 * entries.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "Fisher matrix is not PSD (min eigenvalue {lmin:e})"
            )));
        }
        Ok(Self { kind, entries })
    }

    pub fn classical(entries: DMatrix<f64>) -> Result<Self> {
        Self::new(FisherKind::Classical, entries)
    }

    pub fn from_rows(kind: FisherKind, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("rows must form a square matrix".into()));
        }
        Self::new(kind, DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(kind: FisherKind, n: usize) -> Self {
        Self {
            kind,
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn kind(&self) -> FisherKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.entries)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::sym_eigen(&self.entries).0.iter().copied().collect()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn determinant(&self) -> f64 {
        self.entries.determinant()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            kind: self.kind,
            entries: &self.entries * k,
        }
    }

    pub fn pseudo_inverse(&self, tol: f64) -> DMatrix<f64> {
        pseudo_inverse(self, tol)
    }

    /// Convex (or any nonnegative) combination `Σ w_i J_i` of same-kind matrices.
    pub fn weighted_sum(weights: &[f64], mats: &[FisherMatrix]) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::InvalidArgument("no matrices to combine".into()))?;
        if weights.len() != mats.len() {
            return Err(Error::InvalidArgument("weights and matrices differ in length".into()));
        }
        let mut acc = DMatrix::zeros(first.n(), first.n());
        for (w, m) in weights.iter().zip(mats) {
            if m.n() != first.n() || m.kind != first.kind {
                return Err(Error::InvalidArgument(
                    "cannot combine Fisher matrices of different size or kind".into(),
                ));
            }
            acc += &m.entries * *w;
        }
        Ok(Self {
            kind: first.kind,
            entries: acc,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct FisherRepr {
    n: usize,
    kind: FisherKind,
    rows: Vec<Vec<f64>>,
}

impl Serialize for FisherMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FisherRepr {
            n: self.n(),
            kind: self.kind,
            rows: self.rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FisherMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FisherRepr::deserialize(d)?;
        if repr.rows.len() != repr.n {
            return Err(serde::de::Error::custom("row count does not match n"));
        }
        FisherMatrix::from_rows(repr.kind, &repr.rows).map_err(serde::de::Error::custom)
    }
}

/// An input state paired with a measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub state: QubitState,
    pub povm: Povm,
}

impl Design {
    pub fn new(state: QubitState, povm: Povm) -> Self {
        Self { state, povm }
    }

    /// Eigenstate of `σ_axis` with the projective measurement along that axis.
    pub fn pauli(axis: usize) -> Result<Self> {
        let (state, povm) = quantum::pauli_design(axis)?;
        Ok(Self { state, povm })
    }

    /// The three Pauli settings, in axis order.
    pub fn pauli_trio() -> Vec<Design> {
        (1..=3)
            .map(|a| Design::pauli(a).expect("valid axis"))
            .collect()
    }
}

/// `m` designs used with simplex weights ν.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDesign {
    weights: Vec<f64>,
    designs: Vec<Design>,
}

impl MixedDesign {
    pub fn new(weights: Vec<f64>, designs: Vec<Design>) -> Result<Self> {
        if weights.is_empty() || weights.len() != designs.len() {
            return Err(Error::InvalidArgument(
                "mixed design needs one weight per design".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights, designs })
    }

    pub fn uniform(designs: Vec<Design>) -> Result<Self> {
        let m = designs.len();
        Self::new(vec![1.0 / m as f64; m], designs)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn designs(&self) -> &[Design] {
        &self.designs
    }
}

/// Fisher matrix `Σ_x ∂p ∂pᵀ / p` from outcome probabilities and their gradients.
///
/// Outcomes with `p ≤ PROB_FLOOR` are dropped; if such an outcome still has a
/// nonzero gradient the model is not regular at this point.
pub fn fisher_from_gradients(probs: &[f64], grads: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let n = grads.first().map_or(0, |g| g.len());
    let mut j = DMatrix::zeros(n, n);
    let mut kept = 0;
    for (p, g) in probs.iter().zip(grads) {
        if *p > PROB_FLOOR {
            j += g * g.transpose() / *p;
            kept += 1;
        } else if g.amax() > 1e-9 {
            return Err(Error::DegenerateModel(format!(
                "outcome probability {p:e} vanishes while its derivative does not"
            )));
        }
    }
    if kept == 0 {
        return Err(Error::DegenerateModel(
            "every outcome probability is below the floor".into(),
        ));
    }
    Ok(j)
}

/// Output Bloch vector and its parameter derivatives at θ.
fn output_and_derivatives(
    family: &dyn ChannelFamily,
    state: &QubitState,
    theta: &ParamPoint,
) -> Result<(Vector3<f64>, Vec<Vector3<f64>>)> {
    let channel = family.eval(theta)?;
    let s = state.bloch();
    let out = channel.map().apply(&s);
    let parts = family.partials(theta)?;
    Ok((out, parts.iter().map(|d| d.apply(&s)).collect()))
}

/// Classical Fisher information `J_θ[e]` of a single design.
pub fn classical_fisher(
    family: &dyn ChannelFamily,
    design: &Design,
    theta: &ParamPoint,
) -> Result<FisherMatrix> {
    let (out, dout) = output_and_derivatives(family, &design.state, theta)?;
    let probs = quantum::probabilities_for_bloch(&out, &design.povm)?;
    let n = family.n_params();
    let grads: Vec<DVector<f64>> = design
        .povm
        .pauli_coords()
        .iter()
        .map(|(_, b)| DVector::from_iterator(n, dout.iter().map(|d| 0.5 * b.dot(d))))
        .collect();
    FisherMatrix::classical(fisher_from_gradients(&probs, &grads)?)
}

/// `Σ ν_i J_θ[e_i]` for a mixed design.
pub fn mixed_fisher(
    family: &dyn ChannelFamily,
    mixed: &MixedDesign,
    theta: &ParamPoint,
) -> Result<FisherMatrix> {
    let mats = mixed
        .designs
        .iter()
        .map(|d| classical_fisher(family, d, theta))
        .collect::<Result<Vec<_>>>()?;
    FisherMatrix::weighted_sum(&mixed.weights, &mats)
}

/// Symmetric logarithmic derivatives `L_i` solving `∂_i ρ' = ½(L_i ρ' + ρ' L_i)`.
#[derive(Debug, Clone)]
pub struct ScoreSet {
    operators: Vec<Operator>,
    output: Operator,
    residual: f64,
}

impl ScoreSet {
    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    /// The output density matrix `ρ' = T_θ(ρ)`.
    pub fn output(&self) -> &Operator {
        &self.output
    }

    /// Largest entrywise residual of the defining equation over all `L_i`.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

fn cplx(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Solve the SLD equations in the eigenbasis of `ρ'`:
/// `L_ab = 2 (∂ρ')_ab / (p_a + p_b)`, zero where `p_a + p_b ≤ 1e-12`.
pub fn sld_operators(
    family: &dyn ChannelFamily,
    state: &QubitState,
    theta: &ParamPoint,
) -> Result<ScoreSet> {
    let (out, dout) = output_and_derivatives(family, state, theta)?;
    let rho = quantum::from_pauli_coordinates(1.0, &out);
    let (p, u) = hermitian_eigen(&rho);
    let mut operators = Vec::with_capacity(dout.len());
    let mut residual = 0.0_f64;
    for (i, d) in dout.iter().enumerate() {
        let drho = quantum::from_pauli_coordinates(0.0, d);
        let local = u.adjoint() * drho * u;
        let mut l = Operator::zeros();
        for a in 0..2 {
            for b in 0..2 {
                let denom = p[a] + p[b];
                if denom > SUPPORT_TOL {
                    l[(a, b)] = local[(a, b)] * cplx(2.0 / denom);
                } else if local[(a, b)].norm() > SLD_RESIDUAL_TOL {
                    return Err(Error::SingularState(format!(
                        "derivative ∂ρ'/∂θ_{} has weight {:e} off the support of the output state",
                        i + 1,
                        local[(a, b)].norm()
                    )));
                }
            }
        }
        let l = u * l * u.adjoint();
        let r = quantum::max_entry_diff(&drho, &((l * rho + rho * l) * cplx(0.5)));
        residual = residual.max(r);
        operators.push(l);
    }
    if residual > SLD_RESIDUAL_TOL {
        return Err(Error::SingularState(format!(
            "SLD equation residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(ScoreSet {
        operators,
        output: rho,
        residual,
    })
}

/// SLD quantum Fisher information `½ tr{ρ'(L_i L_j + L_j L_i)}`.
pub fn sld_qfi(
    family: &dyn ChannelFamily,
    state: &QubitState,
    theta: &ParamPoint,
) -> Result<FisherMatrix> {
    let scores = sld_operators(family, state, theta)?;
    Ok(qfi_from_scores(&scores))
}

pub fn qfi_from_scores(scores: &ScoreSet) -> FisherMatrix {
    let ls = &scores.operators;
    let n = ls.len();
    let rho = &scores.output;
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = (rho * (ls[a] * ls[b] + ls[b] * ls[a])).trace().re * 0.5;
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    FisherMatrix {
        kind: FisherKind::SldQuantum,
        entries: j,
    }
}

/// Closed-form SLD information of the linear scaling family,
/// `D^{1/2} [I + s_θ s_θᵀ / (1 − |s_θ|²)] D^{1/2}` with `D^{1/2} = diag(s)`.
pub fn scaling_qfi_closed_form(theta: &ParamPoint, state: &QubitState) -> Result<FisherMatrix> {
    quantum::LinearScaling.validate(theta)?;
    let t = theta.as_slice();
    let s = state.bloch();
    let out = Vector3::new(t[0] * s[0], t[1] * s[1], t[2] * s[2]);
    let gap = 1.0 - out.norm_squared();
    if gap <= SUPPORT_TOL {
        return Err(Error::SingularState(
            "output Bloch vector has unit length".into(),
        ));
    }
    let root = DMatrix::from_diagonal(&DVector::from_column_slice(s.as_slice()));
    let o = DVector::from_column_slice(out.as_slice());
    let inner = DMatrix::identity(3, 3) + &o * o.transpose() / gap;
    Ok(FisherMatrix {
        kind: FisherKind::SldQuantum,
        entries: &root * inner * &root,
    })
}

/// Schur-complement information for a block of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFisherResult {
    pub interest: Vec<usize>,
    /// `J^{II} = (J_II − J_IN J_NN⁺ J_NI)⁺`.
    pub partial_inverse: DMatrix<f64>,
    /// `(J_II)⁺`, the bound if the nuisance parameters were known.
    pub known_nuisance_inverse: DMatrix<f64>,
    /// True when `J_NN` was singular and its pseudo-inverse was used.
    pub nuisance_pseudo_inverse: bool,
}

/// Partial Fisher information of the `interest` indices, treating the rest
/// as nuisance parameters.
pub fn partial_fisher(j: &FisherMatrix, interest: &[usize]) -> Result<PartialFisherResult> {
    let n = j.n();
    if interest.is_empty() || interest.iter().any(|&i| i >= n) {
        return Err(Error::InvalidArgument(format!(
            "interest indices {interest:?} invalid for n = {n}"
        )));
    }
    let mut sorted = interest.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != interest.len() {
        return Err(Error::InvalidArgument("duplicate interest index".into()));
    }
    let nuisance: Vec<usize> = (0..n).filter(|i| !interest.contains(i)).collect();
    let m = j.entries();
    let j_ii = linalg::select(m, interest, interest);
    let known_nuisance_inverse = linalg::pseudo_inverse_sym(&j_ii, linalg::DEFAULT_PINV_TOL);
    if nuisance.is_empty() {
        return Ok(PartialFisherResult {
            interest: interest.to_vec(),
            partial_inverse: known_nuisance_inverse.clone(),
            known_nuisance_inverse,
            nuisance_pseudo_inverse: false,
        });
    }
    let j_in = linalg::select(m, interest, &nuisance);
    let j_nn = linalg::select(m, &nuisance, &nuisance);
    let rank = linalg::numerical_rank(&j_nn, linalg::DEFAULT_PINV_TOL);
    let nn_inv = linalg::pseudo_inverse_sym(&j_nn, linalg::DEFAULT_PINV_TOL);
    // the generalized Schur complement needs range(J_NI) ⊆ range(J_NN)
    let proj = linalg::range_projector(&j_nn, linalg::DEFAULT_PINV_TOL);
    let leak = (&j_in - &j_in * proj).amax();
    if leak > 1e-9 * m.amax().max(1.0) {
        return Err(Error::NuisanceSingular(format!(
            "J_IN has weight {leak:e} outside the range of J_NN"
        )));
    }
    let schur = &j_ii - &j_in * nn_inv * j_in.transpose();
    Ok(PartialFisherResult {
        interest: interest.to_vec(),
        partial_inverse: linalg::pseudo_inverse_sym(&schur, linalg::DEFAULT_PINV_TOL),
        known_nuisance_inverse,
        nuisance_pseudo_inverse: rank < nuisance.len(),
    })
}

/// Moore-Penrose inverse; eigenvalues below `tol · λ_max` are inverted as zero.
pub fn pseudo_inverse(j: &FisherMatrix, tol: f64) -> DMatrix<f64> {
    linalg::pseudo_inverse_sym(j.entries(), tol)
}

/// Projective measurement onto the SLD eigenbasis of a one-parameter family.
///
/// Eigenvectors are ordered by ascending eigenvalue with the first nonzero
/// component made real and positive. A degenerate SLD yields the computational
/// basis.
pub fn optimal_pvm_single_param(
    family: &dyn ChannelFamily,
    state: &QubitState,
    theta: &ParamPoint,
) -> Result<Povm> {
    if family.n_params() != 1 {
        return Err(Error::InvalidArgument(format!(
            "`{}` has {} parameters; a single-parameter family is required",
            family.name(),
            family.n_params()
        )));
    }
    let scores = sld_operators(family, state, theta)?;
    let l = &scores.operators[0];
    let (vals, vecs) = hermitian_eigen(l);
    if (vals[1] - vals[0]).abs() <= 1e-12 * vals[1].abs().max(1.0) {
        return Povm::from_basis(&Operator::identity());
    }
    let mut basis = vecs;
    for k in 0..2 {
        let mut col = basis.column(k).into_owned();
        let lead = if col[0].norm() > 1e-12 { col[0] } else { col[1] };
        let phase = lead.conj() / lead.norm();
        col *= phase;
        basis.set_column(k, &col);
    }
    Povm::from_basis(&basis)
}
