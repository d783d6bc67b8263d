//! Small dense helpers on top of nalgebra: symmetric eigen-decompositions,
//! Moore-Penrose pseudo-inverses and PSD tests for the n <= 3 matrices used
//! throughout the crate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Default relative cutoff for treating an eigenvalue as zero.
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

/// Eigen-decomposition of a real symmetric matrix with eigenvalues in
/// ascending order.
pub fn sym_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = symmetrize(a);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    sym_eigen(a).0[0]
}

pub fn max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let (v, _) = sym_eigen(a);
    v[v.len() - 1]
}

/// Rebuild `V f(Λ) Vᵀ` from an eigen-decomposition.
pub fn spectral_map(
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let n = values.len();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let fk = f(values[k]);
        if fk == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        out += fk * v * v.transpose();
    }
    out
}

/// Number of eigenvalues above `tol * λ_max`.
pub fn numerical_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    let (values, _) = sym_eigen(a);
    let cutoff = cutoff(&values, tol);
    values.iter().filter(|&&v| v.abs() > cutoff).count()
}

fn cutoff(values: &DVector<f64>, tol: f64) -> f64 {
    let lmax = values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    (tol * lmax).max(f64::MIN_POSITIVE)
}

/// Moore-Penrose inverse of a symmetric matrix. Eigenvalues whose magnitude is
/// at most `tol * |λ|_max` are treated as zero.
pub fn pseudo_inverse_sym(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen(a);
    let cut = cutoff(&values, tol);
    spectral_map(&values, &vectors, |v| if v.abs() > cut { 1.0 / v } else { 0.0 })
}

/// Orthogonal projector onto the range of a symmetric matrix.
pub fn range_projector(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen(a);
    let cut = cutoff(&values, tol);
    spectral_map(&values, &vectors, |v| if v.abs() > cut { 1.0 } else { 0.0 })
}

pub fn is_psd(a: &DMatrix<f64>, tol: f64) -> bool {
    min_eigenvalue(a) >= -tol
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Sub-matrix picking the given rows and columns.
pub fn select(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}
