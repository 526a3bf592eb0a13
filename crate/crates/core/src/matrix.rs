//! Dense complex matrix kernel.
//!
//! Everything here targets small matrices (dimension 2 to a few dozen): Pauli and
//! Clifford generators, Floquet operators, and overlap matrices between
//! neighbouring eigenframes. Storage and the underlying Schur, SVD and Hermitian
//! eigensolvers come from `nalgebra`; this module adds the unitary-specific
//! conventions (eigenphase ordering, canonical eigenvector phases, polar factors)
//! the rest of the crate relies on.

use std::f64::consts::PI;

use nalgebra::linalg::{Schur, SymmetricEigen, SVD};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{HolonomyError, Result};

pub type C64 = Complex64;

/// Dense complex matrix. Comparisons are always tolerance based, see [`max_abs_diff`].
pub type CMatrix = DMatrix<C64>;

/// Unitarity tolerance used when callers do not pass one.
pub const DEFAULT_UNITARY_TOL: f64 = 1e-10;
/// Hermiticity tolerance used when callers do not pass one.
pub const DEFAULT_HERMITIAN_TOL: f64 = 1e-10;
/// Below this smallest singular value an overlap is treated as singular.
pub const DEFAULT_SINGULAR_THRESHOLD: f64 = 1e-12;

const SOLVER_EPS: f64 = 1e-15;
const SOLVER_MAX_ITER: usize = 10_000;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{i phi}`.
#[inline]
pub fn cis(phi: f64) -> C64 {
    C64::from_polar(1.0, phi)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Builds a matrix from row-major entries.
pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols, "entry count does not match shape");
    CMatrix::from_row_slice(rows, cols, entries)
}

pub fn diag(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_column_slice(values))
}

/// Pauli matrix `sigma_i`, `i` in 1..=3.
pub fn pauli(i: usize) -> CMatrix {
    match i {
        1 => from_rows(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => from_rows(2, 2, &[ZERO, -I, I, ZERO]),
        3 => from_rows(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("Pauli index must be 1, 2 or 3, got {i}"),
    }
}

/// Assembles a matrix from a 2x2 grid of equally sized square blocks.
pub fn block2x2(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut out = zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, n), (n, n)).copy_from(b);
    out.view_mut((n, 0), (n, n)).copy_from(c);
    out.view_mut((n, n), (n, n)).copy_from(d);
    out
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in frobenius_distance");
    (a - b).norm()
}

/// `max |u^dagger u - I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    max_abs_diff(&(u.adjoint() * u), &identity(u.nrows()))
}

/// `max |h - h^dagger|`.
pub fn hermiticity_defect(h: &CMatrix) -> f64 {
    if !h.is_square() {
        return f64::INFINITY;
    }
    max_abs_diff(h, &h.adjoint())
}

/// Wraps an angle into `[0, period)`.
pub fn wrap_positive(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `[-period/2, period/2)`.
pub fn wrap_centered(x: f64, period: f64) -> f64 {
    wrap_positive(x + 0.5 * period, period) - 0.5 * period
}

/// Distance between two points on a circle of circumference `period`.
pub fn circular_distance(a: f64, b: f64, period: f64) -> f64 {
    wrap_centered(a - b, period).abs()
}

/// Rotates every column so that its largest-magnitude component is real positive.
///
/// Ties in magnitude (within 1e-12 relative) resolve to the lowest row index.
pub fn canonicalize_phases(vectors: &mut CMatrix) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0usize;
        let mut best_mag = -1.0;
        for (i, z) in col.iter().enumerate() {
            let mag = z.norm();
            if mag > best_mag * (1.0 + 1e-12) {
                best = i;
                best_mag = mag;
            }
        }
        if best_mag > 0.0 {
            let phase = col[best].conj() / best_mag;
            for z in col.iter_mut() {
                *z *= phase;
            }
            col[best] = C64::new(col[best].re, 0.0);
        }
    }
}

/// Eigenvalues and orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
}

/// Spectral decomposition of a unitary matrix.
///
/// Values are unit modulus and ordered by eigenphase `-arg(value)` in `[0, 2 pi)`
/// ascending, i.e. by the quasienergy they represent for a one-period Floquet
/// operator. Inside a numerically degenerate cluster the returned columns are an
/// arbitrary orthonormal basis of the cluster subspace. Each column carries the
/// canonical phase of [`canonicalize_phases`].
pub fn eig_unitary(u: &CMatrix, tol: f64) -> Result<EigenPairs> {
    let defect = unitarity_defect(u);
    if !(defect <= tol) {
        return Err(HolonomyError::NotUnitary { defect, tol });
    }
    let n = u.nrows();
    let schur = Schur::try_new(u.clone(), SOLVER_EPS, SOLVER_MAX_ITER)
        .ok_or_else(|| HolonomyError::ConvergenceFailure("complex Schur decomposition".into()))?;
    let (q, t) = schur.unpack();

    // For a normal matrix the Schur form is diagonal and Q holds the eigenvectors.
    let raw: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let key = |z: &C64| wrap_positive(-z.arg(), 2.0 * PI);
    order.sort_by(|&a, &b| key(&raw[a]).total_cmp(&key(&raw[b])));

    let mut vectors = zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &q.column(src));
        values.push(raw[src] / raw[src].norm());
    }
    canonicalize_phases(&mut vectors);
    Ok(EigenPairs { values, vectors })
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eig_hermitian(h: &CMatrix, tol: f64) -> Result<(Vec<f64>, CMatrix)> {
    let defect = hermiticity_defect(h);
    if !(defect <= tol) {
        return Err(HolonomyError::NotHermitian { defect, tol });
    }
    let n = h.nrows();
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, SOLVER_EPS, SOLVER_MAX_ITER)
        .ok_or_else(|| HolonomyError::ConvergenceFailure("Hermitian eigensolver".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vectors = zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
        values.push(eig.eigenvalues[src]);
    }
    canonicalize_phases(&mut vectors);
    Ok((values, vectors))
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 1 && m.ncols() == 1 {
        return vec![m[(0, 0)].norm()];
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn smallest_singular_value(m: &CMatrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Unitary polar factor of a square matrix, the unitary closest to `m` in
/// Frobenius norm.
pub fn unitarize(m: &CMatrix) -> Result<CMatrix> {
    unitarize_with_threshold(m, DEFAULT_SINGULAR_THRESHOLD)
}

pub fn unitarize_with_threshold(m: &CMatrix, min_singular: f64) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(HolonomyError::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    if m.nrows() == 1 {
        let z = m[(0, 0)];
        let r = z.norm();
        if !(r > min_singular) {
            return Err(HolonomyError::SingularOverlap { sigma_min: r });
        }
        return Ok(CMatrix::from_element(1, 1, z / r));
    }
    let svd = SVD::try_new(m.clone(), true, true, SOLVER_EPS, SOLVER_MAX_ITER)
        .ok_or_else(|| HolonomyError::ConvergenceFailure("singular value decomposition".into()))?;
    let sigma_min = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(sigma_min > min_singular) {
        return Err(HolonomyError::SingularOverlap { sigma_min });
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^dagger");
    Ok(u * v_t)
}

/// `e^{-i scale h}` for Hermitian `h`, computed from the spectral decomposition of `h`.
pub fn expm_antihermitian_generator(h: &CMatrix, scale: f64) -> Result<CMatrix> {
    let (values, vectors) = eig_hermitian(h, DEFAULT_HERMITIAN_TOL)?;
    let phases: Vec<C64> = values.iter().map(|&w| cis(-scale * w)).collect();
    Ok(&vectors * diag(&phases) * vectors.adjoint())
}

/// Principal logarithm of a unitary, `log u = X diag(i phi) X^dagger` with `phi` in `(-pi, pi]`.
pub fn log_unitary(u: &CMatrix) -> Result<CMatrix> {
    let eig = eig_unitary(u, 1e-8)?;
    let logs: Vec<C64> = eig.values.iter().map(|z| I * z.arg()).collect();
    Ok(&eig.vectors * diag(&logs) * eig.vectors.adjoint())
}

/// Hermitian part `(m + m^dagger)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Copies the square sub-block addressed by `rows` x `cols`.
pub fn submatrix(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Keeps only the diagonal blocks addressed by `blocks`, zeroing everything else.
pub fn block_diagonal_part(m: &CMatrix, blocks: &[Vec<usize>]) -> CMatrix {
    let mut out = zeros(m.nrows(), m.ncols());
    for block in blocks {
        for &i in block {
            for &j in block {
                out[(i, j)] = m[(i, j)];
            }
        }
    }
    out
}

/// Reorders the columns of `m` so that output column `j` is input column `perm[j]`.
pub fn permute_columns(m: &CMatrix, perm: &[usize]) -> CMatrix {
    CMatrix::from_fn(m.nrows(), perm.len(), |i, j| m[(i, perm[j])])
}
