//! Symmetric eigendecomposition helpers: sorted spectra, matrix square roots,
//! and the ridge policy shared by the canonical solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative ridge levels, as multiples of the block's mean diagonal.
pub const RIDGE_LEVELS: [f64; 3] = [1e-8, 1e-6, 1e-4];

/// Absolute floor below which a ridged block is declared singular.
pub const SINGULAR_FLOOR: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    /// Column `i` pairs with `values[i]`.
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen_desc(m: &DMatrix<f64>) -> SortedEigen {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    // total_cmp keeps the order deterministic even with NaN present
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SortedEigen { values, vectors }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let d = DVector::from_iterator(m.nrows(), eig.eigenvalues.iter().map(|&x| f(x)));
    let mut out = v * DMatrix::from_diagonal(&d) * v.transpose();
    symmetrize(&mut out);
    out
}

/// Principal square root; negative eigenvalues are floored at zero.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(m, |x| x.max(0.0).sqrt())
}

/// Inverse principal square root. Caller guarantees positive definiteness.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(m, |x| 1.0 / x.max(0.0).sqrt())
}

pub fn sym_inv(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(m, |x| 1.0 / x)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Largest absolute asymmetry `|m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Flip the sign so the largest-magnitude entry is positive (first index wins ties).
pub fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0usize;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// A diagonal block after the ridge policy has been applied.
#[derive(Debug, Clone)]
pub struct RidgedBlock {
    pub matrix: DMatrix<f64>,
    /// Smallest eigenvalue before ridging.
    pub min_eig: f64,
    /// Absolute ridge added to the diagonal (0 when none was needed).
    pub ridge: f64,
    pub ok: bool,
}

/// Add `eps * I` with `eps` escalating over [`RIDGE_LEVELS`] (scaled by the mean
/// diagonal) until the smallest eigenvalue clears `1e-8 * mean diagonal`.
pub fn ridge_block(block: &DMatrix<f64>) -> RidgedBlock {
    let n = block.nrows();
    let scale = block.trace() / n as f64;
    let min_eig = min_eigenvalue(block);
    let threshold = RIDGE_LEVELS[0] * scale;
    if scale > 0.0 && min_eig >= threshold {
        return RidgedBlock {
            matrix: block.clone(),
            min_eig,
            ridge: 0.0,
            ok: true,
        };
    }
    let mut last = block.clone();
    let mut last_ridge = 0.0;
    if scale > 0.0 && scale.is_finite() {
        for level in RIDGE_LEVELS {
            let eps = level * scale;
            let ridged = block + DMatrix::identity(n, n) * eps;
            let m = min_eigenvalue(&ridged);
            last = ridged;
            last_ridge = eps;
            if m >= threshold && m >= SINGULAR_FLOOR {
                return RidgedBlock {
                    matrix: last,
                    min_eig,
                    ridge: eps,
                    ok: true,
                };
            }
        }
    }
    let ok = min_eigenvalue(&last) >= SINGULAR_FLOOR;
    RidgedBlock {
        matrix: last,
        min_eig,
        ridge: last_ridge,
        ok,
    }
}

pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

pub(crate) fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}
