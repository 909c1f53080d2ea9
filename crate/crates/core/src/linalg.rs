//! Dense kernels: symmetric eigendecomposition, Cholesky, Moore–Penrose inverse.
//!
//! Matrices are plain `nalgebra` dynamic matrices. Eigen and SVD routines are
//! delegated to `nalgebra`; the wrappers here enforce the contracts the rest of
//! the crate relies on (descending eigenvalues, relative rank cutoff, pivot
//! reporting on failed factorizations).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative cutoff for [`pseudo_inverse`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn reconstruct(&self) -> Matrix {
        let lambda = Matrix::from_diagonal(&Vector::from_column_slice(&self.values));
        &self.vectors * lambda * self.vectors.transpose()
    }
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// `max |m - mᵀ|`; infinite for non-square input.
pub fn asymmetry(m: &Matrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Structural(format!("{what} has non-finite entries")))
    }
}

pub fn sym_eigen(m: &Matrix, tol: f64) -> Result<SymEigen> {
    if !m.is_square() {
        return Err(Error::Structural(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m, "matrix")?;
    let skew = asymmetry(m);
    if skew > tol {
        return Err(Error::Structural(format!(
            "matrix is not symmetric: max |m - m^T| = {skew:e} > {tol:e}"
        )));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(SymEigen {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let eig = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Lower-triangular `L` with `L Lᵀ = m`.
///
/// Only the lower triangle of `m` is read.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Structural(format!(
            "Cholesky needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m, "matrix")?;
    let n = m.nrows();
    // Row-major working copy so the inner products run over contiguous slices.
    let mut l = vec![0.0_f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (row_i, row_j) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let dot: f64 = row_i.iter().zip(row_j).map(|(a, b)| a * b).sum();
            let s = m[(i, j)] - dot;
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(Matrix::from_row_slice(n, n, &l))
}

/// Thin SVD `m = U diag(s) Vᵀ` by one-sided Jacobi rotations on the columns.
/// Returns `(U, s, V)` with `min(rows, cols)` components, unsorted.
pub fn jacobi_svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let transposed = m.nrows() < m.ncols();
    let mut a = if transposed { m.transpose() } else { m.clone() };
    let k = a.ncols();
    let mut v = Matrix::identity(k, k);
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, p)], mat[(r, q)]);
                        mat[(r, p)] = c * x - s * y;
                        mat[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    for (j, &sj) in sigma.iter().enumerate() {
        if sj > 0.0 {
            a.column_mut(j).scale_mut(1.0 / sj);
        }
    }
    if transposed {
        (v, sigma, a)
    } else {
        (a, sigma, v)
    }
}

/// Moore–Penrose inverse; singular values below `rank_tol * σ_max` count as zero.
pub fn pseudo_inverse(m: &Matrix, rank_tol: f64) -> Result<Matrix> {
    ensure_finite(m, "matrix")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Matrix::zeros(cols, rows));
    }
    let (u, sigma, v) = jacobi_svd(m);
    let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rank_tol * sigma_max;
    let mut out = Matrix::zeros(cols, rows);
    for (k, &s) in sigma.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out.ger(1.0 / s, &v.column(k), &u.column(k), 1.0);
        }
    }
    Ok(out)
}

/// Trace of the product `a b` without forming it.
pub fn trace_of_product(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
