//! Small complex linear-algebra helpers on top of nalgebra.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `a.T * x` for a row vector stored as a column (no conjugation).
pub fn row_dot(a: &CVec, x: &CVec) -> C64 {
    a.iter().zip(x.iter()).map(|(p, q)| p * q).sum()
}

/// Row vector `a.T * M` returned as a column.
pub fn row_times(a: &CVec, m: &CMat) -> CVec {
    m.transpose() * a
}

/// Orthonormal basis of the right kernel of a full-row-rank wide matrix.
///
/// The matrix is padded with zero rows to square shape so that the SVD
/// returns the full set of right singular vectors.
pub fn right_kernel(h: &CMat, rel_tol: f64) -> Result<CMat> {
    let (m, n) = h.shape();
    if m >= n {
        return Err(Error::Dimension(format!("expected a wide matrix, got {m}x{n}")));
    }
    let mut padded = CMat::zeros(n, n);
    padded.view_mut((0, 0), (m, n)).copy_from(h);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Backend("svd without right vectors".into()))?;
    let sv = svd.singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > rel_tol * smax).count();
    if smax == 0.0 || rank < m {
        return Err(Error::RankDeficient { rank, required: m });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let mut v0 = CMat::zeros(n, n - m);
    for (c, &k) in order[m..].iter().enumerate() {
        for r in 0..n {
            v0[(r, c)] = vt[(k, r)].conj();
        }
    }
    Ok(v0)
}

/// Solves `A x = b` for Hermitian positive definite `A`.
/// Complex Cholesky takes complex square roots of the pivots, so a negative
/// pivot shows up as a non-real diagonal entry instead of a failure.
fn hpd_cholesky(a: &CMat) -> Result<Cholesky<C64, nalgebra::Dyn>> {
    let bad = || Error::Domain("matrix is not positive definite".into());
    let ch = Cholesky::new(a.clone()).ok_or_else(bad)?;
    let l = ch.l_dirty();
    for i in 0..l.nrows() {
        let p = l[(i, i)];
        if !(p.re > 0.0) || p.im.abs() > 1e-12 * p.re {
            return Err(bad());
        }
    }
    Ok(ch)
}

pub fn hpd_solve(a: &CMat, b: &CVec) -> Result<CVec> {
    Ok(hpd_cholesky(a)?.solve(b))
}

pub fn hpd_inverse(a: &CMat) -> Result<CMat> {
    Ok(hpd_cholesky(a)?.inverse())
}

/// Hermitian square root of a PSD matrix (negative eigenvalues clipped).
pub fn psd_sqrt(a: &CMat) -> CMat {
    let h = (a + a.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let d = eig.eigenvalues.map(|x| C64::from(x.max(0.0).sqrt()));
    &eig.eigenvectors * CMat::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

/// Real embedding `[Re -Im; Im Re]` of a complex matrix.
pub fn realify_matrix(a: &CMat) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let mut r = DMatrix::zeros(2 * m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            let z = a[(i, j)];
            r[(i, j)] = z.re;
            r[(i, n + j)] = -z.im;
            r[(m + i, j)] = z.im;
            r[(m + i, n + j)] = z.re;
        }
    }
    r
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMat) -> f64 {
    let h = (a + a.adjoint()) * c(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.min()
}
