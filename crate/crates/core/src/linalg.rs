//! Dense least-squares and matrix utilities on top of `nalgebra`.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::{bail, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance below which a column is treated as linearly dependent.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// Scans columns left to right and keeps those not spanned by the columns
/// already kept (Gram–Schmidt with one re-orthogonalization pass).
///
/// A column whose residual norm falls below `tol` times its own norm is
/// dropped. All-zero columns are always dropped.
pub fn independent_columns(x: &Matrix, tol: f64) -> Vec<usize> {
    let n = x.nrows();
    let mut basis: Vec<Vector> = Vec::new();
    let mut kept = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm0 = col.norm();
        if !(norm0 > 0.0) || n == 0 {
            continue;
        }
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let r = v.norm();
        if r > tol * norm0 {
            basis.push(v / r);
            kept.push(j);
        }
    }
    kept
}

/// Selects the listed columns of `x`.
pub fn select_columns(x: &Matrix, cols: &[usize]) -> Matrix {
    Matrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

/// A (weighted) least-squares fit.
#[derive(Debug, Clone)]
pub struct LsFit {
    pub coef: Vector,
    /// Unweighted residuals `y - X b`.
    pub resid: Vector,
    /// `(X' W X)^{-1}`.
    pub bread: Matrix,
}

/// Least squares via Householder QR of `sqrt(W) X`.
///
/// Fails with [`crate::Error::Collinear`] when the design is rank deficient.
pub fn least_squares(x: &Matrix, y: &Vector, weights: Option<&[f64]>) -> Result<LsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        bail!(Dimension, "design has {n} rows but response has {}", y.len());
    }
    if n < p {
        bail!(InsufficientData, "{n} rows for {p} regressors");
    }
    let (xw, yw) = apply_weights(x, y, weights)?;
    let qr = xw.qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..p {
        if !(r[(i, i)].abs() > COLLINEAR_TOL * scale) {
            bail!(Collinear, "design column {i} is linearly dependent on earlier columns");
        }
    }
    let qty = qr.q().transpose() * &yw;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| crate::Error::Collinear("triangular solve failed".into()))?;
    let r_inv = r
        .solve_upper_triangular(&Matrix::identity(p, p))
        .ok_or_else(|| crate::Error::Collinear("triangular inverse failed".into()))?;
    let bread = &r_inv * r_inv.transpose();
    let resid = y - x * &coef;
    Ok(LsFit { coef, resid, bread })
}

/// Multi-response least squares sharing one design; returns `(B, E, (X'X)^{-1})`.
pub fn least_squares_multi(x: &Matrix, y: &Matrix) -> Result<(Matrix, Matrix, Matrix)> {
    let (n, p) = x.shape();
    if y.nrows() != n {
        bail!(Dimension, "design has {n} rows but response has {}", y.nrows());
    }
    if n < p {
        bail!(InsufficientData, "{n} rows for {p} regressors");
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..p {
        if !(r[(i, i)].abs() > COLLINEAR_TOL * scale) {
            bail!(Collinear, "design column {i} is linearly dependent on earlier columns");
        }
    }
    let qty = qr.q().transpose() * y;
    let b = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| crate::Error::Collinear("triangular solve failed".into()))?;
    let r_inv = r
        .solve_upper_triangular(&Matrix::identity(p, p))
        .ok_or_else(|| crate::Error::Collinear("triangular inverse failed".into()))?;
    let e = y - x * &b;
    Ok((b, e, &r_inv * r_inv.transpose()))
}

fn apply_weights(x: &Matrix, y: &Vector, weights: Option<&[f64]>) -> Result<(Matrix, Vector)> {
    match weights {
        None => Ok((x.clone(), y.clone())),
        Some(w) => {
            if w.len() != x.nrows() {
                bail!(Dimension, "{} weights for {} rows", w.len(), x.nrows());
            }
            if w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                bail!(Domain, "weights must be positive and finite");
            }
            let sw: Vec<f64> = w.iter().map(|v| libm::sqrt(*v)).collect();
            let mut xw = x.clone();
            for (i, s) in sw.iter().enumerate() {
                xw.row_mut(i).scale_mut(*s);
            }
            let yw = Vector::from_iterator(y.len(), y.iter().zip(&sw).map(|(a, s)| a * s));
            Ok((xw, yw))
        }
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky_lower(m: &Matrix) -> Option<Matrix> {
    Cholesky::new(m.clone()).map(|c| c.l())
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(m: &Matrix) -> Option<Matrix> {
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

/// Symmetrizes `m` and truncates negative eigenvalues at zero.
///
/// Returns the repaired matrix and whether any eigenvalue fell below
/// `-1e-12` times the spectral scale.
pub fn psd_repair(m: &Matrix) -> (Matrix, bool) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let negative = eig.eigenvalues.iter().any(|v| *v < -1e-12 * scale);
    if !negative {
        return (sym, false);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let repaired = v * Matrix::from_diagonal(&clipped) * v.transpose();
    (repaired, true)
}

/// Spectral radius of a general square matrix.
///
/// Uses a Schur decomposition capped at 10,000 iterations and falls back to
/// Gelfand's formula `||A^(2^j)||^(2^-j)` when it does not converge.
pub fn spectral_radius(m: &Matrix) -> f64 {
    if let Some(schur) = m.clone().try_schur(f64::EPSILON, 10_000) {
        return schur.complex_eigenvalues().iter().map(|z| libm::hypot(z.re, z.im)).fold(0.0, f64::max);
    }
    let mut a = m.clone();
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..12 {
        let norm = a.norm();
        if !(norm > 0.0) {
            return 0.0;
        }
        a /= norm;
        log_scale += libm::log(norm) / power;
        a = &a * &a;
        power *= 2.0;
    }
    libm::exp(log_scale + libm::log(a.norm().max(f64::MIN_POSITIVE)) / power)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_radius_matches_known_spectra() {
        let rot = Matrix::from_row_slice(2, 2, &[0.0, -0.9, 0.9, 0.0]);
        assert!((spectral_radius(&rot) - 0.9).abs() < 1e-12);
        let tri = Matrix::from_row_slice(3, 3, &[0.5, 4.0, 1.0, 0.0, -1.2, 2.0, 0.0, 0.0, 0.3]);
        assert!((spectral_radius(&tri) - 1.2).abs() < 1e-12);
        assert_eq!(spectral_radius(&Matrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn independent_columns_drops_duplicates_and_zeros() {
        let x = Matrix::from_row_slice(4, 4, &[
            1.0, 2.0, 0.0, 3.0, //
            1.0, 0.0, 0.0, 1.0, //
            1.0, 1.0, 0.0, 2.0, //
            1.0, 5.0, 0.0, 6.0,
        ]);
        // column 3 = column 0 + column 1; column 2 is zero
        assert_eq!(independent_columns(&x, COLLINEAR_TOL), [0, 1]);
    }

    #[test]
    fn least_squares_exact_fit() {
        let x = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = Vector::from_vec(alloc::vec![1.0, 3.0, 5.0, 7.0]);
        let fit = least_squares(&x, &y, None).unwrap();
        assert!((fit.coef[0] - 1.0).abs() < 1e-12);
        assert!((fit.coef[1] - 2.0).abs() < 1e-12);
        assert!(fit.resid.norm() < 1e-12);
    }

    #[test]
    fn weighted_matches_row_replication() {
        // integer weights are equivalent to duplicating rows
        let x = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 3.0]);
        let y = Vector::from_vec(alloc::vec![0.5, 1.0, 4.0]);
        let w = [1.0, 2.0, 1.0];
        let fw = least_squares(&x, &y, Some(&w)).unwrap();
        let xd = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 3.0]);
        let yd = Vector::from_vec(alloc::vec![0.5, 1.0, 1.0, 4.0]);
        let fd = least_squares(&xd, &yd, None).unwrap();
        assert!((fw.coef - fd.coef).norm() < 1e-12);
        assert!((fw.bread - fd.bread).norm() < 1e-12);
    }

    #[test]
    fn collinear_design_rejected() {
        let x = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = Vector::from_vec(alloc::vec![1.0, 2.0, 3.0]);
        assert!(matches!(least_squares(&x, &y, None), Err(crate::Error::Collinear(_))));
    }

    #[test]
    fn psd_repair_clips_negative_eigenvalue() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]); // eigenvalues 3, -1
        let (r, flagged) = psd_repair(&m);
        assert!(flagged);
        let eig = SymmetricEigen::new(r).eigenvalues;
        assert!(eig.iter().all(|v| *v > -1e-12));
        let (same, f2) = psd_repair(&Matrix::identity(2, 2));
        assert!(!f2);
        assert_eq!(same, Matrix::identity(2, 2));
    }
}
