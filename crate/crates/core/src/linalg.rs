//! Thin helpers over `faer` for the complex Hermitian algebra used by the
//! channel, estimation and SINR modules.

use faer::{Col, Mat, Side};
use num_complex::Complex64;
use std::io::{self, Read, Write};
use thiserror::Error;

pub type CMat = Mat<Complex64>;
pub type CVec = Col<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("eigendecomposition did not converge")]
    Eigen,
    #[error("matrix is not positive semi-definite (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    NotPsd { min_eig: f64, max_eig: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Eigenvalues below this fraction of the largest are treated as zero by
/// [`hermitian_sqrt`].
pub const SQRT_CLAMP: f64 = 1e-12;
/// Negative eigenvalues beyond this fraction of the largest reject the matrix.
pub const PSD_TOLERANCE: f64 = 1e-10;

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn trace(a: &CMat) -> Complex64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `Σ_ij A_ij conj(B_ij)`, i.e. `tr(A B^H)`.
pub fn frobenius_inner(a: &CMat, b: &CMat) -> Complex64 {
    debug_assert_eq!(a.shape(), b.shape());
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(i, j)].conj();
        }
    }
    acc
}

pub fn frobenius_norm(a: &CMat) -> f64 {
    frobenius_inner(a, a).re.sqrt()
}

pub fn scaled(a: &CMat, s: f64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

/// Largest `|A_ij - conj(A_ji)|`.
pub fn max_asymmetry(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j.min(a.nrows().saturating_sub(1)) {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max(a[(i, j)].norm());
        }
    }
    worst
}

/// Averages `A` with its adjoint.
pub fn hermitian_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn check_square(a: &CMat) -> Result<usize, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(a.nrows())
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(a: &CMat) -> Result<(Vec<f64>, CMat), LinalgError> {
    check_square(a)?;
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| LinalgError::Eigen)?;
    let values = evd.S().column_vector().iter().map(|x| x.re).collect();
    Ok((values, evd.U().to_owned()))
}

pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>, LinalgError> {
    check_square(a)?;
    let values = a.self_adjoint_eigenvalues(Side::Lower).map_err(|_| LinalgError::Eigen)?;
    Ok(values)
}

/// Principal square root of a Hermitian PSD matrix.
///
/// Eigenvalues below `SQRT_CLAMP · λ_max` are set to zero; anything more
/// negative than `-PSD_TOLERANCE · λ_max` is an error.
pub fn hermitian_sqrt(a: &CMat) -> Result<CMat, LinalgError> {
    let (values, vectors) = hermitian_eigen(a)?;
    let n = values.len();
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let max_eig = values.iter().cloned().fold(0.0f64, f64::max);
    let min_eig = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_TOLERANCE * max_eig.max(f64::MIN_POSITIVE) {
        return Err(LinalgError::NotPsd { min_eig, max_eig });
    }
    let roots: Vec<f64> = values
        .iter()
        .map(|&v| if v <= SQRT_CLAMP * max_eig { 0.0 } else { v.sqrt() })
        .collect();
    let scaled_vectors = Mat::from_fn(n, n, |i, j| vectors[(i, j)] * roots[j]);
    Ok(&scaled_vectors * vectors.adjoint())
}

/// Smallest eigenvalue relative to the largest one (PSD diagnostics).
pub fn min_eigen_ratio(a: &CMat) -> Result<f64, LinalgError> {
    let values = hermitian_eigenvalues(a)?;
    let max_eig = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_eig = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(min_eig / max_eig.abs().max(f64::MIN_POSITIVE))
}

pub fn mat_vec(a: &CMat, x: &CVec) -> CVec {
    a * x
}

/// `x^H y`.
pub fn inner(x: &CVec, y: &CVec) -> Complex64 {
    debug_assert_eq!(x.nrows(), y.nrows());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..x.nrows() {
        acc += x[i].conj() * y[i];
    }
    acc
}

pub fn norm_sqr(x: &CVec) -> f64 {
    (0..x.nrows()).map(|i| x[i].norm_sqr()).sum()
}

/// Writes `a` as `rows: u64, cols: u64` followed by column-major
/// `(re, im)` little-endian f64 pairs.
pub fn write_column_major<W: Write>(mut w: W, a: &CMat) -> io::Result<()> {
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let z = a[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_column_major<R: Read>(mut r: R) -> io::Result<CMat> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut out = zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            let im = f64::from_le_bytes(word);
            out[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod test {
    use super::*;

    fn sample_hermitian() -> CMat {
        let b = Mat::from_fn(4, 4, |i, j| Complex64::new((i + 2 * j) as f64 * 0.3 - 1.0, (i as f64 - j as f64) * 0.7));
        &b * b.adjoint()
    }

    #[test]
    fn trace_product_matches_explicit_product() {
        let a = sample_hermitian();
        let b = Mat::from_fn(4, 4, |i, j| Complex64::new(i as f64 - 0.5 * j as f64, 0.25 * (i * j) as f64));
        let explicit = trace(&(&a * &b));
        assert!((trace_product(&a, &b) - explicit).norm() < 1e-10);
        let explicit_h = trace(&(&a * b.adjoint()));
        assert!((frobenius_inner(&a, &b) - explicit_h).norm() < 1e-10);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = sample_hermitian();
        let s = hermitian_sqrt(&a).unwrap();
        let back = &s * &s;
        assert!(frobenius_norm(&sub(&back, &a)) < 1e-9 * frobenius_norm(&a));
        assert!(max_asymmetry(&s) < 1e-10);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let mut a = identity(3);
        a[(2, 2)] = Complex64::new(-0.5, 0.0);
        assert!(matches!(hermitian_sqrt(&a), Err(LinalgError::NotPsd { .. })));
    }

    #[test]
    fn sqrt_of_rank_one_is_rank_one() {
        let v = Mat::from_fn(3, 1, |i, _| Complex64::new(1.0 + i as f64, -(i as f64)));
        let a = &v * v.adjoint();
        let s = hermitian_sqrt(&a).unwrap();
        let vals = hermitian_eigenvalues(&s).unwrap();
        assert!(vals[0].abs() < 1e-7 && vals[1].abs() < 1e-7);
    }

    #[test]
    fn dump_round_trip() {
        let a = sample_hermitian();
        let mut buf = Vec::new();
        write_column_major(&mut buf, &a).unwrap();
        assert_eq!(buf.len(), 16 + 16 * 16);
        // first payload entry is a[(0, 0)]
        let re = f64::from_le_bytes(buf[16..24].try_into().unwrap());
        assert_eq!(re, a[(0, 0)].re);
        let back = read_column_major(&buf[..]).unwrap();
        assert_eq!(back, a);
    }
}
