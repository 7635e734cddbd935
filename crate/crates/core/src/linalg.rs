//! Small dense complex kernels on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative singular-value threshold used for every inversion.
pub const PINV_TOL: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `e^{j theta}`
pub fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

pub fn frob2(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frob(a: &CMat) -> f64 {
    frob2(a).sqrt()
}

pub fn trace_re(a: &CMat) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

pub fn diag_from(d: &[Complex64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(d))
}

pub fn real_diag(d: &[f64]) -> CMat {
    CMat::from_fn(d.len(), d.len(), |i, j| if i == j { c(d[i], 0.0) } else { c(0.0, 0.0) })
}

/// Largest deviation of `a` from its conjugate transpose.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cn_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = cn(rng);
        }
    }
    m
}

/// SVD pseudo-inverse. Returns the inverse and the numerical rank.
pub fn pinv(a: &CMat, rel_tol: f64) -> (CMat, usize) {
    let (r, cdim) = a.shape();
    if r == 0 || cdim == 0 {
        return (CMat::zeros(cdim, r), 0);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thresh = rel_tol * smax;
    let mut out = CMat::zeros(cdim, r);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > thresh && s > 0.0 {
            rank += 1;
            let inv = 1.0 / s;
            for i in 0..cdim {
                let vik = v_t[(k, i)].conj() * inv;
                for j in 0..r {
                    out[(i, j)] += vik * u[(j, k)].conj();
                }
            }
        }
    }
    (out, rank)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().cloned().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn numerical_rank(a: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(a);
    let smax = s.first().cloned().unwrap_or(0.0);
    s.iter().filter(|&&v| v > rel_tol * smax && v > 0.0).count()
}

/// Inverse of a square matrix under the uniform singularity policy.
pub fn inverse(a: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "inverse of {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let (inv, rank) = pinv(a, PINV_TOL);
    if rank < a.nrows() {
        return Err(Error::Singular);
    }
    Ok(inv)
}

/// `log2 |det a|` through an LU factorization.
pub fn log2_abs_det(a: &CMat) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch("determinant of non-square".into()));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..u.nrows() {
        let m = u[(i, i)].norm();
        if m == 0.0 || !m.is_finite() {
            return Err(Error::Singular);
        }
        acc += m.log2();
    }
    Ok(acc)
}

/// Columns orthonormalized by a thin QR.
pub fn orthonormal_columns(a: &CMat) -> CMat {
    a.clone().qr().q()
}

/// Project every entry onto the circle of radius `scale`.
pub fn phase_project(a: &CMat, scale: f64) -> CMat {
    a.map(|z| if z.norm() > 0.0 { cis(z.arg()) * scale } else { c(scale, 0.0) })
}

pub fn check_shape(a: &CMat, rows: usize, cols: usize, what: &str) -> Result<()> {
    if a.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected {rows}x{cols}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}
