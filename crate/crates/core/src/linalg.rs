//! Complex dense linear-algebra helpers shared by the signal-processing modules.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// One draw of CN(0, variance).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Column-major fill with i.i.d. CN(0, variance) entries.
pub fn complex_normal_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_normal(rng, variance);
        }
    }
    m
}

pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVec {
    let mut v = CVec::zeros(len);
    for i in 0..len {
        v[i] = complex_normal(rng, variance);
    }
    v
}

/// Cholesky factor of a Hermitian positive-definite matrix, surfacing failure.
pub fn cholesky(m: &CMat, what: &str) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    let not_pd = || Error::Numerical(format!("{what}: matrix is not positive definite"));
    let chol = Cholesky::new(m.clone()).ok_or_else(not_pd)?;
    // Complex square roots never fail, so a negative pivot shows up as an
    // imaginary diagonal entry instead of a `None`.
    let pivots_ok = chol
        .l_dirty()
        .diagonal()
        .iter()
        .all(|d| d.re > 0.0 && d.im.abs() <= 1e-8 * d.re);
    if pivots_ok {
        Ok(chol)
    } else {
        Err(not_pd())
    }
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn hermitian_inverse(m: &CMat, what: &str) -> Result<CMat> {
    let inv = cholesky(m, what)?.inverse();
    Ok(hermitize(&inv))
}

/// `(m + m^H) / 2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5)
}

pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Max absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitize(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigen-pairs of a Hermitian matrix sorted ascending by eigenvalue.
pub fn hermitian_eigen_sorted(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitize(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// |cos| of the angle between two complex vectors.
pub fn cosine_similarity(a: &CVec, b: &CVec) -> f64 {
    a.dotc(b).norm() / (a.norm() * b.norm())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}
