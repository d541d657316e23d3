//! Small dense complex linear algebra on top of nalgebra.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::new(libm::cos(phase), libm::sin(phase))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn scaled_identity(n: usize, z: Complex64) -> CMat {
    CMat::from_diagonal_element(n, n, z)
}

pub fn frob(m: &CMat) -> f64 {
    libm::sqrt(m.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_residual(m: &CMat) -> f64 {
    frob(&(m - m.adjoint()))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::linalg::SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Operator 2-norm of a Hermitian matrix.
pub fn hermitian_norm(m: &CMat) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].norm();
    }
    let (w, _) = hermitian_eigen(m);
    w.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `U diag(f(w)) U^+` for a Hermitian eigen-decomposition.
pub fn hermitian_function(w: &[f64], u: &CMat, f: impl Fn(f64) -> Complex64) -> CMat {
    let n = w.len();
    let mut scaled = u.clone();
    for j in 0..n {
        let fj = f(w[j]);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * u.adjoint()
}

/// Singular value decomposition with singular values sorted descending.
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn svd(m: &CMat) -> Svd {
    let n = m.nrows();
    let dec = m.clone().svd(true, true);
    let u0 = dec.u.expect("u requested");
    let vt = dec.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..dec.singular_values.len()).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let mut u = CMat::zeros(n, order.len());
    let mut v = CMat::zeros(m.ncols(), order.len());
    let mut s = Vec::with_capacity(order.len());
    for (col, &i) in order.iter().enumerate() {
        u.set_column(col, &u0.column(i));
        v.set_column(col, &vt.row(i).adjoint());
        s.push(dec.singular_values[i]);
    }
    Svd { u, s, v }
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn smallest_singular_value(m: &CMat) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].norm();
    }
    svd(m).s.last().copied().unwrap_or(0.0)
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    if m.nrows() == 1 {
        let z = m[(0, 0)];
        if z.norm() == 0.0 {
            return None;
        }
        return Some(CMat::from_element(1, 1, ONE / z));
    }
    m.clone().lu().try_inverse()
}

pub fn determinant(m: &CMat) -> Complex64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    m.clone().lu().determinant()
}

/// Modified Gram-Schmidt on columns under a weighted inner product
/// `<a, b> = sum_i w_i a_i^* b_i`; drops columns that become dependent.
pub fn gram_schmidt(columns: &mut Vec<CVec>, inner: impl Fn(&CVec, &CVec) -> Complex64) {
    let mut out: Vec<CVec> = Vec::with_capacity(columns.len());
    for col in columns.drain(..) {
        let mut v = col;
        let original = libm::sqrt(inner(&v, &v).re);
        for q in &out {
            let proj = inner(q, &v);
            v -= q * proj;
        }
        let norm = libm::sqrt(inner(&v, &v).re);
        if norm > 1e-10 * original.max(f64::MIN_POSITIVE) {
            out.push(v / Complex64::new(norm, 0.0));
        }
    }
    *columns = out;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_function_rebuilds_matrix() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.5, -0.3), c(0.5, 0.3), c(-1.0, 0.0)],
        );
        let (w, u) = hermitian_eigen(&m);
        assert!(w[0] < w[1]);
        let back = hermitian_function(&w, &u, |x| c(x, 0.0));
        assert!(frob(&(back - &m)) < 1e-13);
    }

    #[test]
    fn svd_sorted_and_reconstructs() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 1.0), c(0.0, 2.0), c(3.0, 0.0), c(-1.0, 0.5)]);
        let d = svd(&m);
        assert!(d.s[0] >= d.s[1]);
        let mut sig = CMat::zeros(2, 2);
        sig[(0, 0)] = c(d.s[0], 0.0);
        sig[(1, 1)] = c(d.s[1], 0.0);
        let back = &d.u * sig * d.v.adjoint();
        assert!(frob(&(back - m)) < 1e-12);
    }
}
