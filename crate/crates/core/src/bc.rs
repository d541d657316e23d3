//! Self-adjoint vertex conditions `-B^+ psi(0) + A^+ psi'(0) = 0` and the
//! zero-potential reference objects built from them.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, I};

pub const EPS_BC: f64 = 1e-10;
pub const EPS_PD: f64 = 1e-12;
pub const EPS_UNIT: f64 = 1e-10;
/// Angles closer than this to pi or pi/2 are classified as Dirichlet or Neumann.
pub const EPS_THETA: f64 = 1e-9;

/// A validated boundary pair `(A, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPair {
    pub n: usize,
    pub a: CMat,
    pub b: CMat,
    /// `||-B^+A + A^+B||_F`.
    pub self_adjoint_residual: f64,
    /// Smallest eigenvalue of `A^+A + B^+B`.
    pub min_gram_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Mixed,
    Dirichlet,
    Neumann,
}

/// Diagonal representation: in the basis given by the columns of `m` the
/// condition decouples into `cos(theta_j) c_j(0) + sin(theta_j) c_j'(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalForm {
    pub m: CMat,
    pub thetas: Vec<f64>,
    pub n_mixed: usize,
    pub n_dirichlet: usize,
    pub n_neumann: usize,
    /// Diagonal of `Z0 = diag[I, -I, I]`.
    pub z0: Vec<f64>,
}

impl NormalForm {
    pub fn kind(&self, j: usize) -> ChannelKind {
        if j < self.n_mixed {
            ChannelKind::Mixed
        } else if j < self.n_mixed + self.n_dirichlet {
            ChannelKind::Dirichlet
        } else {
            ChannelKind::Neumann
        }
    }

    pub fn unitarity_residual(&self) -> f64 {
        let n = self.m.nrows();
        linalg::frob(&(&self.m * self.m.adjoint() - linalg::identity(n)))
    }
}

pub fn validate_boundary(a: CMat, b: CMat) -> Result<BoundaryPair> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.nrows().max(b.ncols()),
        });
    }
    if n == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    let scale = {
        let fa = linalg::frob(&a);
        let fb = linalg::frob(&b);
        fa * fa + fb * fb
    };
    let gram = a.adjoint() * &a + b.adjoint() * &b;
    let (w, _) = linalg::hermitian_eigen(&gram);
    let min_gram_eigenvalue = w[0];
    if scale == 0.0 || min_gram_eigenvalue < EPS_PD * scale {
        return Err(Error::RankDeficientBC {
            min_eigenvalue: min_gram_eigenvalue,
        });
    }
    let residual = linalg::frob(&(a.adjoint() * &b - b.adjoint() * &a));
    if residual > EPS_BC * scale {
        return Err(Error::NotSelfAdjointBC { residual });
    }
    Ok(BoundaryPair {
        n,
        a,
        b,
        self_adjoint_residual: residual,
        min_gram_eigenvalue,
    })
}

impl BoundaryPair {
    /// `A = 0`, `B = I`.
    pub fn dirichlet(n: usize) -> Self {
        validate_boundary(linalg::zeros(n), linalg::identity(n)).expect("dirichlet pair")
    }

    /// `A = -I`, `B = 0`, so that the free Jost matrix is `ik I`.
    pub fn neumann(n: usize) -> Self {
        validate_boundary(-linalg::identity(n), linalg::zeros(n)).expect("neumann pair")
    }

    /// `A = -sin(theta) I`, `B = cos(theta) I`.
    pub fn mixed(n: usize, theta: f64) -> Self {
        let (s, co) = (libm::sin(theta), libm::cos(theta));
        validate_boundary(
            linalg::scaled_identity(n, c(-s, 0.0)),
            linalg::scaled_identity(n, c(co, 0.0)),
        )
        .expect("mixed pair")
    }

    /// `A = M diag(-sin) T`, `B = M diag(cos) T` for unitary `M` and invertible `T`.
    pub fn from_normal_form(m: &CMat, thetas: &[f64], t: &CMat) -> Result<Self> {
        let n = thetas.len();
        let mut at = CMat::zeros(n, n);
        let mut bt = CMat::zeros(n, n);
        for (j, &th) in thetas.iter().enumerate() {
            at[(j, j)] = c(-libm::sin(th), 0.0);
            bt[(j, j)] = c(libm::cos(th), 0.0);
        }
        validate_boundary(m * at * t, m * bt * t)
    }

    /// Residual of `-B^+ psi(0) + A^+ psi'(0)` for a vector or matrix solution.
    pub fn condition_residual(&self, psi0: &CMat, dpsi0: &CMat) -> CMat {
        -self.b.adjoint() * psi0 + self.a.adjoint() * dpsi0
    }
}

/// `J_0(k) = B - ikA`.
pub fn free_jost(k: Complex64, bp: &BoundaryPair) -> CMat {
    &bp.b - bp.a.map(|z| z * I * k)
}

/// `S_0(k) = -(B + ikA)(B - ikA)^{-1}`.
pub fn free_scattering(k: f64, bp: &BoundaryPair) -> Result<CMat> {
    let ik = c(0.0, k);
    let plus = &bp.b + bp.a.map(|z| z * ik);
    let minus = &bp.b - bp.a.map(|z| z * ik);
    let scale = linalg::frob(&minus).max(f64::MIN_POSITIVE);
    if linalg::smallest_singular_value(&minus) <= 1e-14 * scale {
        return Err(Error::SingularFreeJost);
    }
    let inv = linalg::inverse(&minus).ok_or(Error::SingularFreeJost)?;
    Ok(-(plus * inv))
}

/// `S_inf = M Z0 M^+`.
pub fn s_infinity(nf: &NormalForm) -> CMat {
    let n = nf.z0.len();
    let mut z = CMat::zeros(n, n);
    for (j, &s) in nf.z0.iter().enumerate() {
        z[(j, j)] = c(s, 0.0);
    }
    &nf.m * z * nf.m.adjoint()
}

/// Angle in `(0, pi]` with `lambda = -exp(-2 i theta)`.
fn theta_from_eigenvalue(lambda: Complex64) -> f64 {
    let mut theta = -(-lambda).arg() / 2.0;
    while theta <= EPS_THETA {
        theta += PI;
    }
    while theta > PI + EPS_THETA {
        theta -= PI;
    }
    if (theta - PI).abs() < EPS_THETA {
        PI
    } else if (theta - FRAC_PI_2).abs() < EPS_THETA {
        FRAC_PI_2
    } else {
        theta
    }
}

/// Diagonalises `S_hat = -(B + iA)(B - iA)^{-1} = S_0(1)`.
pub fn normalize_boundary(bp: &BoundaryPair) -> Result<NormalForm> {
    let n = bp.n;
    let s_hat = free_scattering(1.0, bp)?;
    let (lambdas, vectors) = unitary_eigen(&s_hat);

    // Principal argument first, entries of the (phase-fixed) eigenvector as tie-break.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| {
        let (ap, aq) = (lambdas[p].arg(), lambdas[q].arg());
        if (ap - aq).abs() > 1e-9 {
            return ap.total_cmp(&aq);
        }
        for r in 0..n {
            let (x, y) = (vectors[(r, p)], vectors[(r, q)]);
            let ord = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
            if ord != core::cmp::Ordering::Equal && (x - y).norm() > 1e-12 {
                return ord;
            }
        }
        core::cmp::Ordering::Equal
    });

    let classify = |th: f64| {
        if th == PI {
            ChannelKind::Dirichlet
        } else if th == FRAC_PI_2 {
            ChannelKind::Neumann
        } else {
            ChannelKind::Mixed
        }
    };
    let mut m = CMat::zeros(n, n);
    let mut thetas = Vec::with_capacity(n);
    let mut z0 = Vec::with_capacity(n);
    let mut counts = [0usize; 3];
    let mut col = 0;
    for (slot, kind) in [
        ChannelKind::Mixed,
        ChannelKind::Dirichlet,
        ChannelKind::Neumann,
    ]
    .into_iter()
    .enumerate()
    {
        for &j in &order {
            let th = theta_from_eigenvalue(lambdas[j]);
            if classify(th) != kind {
                continue;
            }
            m.set_column(col, &vectors.column(j));
            thetas.push(th);
            z0.push(if kind == ChannelKind::Dirichlet {
                -1.0
            } else {
                1.0
            });
            counts[slot] += 1;
            col += 1;
        }
    }
    let nf = NormalForm {
        m,
        thetas,
        n_mixed: counts[0],
        n_dirichlet: counts[1],
        n_neumann: counts[2],
        z0,
    };
    debug_assert!(nf.unitarity_residual() <= EPS_UNIT * n as f64 * 10.0);
    Ok(nf)
}

/// Eigen-decomposition of a unitary (hence normal) matrix with orthonormal
/// eigenvectors, via the complex Schur form (diagonal for normal matrices).
fn unitary_eigen(u: &CMat) -> (Vec<Complex64>, CMat) {
    let n = u.nrows();
    if n == 1 {
        return (alloc::vec![u[(0, 0)]], linalg::identity(1));
    }
    let schur = nalgebra::linalg::Schur::new(u.clone());
    let (mut vectors, _) = schur.unpack();
    // Fix the phase of every column: largest entry real and positive.
    for j in 0..n {
        let mut best = 0;
        for r in 0..n {
            if vectors[(r, j)].norm() > vectors[(best, j)].norm() + 1e-12 {
                best = r;
            }
        }
        let ph = vectors[(best, j)];
        let ph = ph / ph.norm();
        for r in 0..n {
            vectors[(r, j)] /= ph;
        }
    }
    let diag = vectors.adjoint() * u * &vectors;
    let lambdas = (0..n).map(|j| diag[(j, j)]).collect();
    (lambdas, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn scalar(a: f64, b: f64) -> BoundaryPair {
        validate_boundary(
            CMat::from_element(1, 1, c(a, 0.0)),
            CMat::from_element(1, 1, c(b, 0.0)),
        )
        .unwrap()
    }

    #[test]
    fn scalar_dirichlet_is_valid() {
        let bp = scalar(0.0, 1.0);
        assert_eq!(bp.n, 1);
        let nf = normalize_boundary(&bp).unwrap();
        assert_eq!(nf.thetas, alloc::vec![PI]);
        assert_eq!((nf.n_mixed, nf.n_dirichlet, nf.n_neumann), (0, 1, 0));
    }

    #[test]
    fn zero_pair_is_rank_deficient() {
        let r = validate_boundary(linalg::zeros(2), linalg::zeros(2));
        assert!(matches!(r, Err(Error::RankDeficientBC { .. })));
    }

    #[test]
    fn non_self_adjoint_pair_rejected() {
        let r = validate_boundary(
            CMat::from_element(1, 1, ONE),
            CMat::from_element(1, 1, c(0.0, 1.0)),
        );
        assert!(matches!(r, Err(Error::NotSelfAdjointBC { .. })));
    }

    #[test]
    fn dimension_mismatch() {
        let r = validate_boundary(linalg::zeros(2), linalg::identity(3));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn delta_pair_is_valid() {
        // A = [[0, I], [0, I]], B = [[-I, L], [I, 0]] with L Hermitian.
        let n = 2;
        let lam = CMat::from_row_slice(
            2,
            2,
            &[c(0.3, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(-1.0, 0.0)],
        );
        let mut a = linalg::zeros(2 * n);
        let mut b = linalg::zeros(2 * n);
        for i in 0..n {
            a[(i, n + i)] = ONE;
            a[(n + i, n + i)] = ONE;
            b[(i, i)] = -ONE;
            b[(n + i, i)] = ONE;
        }
        b.view_mut((0, n), (n, n)).copy_from(&lam);
        assert!(validate_boundary(a, b).is_ok());
    }

    #[test]
    fn scalar_normal_forms() {
        assert_eq!(
            normalize_boundary(&scalar(1.0, 0.0)).unwrap().thetas[0],
            FRAC_PI_2
        );
        let q = core::f64::consts::FRAC_PI_4;
        let nf = normalize_boundary(&scalar(-libm::sin(q), libm::cos(q))).unwrap();
        assert!((nf.thetas[0] - q).abs() < 1e-14);
        assert!((nf.m[(0, 0)] - ONE).norm() < 1e-14);
        assert_eq!(nf.n_mixed, 1);
    }

    #[test]
    fn free_jost_examples() {
        let k = c(0.7, 0.0);
        assert_eq!(free_jost(k, &BoundaryPair::dirichlet(1))[(0, 0)], ONE);
        let jn = free_jost(k, &BoundaryPair::neumann(1))[(0, 0)];
        assert!((jn - c(0.0, 0.7)).norm() < 1e-15);
        let th = 0.4;
        let jm = free_jost(k, &BoundaryPair::mixed(1, th))[(0, 0)];
        assert!((jm - c(libm::cos(th), 0.7 * libm::sin(th))).norm() < 1e-15);
    }

    #[test]
    fn free_scattering_examples() {
        for &k in &[-3.0, 0.2, 5.0] {
            assert!(
                (free_scattering(k, &BoundaryPair::dirichlet(1)).unwrap()[(0, 0)] + ONE).norm()
                    < 1e-15
            );
            assert!(
                (free_scattering(k, &BoundaryPair::neumann(1)).unwrap()[(0, 0)] - ONE).norm()
                    < 1e-15
            );
            let th = 1.1;
            let (s, co) = (libm::sin(th), libm::cos(th));
            let want = c(-co, k * s) / c(co, k * s);
            let got = free_scattering(k, &BoundaryPair::mixed(1, th)).unwrap()[(0, 0)];
            assert!((got - want).norm() < 1e-14);
        }
    }

    #[test]
    fn s_infinity_examples() {
        let sd = s_infinity(&normalize_boundary(&BoundaryPair::dirichlet(1)).unwrap());
        assert!((sd[(0, 0)] + ONE).norm() < 1e-14);
        let sn = s_infinity(&normalize_boundary(&BoundaryPair::neumann(1)).unwrap());
        assert!((sn[(0, 0)] - ONE).norm() < 1e-14);
        let sm = s_infinity(&normalize_boundary(&BoundaryPair::mixed(1, 0.3)).unwrap());
        assert!((sm[(0, 0)] - ONE).norm() < 1e-14);
    }

    #[test]
    fn ordering_mixed_dirichlet_neumann() {
        let mut a = linalg::zeros(3);
        let mut b = linalg::zeros(3);
        // channel 0 Neumann, channel 1 Dirichlet, channel 2 mixed
        a[(0, 0)] = -ONE;
        b[(1, 1)] = ONE;
        a[(2, 2)] = c(-libm::sin(0.3), 0.0);
        b[(2, 2)] = c(libm::cos(0.3), 0.0);
        let nf = normalize_boundary(&validate_boundary(a, b).unwrap()).unwrap();
        assert_eq!((nf.n_mixed, nf.n_dirichlet, nf.n_neumann), (1, 1, 1));
        assert!((nf.thetas[0] - 0.3).abs() < 1e-12);
        assert_eq!(nf.thetas[1], PI);
        assert_eq!(nf.thetas[2], FRAC_PI_2);
        assert_eq!(nf.z0, alloc::vec![1.0, -1.0, 1.0]);
        assert!(nf.unitarity_residual() < 1e-12);
    }
}
