//! Vector-valued states on a uniform half-line grid `x_j = j h`.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CVec, ZERO};

/// Node-major storage: entry `c` at node `j` lives at `j * n + c`.
pub type State = Vec<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateGrid {
    pub n: usize,
    pub h: f64,
    pub nodes: usize,
}

impl StateGrid {
    /// Nodes `0, h, ..., length` (length rounded to a multiple of `h`).
    pub fn new(n: usize, h: f64, length: f64) -> Result<Self> {
        if !(h > 0.0 && length > 0.0) || n == 0 {
            return Err(Error::InvalidParameter(
                "state grid needs n >= 1, h > 0, length > 0",
            ));
        }
        Ok(Self {
            n,
            h,
            nodes: libm::round(length / h) as usize + 1,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.nodes == 0
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn length(&self) -> f64 {
        self.x(self.nodes - 1)
    }

    /// Quadrature weight: trapezoid with Gregory end corrections, exact
    /// for cubics and `O(h^4)` for smooth integrands (plain trapezoid on
    /// grids shorter than 8 nodes).
    pub fn weight(&self, j: usize) -> f64 {
        const END: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];
        let from_end = j.min(self.nodes - 1 - j);
        if self.nodes < 8 {
            return if from_end == 0 { 0.5 * self.h } else { self.h };
        }
        match END.get(from_end) {
            Some(w) => w * self.h,
            None => self.h,
        }
    }

    pub fn zeros(&self) -> State {
        alloc::vec![ZERO; self.len()]
    }

    pub fn from_fn(&self, f: impl Fn(f64) -> CVec) -> State {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.nodes {
            out.extend(f(self.x(j)).iter().copied());
        }
        out
    }

    pub fn check(&self, psi: &[Complex64]) -> Result<()> {
        if psi.len() == self.len() {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.len(),
                found: psi.len(),
            })
        }
    }

    pub fn node<'a>(&self, psi: &'a [Complex64], j: usize) -> &'a [Complex64] {
        &psi[j * self.n..(j + 1) * self.n]
    }

    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let mut acc = ZERO;
        for j in 0..self.nodes {
            let s: Complex64 = self
                .node(a, j)
                .iter()
                .zip(self.node(b, j))
                .map(|(x, y)| x.conj() * y)
                .sum();
            acc += s * self.weight(j);
        }
        acc
    }

    pub fn norm(&self, a: &[Complex64]) -> f64 {
        libm::sqrt(self.inner(a, a).re.max(0.0))
    }

    /// Euclidean length of the vector at node `j`.
    pub fn pointwise(&self, a: &[Complex64], j: usize) -> f64 {
        libm::sqrt(self.node(a, j).iter().map(|z| z.norm_sqr()).sum())
    }

    /// Grid `L^p` norm; `p = f64::INFINITY` gives the sup over nodes.
    pub fn lp_norm(&self, a: &[Complex64], p: f64) -> f64 {
        if p.is_infinite() {
            return (0..self.nodes)
                .map(|j| self.pointwise(a, j))
                .fold(0.0, f64::max);
        }
        let s: f64 = (0..self.nodes)
            .map(|j| self.weight(j) * libm::pow(self.pointwise(a, j), p))
            .sum();
        libm::pow(s, 1.0 / p)
    }
}

/// `a - b` entrywise.
pub fn difference(a: &[Complex64], b: &[Complex64]) -> State {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn gaussian_norm_matches_integral() {
        let g = StateGrid::new(1, 0.01, 20.0).unwrap();
        let psi = g.from_fn(|x| CVec::from_element(1, c(libm::exp(-x * x / 2.0), 0.0)));
        // int_0^inf e^{-x^2} dx = sqrt(pi)/2
        let expected = libm::sqrt(libm::sqrt(core::f64::consts::PI) / 2.0);
        assert!((g.norm(&psi) - expected).abs() < 1e-10);
        assert!((g.lp_norm(&psi, 2.0) - g.norm(&psi)).abs() < 1e-14);
        assert!((g.lp_norm(&psi, f64::INFINITY) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn end_corrections_are_fourth_order() {
        // int_0^1 e^x dx on coarse grids; the error should drop ~16x per halving
        let err = |h: f64| {
            let g = StateGrid::new(1, h, 1.0).unwrap();
            let f = g.from_fn(|x| CVec::from_element(1, c(libm::exp(x), 0.0)));
            let sum: f64 = (0..g.nodes).map(|j| g.weight(j) * f[j].re).sum();
            (sum - (core::f64::consts::E - 1.0)).abs()
        };
        let ratio = err(0.05) / err(0.025);
        assert!(ratio > 12.0, "ratio {ratio}");
    }
}
