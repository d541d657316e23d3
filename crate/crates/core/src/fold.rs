//! Folding a problem on the whole line with a vertex at `x = 0` into a
//! half-line problem with twice as many channels.
//!
//! A line state `v` becomes `(v(x), v(-x))` for `x >= 0`. The potential
//! becomes `diag(Q(x), Q(-x))` and the transmission condition at the vertex
//! is carried by a `2n x 2n` boundary pair.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::bc::{validate_boundary, BoundaryPair};
use crate::error::{Error, Result};
use crate::evolve::{
    evolve_kernel, evolve_spectral, evolve_stepper, KernelTables, Method, SpectralTables,
    StepperSettings,
};
use crate::jost::{Propagator, ScatteringTable};
use crate::kernels::{kernel_kgrid, KernelSettings};
use crate::linalg::{self, c, CMat, ZERO};
use crate::potential::{PotentialGrid, EPS_HERMITIAN};
use crate::spectrum::find_bound_states;
use crate::state::{State, StateGrid};

#[derive(Debug, Clone)]
pub struct LineProblem {
    pub n: usize,
    pub h: f64,
    /// `Q` on `[i h, (i+1) h)`.
    pub right: Vec<CMat>,
    /// `Q` on `[-(i+1) h, -i h)`.
    pub left: Vec<CMat>,
    /// Folded pair; rows `0..n` form `(A_1, B_1)`, rows `n..2n` form `(A_2, B_2)`.
    pub boundary: BoundaryPair,
    pub coupling: Option<CMat>,
}

impl LineProblem {
    /// `cells` holds `Q` on `2m` cells covering `[-m h, m h)` from left to right.
    pub fn new(n: usize, h: f64, cells: Vec<CMat>, boundary: BoundaryPair) -> Result<Self> {
        if cells.is_empty() || !cells.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(
                "line grid needs an even, nonzero number of cells",
            ));
        }
        if boundary.n != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                found: boundary.n,
            });
        }
        let m = cells.len() / 2;
        let right = cells[m..].to_vec();
        let left = cells[..m].iter().rev().cloned().collect();
        let lp = Self {
            n,
            h,
            right,
            left,
            boundary,
            coupling: None,
        };
        // the folded grid runs the same checks as any half-line potential
        fold_potential(&lp)?;
        Ok(lp)
    }

    /// Samples `q` at cell midpoints of `[-x_max, x_max)`.
    pub fn from_fn(
        n: usize,
        h: f64,
        x_max: f64,
        boundary: BoundaryPair,
        q: impl Fn(f64) -> CMat,
    ) -> Result<Self> {
        if !(h > 0.0 && x_max >= h) {
            return Err(Error::InvalidParameter("line grid needs 0 < h <= x_max"));
        }
        let m = libm::ceil(x_max / h - 1e-9) as usize;
        let cells = (0..2 * m)
            .map(|i| q((i as f64 - m as f64 + 0.5) * h))
            .collect();
        Self::new(n, h, cells, boundary)
    }

    /// Line with a point interaction of strength `lambda` at the origin.
    pub fn delta(
        n: usize,
        h: f64,
        x_max: f64,
        lambda: &CMat,
        q: impl Fn(f64) -> CMat,
    ) -> Result<Self> {
        let mut lp = Self::from_fn(n, h, x_max, delta_boundary(lambda)?, q)?;
        lp.coupling = Some(lambda.clone());
        Ok(lp)
    }

    pub fn x_max(&self) -> f64 {
        self.h * self.right.len() as f64
    }

    /// `Q(x)` with the cell convention of the half-line grids.
    pub fn q(&self, x: f64) -> CMat {
        let (side, s) = if x >= 0.0 {
            (&self.right, x)
        } else {
            (&self.left, -x)
        };
        let i = libm::floor(s / self.h) as usize;
        side.get(i)
            .cloned()
            .unwrap_or_else(|| linalg::zeros(self.n))
    }
}

fn fold_potential(lp: &LineProblem) -> Result<PotentialGrid> {
    let n = lp.n;
    let samples = lp
        .right
        .iter()
        .zip(&lp.left)
        .map(|(r, l)| {
            let mut v = linalg::zeros(2 * n);
            v.view_mut((0, 0), (n, n)).copy_from(r);
            v.view_mut((n, n), (n, n)).copy_from(l);
            v
        })
        .collect();
    PotentialGrid::new(2 * n, lp.h, samples)
}

/// The half-line problem `(diag(Q(x), Q(-x)), (A, B))`.
pub fn fold_to_halfline(lp: &LineProblem) -> Result<(PotentialGrid, BoundaryPair)> {
    let pg = fold_potential(lp)?;
    let bp = validate_boundary(lp.boundary.a.clone(), lp.boundary.b.clone())?;
    Ok((pg, bp))
}

/// `A = [[0, I], [0, I]]`, `B = [[-I, lambda], [I, 0]]`: continuity at the
/// origin and `v'(0+) - v'(0-) = lambda v(0)`.
pub fn delta_boundary(lambda: &CMat) -> Result<BoundaryPair> {
    let n = lambda.nrows();
    if lambda.ncols() != n || n == 0 {
        return Err(Error::NotHermitianCoupling);
    }
    if linalg::hermitian_residual(lambda) > EPS_HERMITIAN * linalg::frob(lambda).max(1.0) {
        return Err(Error::NotHermitianCoupling);
    }
    let id = linalg::identity(n);
    let mut a = linalg::zeros(2 * n);
    let mut b = linalg::zeros(2 * n);
    a.view_mut((0, n), (n, n)).copy_from(&id);
    a.view_mut((n, n), (n, n)).copy_from(&id);
    b.view_mut((0, 0), (n, n)).copy_from(&(-&id));
    b.view_mut((0, n), (n, n)).copy_from(lambda);
    b.view_mut((n, 0), (n, n)).copy_from(&id);
    validate_boundary(a, b)
}

/// A line state on the nodes `x = +-j h`, with both one-sided values at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LineState {
    /// Half-grid with `n` channels shared by both sides.
    pub grid: StateGrid,
    /// `v(j h)`, node-major.
    pub plus: State,
    /// `v(-j h)`; node 0 is `v(0-)`.
    pub minus: State,
}

impl LineState {
    pub fn from_fn(grid: StateGrid, v: impl Fn(f64) -> linalg::CVec) -> Self {
        let plus = grid.from_fn(&v);
        let minus = grid.from_fn(|x| v(-x));
        Self { grid, plus, minus }
    }

    pub fn norm(&self) -> f64 {
        libm::hypot(self.grid.norm(&self.plus), self.grid.norm(&self.minus))
    }

    /// Value at `x = side * j h`, `side = +-1`.
    pub fn at(&self, j: usize, side: i8) -> &[Complex64] {
        let src = if side >= 0 { &self.plus } else { &self.minus };
        self.grid.node(src, j)
    }
}

/// `U^dag`: the `2n`-channel half-line state `(v(x), v(-x))`.
pub fn fold_state(v: &LineState) -> Result<(StateGrid, State)> {
    let g = v.grid;
    g.check(&v.plus)?;
    g.check(&v.minus)?;
    let folded = StateGrid::new(2 * g.n, g.h, g.length())?;
    let mut out = Vec::with_capacity(2 * v.plus.len());
    for j in 0..g.nodes {
        out.extend_from_slice(g.node(&v.plus, j));
        out.extend_from_slice(g.node(&v.minus, j));
    }
    Ok((folded, out))
}

/// `U`: inverse of [`fold_state`].
pub fn unfold_state(grid: &StateGrid, psi: &[Complex64]) -> Result<LineState> {
    grid.check(psi)?;
    if !grid.n.is_multiple_of(2) {
        return Err(Error::DimensionMismatch {
            expected: grid.n + 1,
            found: grid.n,
        });
    }
    let n = grid.n / 2;
    let line = StateGrid::new(n, grid.h, grid.length())?;
    let mut plus = Vec::with_capacity(psi.len() / 2);
    let mut minus = Vec::with_capacity(psi.len() / 2);
    for j in 0..grid.nodes {
        let node = grid.node(psi, j);
        plus.extend_from_slice(&node[..n]);
        minus.extend_from_slice(&node[n..]);
    }
    Ok(LineState {
        grid: line,
        plus,
        minus,
    })
}

/// `|v(0+) - v(0-)|` and `|v'(0+) - v'(0-) - lambda v(0)|` (one-sided
/// fourth-order differences), meaningful for delta couplings.
pub fn transmission_residual(v: &LineState, lambda: &CMat) -> (f64, f64) {
    let g = v.grid;
    let n = g.n;
    let d = |src: &State, ch: usize| {
        let f = |j: usize| src[j * n + ch];
        (f(0) * -25.0 + f(1) * 48.0 - f(2) * 36.0 + f(3) * 16.0 - f(4) * 3.0) / (12.0 * g.h)
    };
    let mut jump = 0.0f64;
    let mut kink = 0.0f64;
    for ch in 0..n {
        jump = jump.max((v.plus[ch] - v.minus[ch]).norm());
        // outward derivative on the left is -v'(0-)
        let dv = d(&v.plus, ch) + d(&v.minus, ch);
        let lv: Complex64 = (0..n)
            .map(|k| lambda[(ch, k)] * v.plus[k])
            .fold(ZERO, |a, b| a + b);
        kink = kink.max((dv - lv).norm());
    }
    (jump, kink)
}

#[derive(Debug, Clone, Copy)]
pub struct LineSettings {
    pub method: Method,
    /// Spectral route resolution.
    pub k_max: f64,
    pub dk: f64,
    /// Bound-state search window.
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub stepper: StepperSettings,
}

impl Default for LineSettings {
    fn default() -> Self {
        Self {
            method: Method::Spectral,
            k_max: 9.0,
            dk: 0.015,
            kappa_min: 1e-3,
            kappa_max: 6.0,
            stepper: StepperSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LineEvolution {
    pub t: f64,
    /// Full `e^{-itH} v`, bound part included.
    pub v: LineState,
    pub bound_count: usize,
    pub norm_drift: f64,
}

/// Fold, evolve the continuous part with the chosen route, add the bound
/// part with its phases, unfold.
pub fn evolve_line(
    lp: &LineProblem,
    v: &LineState,
    t: f64,
    settings: &LineSettings,
) -> Result<LineEvolution> {
    let (pg, bp) = fold_to_halfline(lp)?;
    let (grid, psi) = fold_state(v)?;
    let prop = Propagator::new(&pg)?;
    let bound = find_bound_states(&prop, &bp, settings.kappa_min, settings.kappa_max, &grid)?;
    let cont = match settings.method {
        Method::Spectral => {
            let tables = SpectralTables::new(&prop, &bp, settings.k_max, settings.dk)?;
            evolve_spectral(&psi, t, &tables, &bound, &bp)?
        }
        Method::Kernel => {
            let ks = KernelSettings::default();
            let table =
                ScatteringTable::compute(&prop, &bp, kernel_kgrid(pg.h, pg.x_max, &ks), true)?;
            let tables = KernelTables::new(&table, &pg, &ks)?;
            evolve_kernel(&psi, t, &tables, &bound, &bp)?
        }
        Method::Stepper => {
            if t < 0.0 {
                return Err(Error::InvalidParameter(
                    "the stepper runs forward in time only",
                ));
            }
            evolve_stepper(&psi, t, &pg, &bp, &bound, &settings.stepper)?
        }
    };
    let mut u = cont.u;
    for (kappa, e) in bound.eigenfunctions() {
        // H e = -kappa^2 e
        let coeff = grid.inner(e, &psi) * linalg::cis(kappa * kappa * t);
        for (o, ei) in u.iter_mut().zip(e) {
            *o += coeff * ei;
        }
    }
    let before = grid.norm(&psi);
    let norm_drift = if before > 0.0 {
        (grid.norm(&u) - before) / before
    } else {
        0.0
    };
    Ok(LineEvolution {
        t,
        v: unfold_state(&grid, &u)?,
        bound_count: bound.count(),
        norm_drift,
    })
}

/// Scalar helper: `lambda` as a `1 x 1` coupling.
pub fn scalar_coupling(lambda: f64) -> CMat {
    CMat::from_element(1, 1, c(lambda, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jost::{jost_matrix, scattering_from_jost};
    use crate::linalg::CVec;

    fn scattering(pg: &PotentialGrid, bp: &BoundaryPair, k: f64) -> CMat {
        let prop = Propagator::new(pg).unwrap();
        let plus = prop.sample(c(k, 0.0), false).unwrap();
        let minus = prop.sample(c(-k, 0.0), false).unwrap();
        let jp = jost_matrix(&plus, Some(&minus), bp).unwrap();
        let jm = jost_matrix(&minus, Some(&plus), bp).unwrap();
        scattering_from_jost(&jm, &jp, k).unwrap()
    }

    #[test]
    fn delta_pair_encodes_continuity_and_jump() {
        let lambda = CMat::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.5, -0.2), c(0.5, 0.2), c(-0.3, 0.0)],
        );
        let bp = delta_boundary(&lambda).unwrap();
        assert!(bp.self_adjoint_residual < 1e-14);
        // v(0+) = v(0-) = w, v'(0+) = p, v'(0-) = p - lambda w
        let w = CVec::from_vec(alloc::vec![c(0.3, 1.0), c(-2.0, 0.1)]);
        let p = CVec::from_vec(alloc::vec![c(0.7, 0.0), c(0.0, 1.5)]);
        let mut psi0 = CVec::zeros(4);
        let mut dpsi0 = CVec::zeros(4);
        psi0.rows_mut(0, 2).copy_from(&w);
        psi0.rows_mut(2, 2).copy_from(&w);
        dpsi0.rows_mut(0, 2).copy_from(&p);
        dpsi0.rows_mut(2, 2).copy_from(&(-(&p - &lambda * &w)));
        let r = bp.condition_residual(&CMat::from_columns(&[psi0]), &CMat::from_columns(&[dpsi0]));
        assert!(linalg::frob(&r) < 1e-14);
        let bad = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.4, 0.0), c(0.0, 0.0)]);
        assert_eq!(
            delta_boundary(&bad).unwrap_err(),
            Error::NotHermitianCoupling
        );
    }

    #[test]
    fn folding_is_a_permutation() {
        let grid = StateGrid::new(2, 0.1, 5.0).unwrap();
        let v = LineState::from_fn(grid, |x| {
            CVec::from_vec(alloc::vec![c(x, 1.0), c(libm::exp(-x * x), x * x)])
        });
        let (fg, psi) = fold_state(&v).unwrap();
        assert_eq!(fg.n, 4);
        let back = unfold_state(&fg, &psi).unwrap();
        assert_eq!(back, v);
        assert!((fg.norm(&psi) - v.norm()).abs() < 1e-14);
    }

    #[test]
    fn delta_scattering_matches_matching_conditions() {
        for lambda in [1.3, -0.8] {
            let lp =
                LineProblem::delta(1, 0.05, 1.0, &scalar_coupling(lambda), |_| linalg::zeros(1))
                    .unwrap();
            let (pg, bp) = fold_to_halfline(&lp).unwrap();
            for k in [0.5, 1.0, 2.0] {
                let s = scattering(&pg, &bp, k);
                // incidence from the right: e^{-ikx} + r e^{ikx}, transmitted t e^{-ikx}
                let den = c(-lambda, 2.0 * k);
                let r = c(lambda, 0.0) / den;
                let t = c(0.0, 2.0 * k) / den;
                let err = (s[(0, 0)] - r).norm() + (s[(1, 0)] - t).norm() + (s[(1, 1)] - r).norm();
                assert!(err < 1e-10, "{lambda} {k} {err}");
            }
        }
    }

    #[test]
    fn attractive_delta_binds_at_half_coupling() {
        let kappa0 = 0.7;
        let lp = LineProblem::delta(1, 0.05, 1.0, &scalar_coupling(-2.0 * kappa0), |_| {
            linalg::zeros(1)
        })
        .unwrap();
        let (pg, bp) = fold_to_halfline(&lp).unwrap();
        let prop = Propagator::new(&pg).unwrap();
        let grid = StateGrid::new(2, 0.05, 20.0).unwrap();
        let bound = find_bound_states(&prop, &bp, 1e-3, 5.0, &grid).unwrap();
        assert_eq!(bound.count(), 1);
        assert!(
            (bound.states[0].kappa - kappa0).abs() < 1e-9,
            "{}",
            bound.states[0].kappa
        );
    }
}
