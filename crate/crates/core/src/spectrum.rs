//! Bound states, the continuous-spectrum projector and zero-energy data.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::bc::BoundaryPair;
use crate::error::{Error, Result};
use crate::jost::Propagator;
use crate::linalg::{self, c, CMat, CVec};
use crate::par;
use crate::state::{State, StateGrid};

pub const SCAN_PER_DECADE: usize = 400;
pub const EPS_RANK: f64 = 1e-6;
/// Accept a refined minimum when `s_min <= ROOT_ACCEPT * max(1, |J|)`.
pub const ROOT_ACCEPT: f64 = 1e-8;
/// Singular values below this fraction of `max(1, |J|)` count toward the multiplicity.
pub const MULTIPLICITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct BoundState {
    pub kappa: f64,
    pub multiplicity: usize,
    /// Orthonormal basis of `null(J(i kappa)^dag)`; `f(i kappa, x) v` then
    /// satisfies the boundary condition.
    pub directions: Vec<CVec>,
    pub eigenfunctions: Vec<State>,
}

impl BoundState {
    pub fn energy(&self) -> f64 {
        -self.kappa * self.kappa
    }
}

#[derive(Debug, Clone)]
pub struct BoundStateSet {
    pub grid: StateGrid,
    pub states: Vec<BoundState>,
}

impl BoundStateSet {
    pub fn empty(grid: StateGrid) -> Self {
        Self {
            grid,
            states: Vec::new(),
        }
    }

    pub fn count(&self) -> usize {
        self.states.iter().map(|b| b.multiplicity).sum()
    }

    pub fn eigenfunctions(&self) -> impl Iterator<Item = (f64, &State)> {
        self.states
            .iter()
            .flat_map(|b| b.eigenfunctions.iter().map(move |e| (b.kappa, e)))
    }
}

fn scaled_smin(prop: &Propagator, bp: &BoundaryPair, kappa: f64) -> Result<(f64, CMat)> {
    let j = prop.jost(c(0.0, kappa), bp)?;
    let scale = linalg::frob(&j).max(1.0);
    Ok((linalg::smallest_singular_value(&j) / scale, j))
}

/// Bound states with `kappa` in `[kappa_min, kappa_max]`, eigenfunctions sampled on `grid`.
pub fn find_bound_states(
    prop: &Propagator,
    bp: &BoundaryPair,
    kappa_min: f64,
    kappa_max: f64,
    grid: &StateGrid,
) -> Result<BoundStateSet> {
    if !(kappa_min > 0.0 && kappa_max > kappa_min) {
        return Err(Error::InvalidParameter("need 0 < kappa_min < kappa_max"));
    }
    if bp.n != prop.n || grid.n != prop.n {
        return Err(Error::DimensionMismatch {
            expected: prop.n,
            found: bp.n.max(grid.n),
        });
    }
    if (grid.h - prop.h).abs() > 1e-12 * prop.h || grid.nodes < prop.cells() + 1 {
        return Err(Error::GridMismatch {
            expected: prop.cells() + 1,
            found: grid.nodes,
        });
    }
    let decades = libm::log10(kappa_max / kappa_min);
    let points = (libm::ceil(decades * SCAN_PER_DECADE as f64) as usize).max(3) + 1;
    let step = decades / (points - 1) as f64;
    let kappas: Vec<f64> = (0..points)
        .map(|i| kappa_min * libm::pow(10.0, i as f64 * step))
        .collect();
    let values = par::try_map_range(points, |i| scaled_smin(prop, bp, kappas[i]).map(|p| p.0))?;

    let mut roots: Vec<f64> = Vec::new();
    for i in 0..points {
        let left = if i == 0 { f64::INFINITY } else { values[i - 1] };
        let right = if i + 1 == points {
            f64::INFINITY
        } else {
            values[i + 1]
        };
        if !(values[i] <= left && values[i] < right) {
            continue;
        }
        let lo = kappas[i.saturating_sub(1)];
        let hi = kappas[(i + 1).min(points - 1)];
        let (kappa, smin) = golden_min(
            |k| {
                scaled_smin(prop, bp, k)
                    .map(|p| p.0)
                    .unwrap_or(f64::INFINITY)
            },
            lo,
            hi,
        );
        if smin <= ROOT_ACCEPT {
            if let Some(prev) = roots.last() {
                if (kappa - prev).abs() <= 1e-8 * kappa {
                    return Err(Error::ClusterTooDense { kappa });
                }
            }
            roots.push(kappa);
        }
    }

    let mut states = Vec::with_capacity(roots.len());
    for kappa in roots {
        let (_, j) = scaled_smin(prop, bp, kappa)?;
        let scale = linalg::frob(&j).max(1.0);
        let dec = linalg::svd(&j);
        let directions: Vec<CVec> = dec
            .s
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= MULTIPLICITY_TOL * scale)
            .map(|(col, _)| dec.u.column(col).into_owned())
            .collect();
        let sample = prop.sample(c(0.0, kappa), true)?;
        let tr = sample.trajectory.as_ref().expect("trajectory requested");
        let mut funcs: Vec<CVec> = directions
            .iter()
            .map(|v| {
                let mut out = CVec::zeros(grid.len());
                for node in 0..grid.nodes {
                    let val = if node < tr.nodes() {
                        tr.f(node) * v
                    } else {
                        v * c(libm::exp(-kappa * grid.x(node)), 0.0)
                    };
                    out.rows_mut(node * grid.n, grid.n).copy_from(&val);
                }
                out
            })
            .collect();
        linalg::gram_schmidt(&mut funcs, |a, b| grid.inner(a.as_slice(), b.as_slice()));
        let eigenfunctions: Vec<State> = funcs.into_iter().map(|v| v.as_slice().to_vec()).collect();
        states.push(BoundState {
            kappa,
            multiplicity: eigenfunctions.len(),
            directions,
            eigenfunctions,
        });
    }
    Ok(BoundStateSet {
        grid: *grid,
        states,
    })
}

/// Golden-section minimisation on `[lo, hi]`, returning `(argmin, min)`.
fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let r = 0.5 * (libm::sqrt(5.0) - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-14 * b {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `P_c psi = psi - sum <psi_jr, psi> psi_jr`.
pub fn project_continuous(psi: &[Complex64], bs: &BoundStateSet) -> Result<State> {
    bs.grid.check(psi)?;
    let mut out = psi.to_vec();
    for (_, e) in bs.eigenfunctions() {
        let coeff = bs.grid.inner(e, psi);
        for (o, ei) in out.iter_mut().zip(e) {
            *o -= coeff * ei;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroEnergyClass {
    Generic,
    Exceptional,
}

#[derive(Debug, Clone)]
pub struct ZeroEnergyData {
    pub classification: ZeroEnergyClass,
    pub rank_defect: usize,
    pub j0: CMat,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// Orthogonal projector onto `null(J(0))`.
    pub p0: CMat,
    /// `D(k)` on `0 < |k| <= k_small`.
    pub dtable: Vec<(f64, CMat)>,
    /// Richardson estimate of `lim_{k -> 0+} D(k)`.
    pub d_limit: CMat,
    pub min_det: f64,
}

impl ZeroEnergyData {
    pub fn d_limit_det(&self) -> f64 {
        linalg::determinant(&self.d_limit).norm()
    }
}

/// `D(k) = (I - P0 + P0 / (ik)) J(k)^dag`.
pub fn d_matrix(prop: &Propagator, bp: &BoundaryPair, p0: &CMat, k: f64) -> Result<CMat> {
    let n = p0.nrows();
    let j = prop.jost(c(k, 0.0), bp)?;
    let left = linalg::identity(n) - p0 + p0 * (Complex64::new(1.0, 0.0) / c(0.0, k));
    Ok(left * j.adjoint())
}

pub fn classify_zero_energy(
    prop: &Propagator,
    bp: &BoundaryPair,
    k_small: f64,
    samples: usize,
) -> Result<ZeroEnergyData> {
    let n = bp.n;
    let j0 = prop.jost(c(0.0, 0.0), bp)?;
    let scale = linalg::frob(&j0)
        .max(linalg::frob(&bp.a))
        .max(linalg::frob(&bp.b));
    let threshold = EPS_RANK * scale;
    let dec = linalg::svd(&j0);
    for &s in &dec.s {
        if s > 0.1 * threshold && s < 10.0 * threshold {
            return Err(Error::RankAmbiguous {
                s_min: s,
                threshold,
            });
        }
    }
    let mut p0 = linalg::zeros(n);
    let mut rank_defect = 0;
    for (col, &s) in dec.s.iter().enumerate() {
        if s <= threshold {
            let v = dec.v.column(col);
            p0 += v * v.adjoint();
            rank_defect += 1;
        }
    }
    let classification = if rank_defect == 0 {
        ZeroEnergyClass::Generic
    } else {
        ZeroEnergyClass::Exceptional
    };

    let samples = samples.max(2);
    let ks: Vec<f64> = (1..=samples)
        .flat_map(|i| {
            let k = k_small * i as f64 / samples as f64;
            [-k, k]
        })
        .collect();
    let dtable: Vec<(f64, CMat)> = par::try_map_range(ks.len(), |i| {
        d_matrix(prop, bp, &p0, ks[i]).map(|d| (ks[i], d))
    })?;
    let min_det = dtable
        .iter()
        .map(|(_, d)| linalg::determinant(d).norm())
        .fold(f64::INFINITY, f64::min);

    // second-order Richardson from k, k/2, k/4
    let k1 = k_small / samples as f64;
    let d1 = d_matrix(prop, bp, &p0, k1)?;
    let d2 = d_matrix(prop, bp, &p0, 0.5 * k1)?;
    let d4 = d_matrix(prop, bp, &p0, 0.25 * k1)?;
    let d_limit = (d4 * c(8.0, 0.0) - d2 * c(6.0, 0.0) + d1) / c(3.0, 0.0);

    Ok(ZeroEnergyData {
        classification,
        rank_defect,
        j0,
        singular_values: dec.s,
        threshold,
        p0,
        dtable,
        d_limit,
        min_det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Preset;
    use core::f64::consts::PI;

    fn free(n: usize) -> Propagator {
        Propagator::new(&Preset::Zero { n }.build(0.02, Some(2.0)).unwrap()).unwrap()
    }

    #[test]
    fn free_dirichlet_has_no_bound_states() {
        let prop = free(1);
        let grid = StateGrid::new(1, 0.02, 10.0).unwrap();
        let bs = find_bound_states(&prop, &BoundaryPair::dirichlet(1), 1e-3, 10.0, &grid).unwrap();
        assert_eq!(bs.count(), 0);
        let psi = grid.from_fn(|x| CVec::from_element(1, c(libm::exp(-x), 0.0)));
        assert_eq!(project_continuous(&psi, &bs).unwrap(), psi);
    }

    #[test]
    fn free_mixed_quarter_pi_bound_state() {
        let prop = free(1);
        let grid = StateGrid::new(1, 0.02, 30.0).unwrap();
        let bp = BoundaryPair::mixed(1, PI / 4.0);
        let bs = find_bound_states(&prop, &bp, 1e-3, 10.0, &grid).unwrap();
        assert_eq!(bs.states.len(), 1);
        assert!((bs.states[0].kappa - 1.0).abs() < 1e-9);
        let e = &bs.states[0].eigenfunctions[0];
        assert!((grid.norm(e) - 1.0).abs() < 1e-12);
        let proj = project_continuous(e, &bs).unwrap();
        assert!(grid.norm(&proj) < 1e-8);
        let psi = grid.from_fn(|x| CVec::from_element(1, c(x * libm::exp(-x), 0.3)));
        let pc = project_continuous(&psi, &bs).unwrap();
        assert!(grid.inner(e, &pc).norm() < 1e-12);
        let twice = project_continuous(&pc, &bs).unwrap();
        let drift: f64 = twice.iter().zip(&pc).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!(libm::sqrt(drift) < 1e-9 * grid.norm(&psi).max(1.0));
    }

    #[test]
    fn projector_rejects_wrong_grid() {
        let grid = StateGrid::new(1, 0.02, 4.0).unwrap();
        let bs = BoundStateSet::empty(grid);
        assert!(matches!(
            project_continuous(&[c(1.0, 0.0)], &bs),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn zero_energy_free_cases() {
        let prop = free(1);
        let dir = classify_zero_energy(&prop, &BoundaryPair::dirichlet(1), 0.1, 10).unwrap();
        assert_eq!(dir.classification, ZeroEnergyClass::Generic);
        assert!(linalg::max_abs(&dir.p0) == 0.0);
        let neu = classify_zero_energy(&prop, &BoundaryPair::neumann(1), 0.1, 10).unwrap();
        assert_eq!(neu.classification, ZeroEnergyClass::Exceptional);
        assert_eq!(neu.rank_defect, 1);
        assert!((neu.p0[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        // J(k) = ik, so D(k) = (1/ik)(-ik) = -1
        for (_, d) in &neu.dtable {
            assert!((d[(0, 0)] + c(1.0, 0.0)).norm() < 1e-10);
        }
        assert!((neu.d_limit_det() - 1.0).abs() < 1e-10);
    }
}
