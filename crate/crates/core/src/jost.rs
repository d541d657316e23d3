//! Jost solutions, the Jost matrix and the scattering matrix.
//!
//! `f(k, x)` is integrated backward from `x_max`, where it equals
//! `e^{ikx} I`, using the exact solution operator of each cell. On a cell with
//! constant `V_c` and `W = k^2 - V_c` the step of length `-h` is
//!
//! ```text
//! f(x - h)  = cos(h sqrt W) f - h sinc(h sqrt W) f'
//! f'(x - h) = h W sinc(h sqrt W) f + cos(h sqrt W) f'
//! ```
//!
//! `W` is Hermitian with real spectrum for every admissible `k` (real or
//! positive imaginary), so the matrix functions are evaluated on its
//! eigenvalues, switching to `cosh`/`sinh` where they are negative.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::bc::{self, BoundaryPair};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::par;
use crate::potential::{PotentialGrid, EPS_HERMITIAN};

/// Unitarity / symmetry tolerance of scattering tables.
pub const EPS_S: f64 = 1e-8;

/// Accepts real `k` and `k = i kappa` with `kappa > 0`.
pub fn check_branch(k: Complex64) -> Result<()> {
    if k.im == 0.0 || (k.re == 0.0 && k.im > 0.0) {
        Ok(())
    } else {
        Err(Error::BranchError)
    }
}

/// `(cos z, h sinc z, h w sinc z)` with `z = h sqrt(w)`.
fn cell_functions(w: f64, h: f64) -> (f64, f64, f64) {
    let z2 = w * h * h;
    if z2.abs() < 1e-6 {
        let cos = 1.0 - z2 / 2.0 + z2 * z2 / 24.0;
        let sinc = 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
        return (cos, h * sinc, h * w * sinc);
    }
    if w > 0.0 {
        let s = libm::sqrt(w);
        let z = h * s;
        (libm::cos(z), libm::sin(z) / s, s * libm::sin(z))
    } else {
        let s = libm::sqrt(-w);
        let z = h * s;
        (libm::cosh(z), libm::sinh(z) / s, -s * libm::sinh(z))
    }
}

#[derive(Debug, Clone)]
enum Cell {
    Zero,
    Same,
    Matrix { v: Vec<f64>, u: CMat },
}

enum Step {
    Scalar(f64, f64, f64),
    Matrix(CMat, CMat, CMat),
}

impl Step {
    fn apply(&self, f: &CMat, fp: &CMat) -> (CMat, CMat) {
        match self {
            Step::Scalar(cs, l, d) => (
                f * c(*cs, 0.0) - fp * c(*l, 0.0),
                f * c(*d, 0.0) + fp * c(*cs, 0.0),
            ),
            Step::Matrix(cm, l, d) => (cm * f - l * fp, d * f + cm * fp),
        }
    }
}

/// Node values of `f` and `f'` at `x_j = j h`, `j = 0..=cells`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    pub h: f64,
    f: Vec<Complex64>,
    fp: Vec<Complex64>,
}

impl Trajectory {
    pub fn nodes(&self) -> usize {
        self.f.len() / (self.n * self.n)
    }

    fn block(data: &[Complex64], n: usize, j: usize) -> CMat {
        CMat::from_column_slice(n, n, &data[j * n * n..(j + 1) * n * n])
    }

    pub fn f(&self, j: usize) -> CMat {
        Self::block(&self.f, self.n, j)
    }

    pub fn fp(&self, j: usize) -> CMat {
        Self::block(&self.fp, self.n, j)
    }

    /// Entry `(r, s)` of `f` at node `j` without allocating.
    pub fn f_entry(&self, j: usize, r: usize, s: usize) -> Complex64 {
        self.f[j * self.n * self.n + s * self.n + r]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JostSample {
    pub k: Complex64,
    pub f0: CMat,
    pub fp0: CMat,
    pub trajectory: Option<Trajectory>,
}

/// Cell-wise eigen-decompositions of a potential, reused for every `k`.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub n: usize,
    pub h: f64,
    pub x_max: f64,
    cells: Vec<Cell>,
}

impl Propagator {
    pub fn new(pg: &PotentialGrid) -> Result<Self> {
        let mut cells = Vec::with_capacity(pg.cells());
        for (i, v) in pg.samples.iter().enumerate() {
            if linalg::hermitian_residual(v) > EPS_HERMITIAN * linalg::frob(v) {
                return Err(Error::NonHermitianCell { index: i });
            }
            let cell = if pg.cell_norms[i] == 0.0 {
                Cell::Zero
            } else if i > 0 && pg.samples[i - 1] == *v {
                Cell::Same
            } else {
                let (w, u) = linalg::hermitian_eigen(v);
                Cell::Matrix { v: w, u }
            };
            cells.push(cell);
        }
        Ok(Self {
            n: pg.n,
            h: pg.h,
            x_max: pg.x_max,
            cells,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells.len()
    }

    fn step(&self, i: usize, k2: f64, len: f64) -> Step {
        let mut i = i;
        while let Cell::Same = self.cells[i] {
            i -= 1;
        }
        match &self.cells[i] {
            Cell::Zero => {
                let (cs, l, d) = cell_functions(k2, len);
                Step::Scalar(cs, l, d)
            }
            Cell::Matrix { v, u } => {
                let fs: Vec<(f64, f64, f64)> =
                    v.iter().map(|&vi| cell_functions(k2 - vi, len)).collect();
                let func = |sel: fn(&(f64, f64, f64)) -> f64| {
                    let mut scaled = u.clone();
                    for (col, t) in fs.iter().enumerate() {
                        scaled.column_mut(col).scale_mut(sel(t));
                    }
                    &scaled * u.adjoint()
                };
                Step::Matrix(func(|t| t.0), func(|t| t.1), func(|t| t.2))
            }
            Cell::Same => unreachable!(),
        }
    }

    fn initial(&self, k: Complex64) -> (CMat, CMat) {
        let e = (linalg::I * k * self.x_max).exp();
        let n = self.n;
        (
            linalg::scaled_identity(n, e),
            linalg::scaled_identity(n, linalg::I * k * e),
        )
    }

    /// Backward propagation; keeps every node when `keep` is set.
    pub fn sample(&self, k: Complex64, keep: bool) -> Result<JostSample> {
        check_branch(k)?;
        let k2 = (k * k).re;
        let cells = self.cells();
        let (mut f, mut fp) = self.initial(k);
        let nn = self.n * self.n;
        let mut store = keep.then(|| {
            (
                alloc::vec![linalg::ZERO; (cells + 1) * nn],
                alloc::vec![linalg::ZERO; (cells + 1) * nn],
            )
        });
        let mut record = |j: usize, f: &CMat, fp: &CMat| {
            if let Some((tf, tfp)) = store.as_mut() {
                tf[j * nn..(j + 1) * nn].copy_from_slice(f.as_slice());
                tfp[j * nn..(j + 1) * nn].copy_from_slice(fp.as_slice());
            }
        };
        record(cells, &f, &fp);
        let mut cached: Option<(usize, Step)> = None;
        for i in (0..cells).rev() {
            let key = self.source_cell(i);
            if cached.as_ref().map(|(k, _)| *k) != Some(key) {
                cached = Some((key, self.step(i, k2, self.h)));
            }
            let (nf, nfp) = cached.as_ref().unwrap().1.apply(&f, &fp);
            f = nf;
            fp = nfp;
            record(i, &f, &fp);
        }
        let trajectory = store.map(|(tf, tfp)| Trajectory {
            n: self.n,
            h: self.h,
            f: tf,
            fp: tfp,
        });
        Ok(JostSample {
            k,
            f0: f,
            fp0: fp,
            trajectory,
        })
    }

    /// Zero cells all share one key; repeated cells share the key of the
    /// first cell in their run.
    fn source_cell(&self, i: usize) -> usize {
        let mut i = i;
        loop {
            match self.cells[i] {
                Cell::Same => i -= 1,
                Cell::Zero => return usize::MAX,
                Cell::Matrix { .. } => return i,
            }
        }
    }

    /// `(f(k, x), f'(k, x))` at an arbitrary `x >= 0`.
    pub fn evaluate(&self, k: Complex64, x: f64) -> Result<(CMat, CMat)> {
        check_branch(k)?;
        if x >= self.x_max {
            let e = (linalg::I * k * x).exp();
            return Ok((
                linalg::scaled_identity(self.n, e),
                linalg::scaled_identity(self.n, linalg::I * k * e),
            ));
        }
        let x = x.max(0.0);
        let k2 = (k * k).re;
        let (mut f, mut fp) = self.initial(k);
        let target = ((x / self.h) as usize).min(self.cells() - 1);
        for i in (target + 1..self.cells()).rev() {
            let (nf, nfp) = self.step(i, k2, self.h).apply(&f, &fp);
            f = nf;
            fp = nfp;
        }
        let rest = (target + 1) as f64 * self.h - x;
        Ok(self.step(target, k2, rest).apply(&f, &fp))
    }
}

pub fn propagate_jost(k: Complex64, pg: &PotentialGrid) -> Result<JostSample> {
    Propagator::new(pg)?.sample(k, true)
}

/// `J(k) = f(-k*, 0)^dag B - f'(-k*, 0)^dag A`.
///
/// For `k = i kappa` the sample itself is used. For real `k` the sample at
/// `-k` must be supplied as `conj`.
pub fn jost_matrix(js: &JostSample, conj: Option<&JostSample>, bp: &BoundaryPair) -> Result<CMat> {
    let src = if js.k.im > 0.0 {
        js
    } else {
        match conj {
            Some(s) if (s.k + js.k.conj()).norm() <= 1e-14 * js.k.norm().max(1.0) => s,
            _ => return Err(Error::MissingConjugateSample),
        }
    };
    Ok(src.f0.adjoint() * &bp.b - src.fp0.adjoint() * &bp.a)
}

impl Propagator {
    /// `J(k)` with whatever propagation it needs.
    pub fn jost(&self, k: Complex64, bp: &BoundaryPair) -> Result<CMat> {
        check_branch(k)?;
        let src = self.sample(-k.conj(), false)?;
        Ok(src.f0.adjoint() * &bp.b - src.fp0.adjoint() * &bp.a)
    }
}

/// Symmetric half-offset grid `k_j = (j - m + 1/2) dk`, `j = 0..2m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KGrid {
    pub m: usize,
    pub dk: f64,
}

impl KGrid {
    /// `m = round(k_max / dk)` positive nodes.
    pub fn new(k_max: f64, dk: f64) -> Result<Self> {
        if !(k_max > 0.0 && dk > 0.0 && dk <= k_max) {
            return Err(Error::InvalidParameter("k grid needs 0 < dk <= k_max"));
        }
        Ok(Self {
            m: libm::round(k_max / dk).max(1.0) as usize,
            dk,
        })
    }

    /// Grid for Fourier transforms with `y` spacing `h`: `k_max = pi / h` and
    /// the smallest power-of-two `m` with `dk <= pi / (4 y_total)`.
    pub fn for_transforms(h: f64, y_total: f64) -> Self {
        let need = libm::ceil(4.0 * y_total / h).max(2.0) as usize;
        let m = need.next_power_of_two();
        Self {
            m,
            dk: core::f64::consts::PI / (m as f64 * h),
        }
    }

    pub fn len(&self) -> usize {
        2 * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn k(&self, j: usize) -> f64 {
        (j as f64 - self.m as f64 + 0.5) * self.dk
    }

    pub fn k_max(&self) -> f64 {
        self.m as f64 * self.dk
    }

    /// Index of `-k_j`.
    pub fn mirror(&self, j: usize) -> usize {
        2 * self.m - 1 - j
    }

    /// Spacing of the conjugate `y` grid of a length-`2m` DFT.
    pub fn y_step(&self) -> f64 {
        core::f64::consts::PI / (self.m as f64 * self.dk)
    }
}

#[derive(Debug, Clone)]
pub struct ScatteringTable {
    pub kgrid: KGrid,
    pub j: Vec<CMat>,
    pub s: Vec<CMat>,
    pub s_inf: CMat,
    /// Jost samples `f(k_j, .)`, with trajectories when requested.
    pub samples: Vec<JostSample>,
}

impl ScatteringTable {
    pub fn compute(prop: &Propagator, bp: &BoundaryPair, kgrid: KGrid, keep: bool) -> Result<Self> {
        if bp.n != prop.n {
            return Err(Error::DimensionMismatch {
                expected: prop.n,
                found: bp.n,
            });
        }
        let nf = bc::normalize_boundary(bp)?;
        let samples = par::try_map_range(kgrid.len(), |j| prop.sample(c(kgrid.k(j), 0.0), keep))?;
        let j: Vec<CMat> = (0..kgrid.len())
            .map(|i| {
                let src = &samples[kgrid.mirror(i)];
                src.f0.adjoint() * &bp.b - src.fp0.adjoint() * &bp.a
            })
            .collect();
        let mut s = Vec::with_capacity(j.len());
        for i in 0..kgrid.len() {
            s.push(scattering_from_jost(
                &j[kgrid.mirror(i)],
                &j[i],
                kgrid.k(i),
            )?);
        }
        Ok(Self {
            kgrid,
            j,
            s,
            s_inf: bc::s_infinity(&nf),
            samples,
        })
    }

    pub fn n(&self) -> usize {
        self.s_inf.nrows()
    }

    /// `max_k |S S^dag - I|_F`.
    pub fn unitarity_residual(&self) -> f64 {
        let id = linalg::identity(self.n());
        self.s
            .iter()
            .map(|s| linalg::frob(&(s * s.adjoint() - &id)))
            .fold(0.0, f64::max)
    }

    /// `max_k |S(-k) - S(k)^dag|_F`.
    pub fn symmetry_residual(&self) -> f64 {
        (0..self.kgrid.len())
            .map(|j| linalg::frob(&(&self.s[self.kgrid.mirror(j)] - self.s[j].adjoint())))
            .fold(0.0, f64::max)
    }

    /// `Psi(k_j, x) = f(-k_j, x) + f(k_j, x) S(k_j)`.
    pub fn physical_solution(&self, prop: &Propagator, j: usize, x: f64) -> Result<CMat> {
        let k = self.kgrid.k(j);
        let at = |idx: usize, kk: f64| -> Result<CMat> {
            let sample = &self.samples[idx];
            if let Some(tr) = &sample.trajectory {
                let node = x / tr.h;
                let r = libm::round(node);
                if (node - r).abs() < 1e-9 && (r as usize) < tr.nodes() {
                    return Ok(tr.f(r as usize));
                }
            }
            Ok(prop.evaluate(c(kk, 0.0), x)?.0)
        };
        let minus = at(self.kgrid.mirror(j), -k)?;
        let plus = at(j, k)?;
        Ok(minus + plus * &self.s[j])
    }
}

/// `S(k) = -J(-k) J(k)^{-1}`.
pub fn scattering_from_jost(j_minus: &CMat, j_plus: &CMat, k: f64) -> Result<CMat> {
    let scale = linalg::frob(j_plus).max(f64::MIN_POSITIVE);
    if linalg::smallest_singular_value(j_plus) <= 1e-14 * scale {
        return Err(Error::SingularJost { k });
    }
    let inv = linalg::inverse(j_plus).ok_or(Error::SingularJost { k })?;
    Ok(-(j_minus * inv))
}

/// Largest entry of `-f'' + V f - k^2 f` at cell midpoints, with `f''`
/// from a Richardson-combined second difference that stays inside the cell.
pub fn ode_residual(sample: &JostSample, prop: &Propagator, pg: &PotentialGrid) -> Result<f64> {
    let k = sample.k;
    let k2 = (k * k).re;
    let mut worst: f64 = 0.0;
    for i in 0..prop.cells() {
        let xm = pg.midpoint(i);
        let at = |x: f64| prop.evaluate(k, x).map(|p| p.0);
        let fm = at(xm)?;
        let second = |d: f64| -> Result<CMat> {
            Ok((at(xm + d)? + at(xm - d)? - fm.clone() * c(2.0, 0.0)) / c(d * d, 0.0))
        };
        let d = 0.25 * pg.h;
        let fpp = (second(0.5 * d)? * c(4.0, 0.0) - second(d)?) / c(3.0, 0.0);
        let res = -fpp + &pg.samples[i] * &fm - fm * c(k2, 0.0);
        worst = worst.max(linalg::max_abs(&res));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Preset;

    #[test]
    fn free_jost_solution_is_plane_wave() {
        let pg = Preset::Zero { n: 2 }.build(0.1, Some(2.0)).unwrap();
        for k in [c(1.3, 0.0), c(-0.4, 0.0), c(0.0, 0.7), c(0.0, 0.0)] {
            let js = propagate_jost(k, &pg).unwrap();
            let tr = js.trajectory.unwrap();
            for j in 0..tr.nodes() {
                let e = (linalg::I * k * (j as f64 * 0.1)).exp();
                let err = linalg::max_abs(&(tr.f(j) - linalg::scaled_identity(2, e)));
                assert!(err < 1e-13, "k={k} j={j} err={err}");
            }
        }
    }

    #[test]
    fn branch_checked() {
        let pg = Preset::Zero { n: 1 }.build(0.1, Some(1.0)).unwrap();
        assert!(matches!(
            propagate_jost(c(1.0, 1.0), &pg),
            Err(Error::BranchError)
        ));
        assert!(matches!(
            propagate_jost(c(0.0, -1.0), &pg),
            Err(Error::BranchError)
        ));
    }

    #[test]
    fn boundary_data_exact_at_x_max() {
        let pg = Preset::SquareWell {
            depth: -2.0,
            width: 1.0,
        }
        .build(0.01, Some(1.5))
        .unwrap();
        let k = 1.7;
        let js = propagate_jost(c(k, 0.0), &pg).unwrap();
        let tr = js.trajectory.unwrap();
        let last = tr.nodes() - 1;
        let e = linalg::cis(k * pg.x_max);
        assert_eq!(tr.f(last)[(0, 0)], e);
        assert_eq!(tr.fp(last)[(0, 0)], linalg::I * k * e);
    }

    #[test]
    fn free_jost_matrix_and_missing_conjugate() {
        let pg = Preset::Zero { n: 1 }.build(0.1, Some(1.0)).unwrap();
        let bp = BoundaryPair::neumann(1);
        let k = 0.8;
        let plus = propagate_jost(c(k, 0.0), &pg).unwrap();
        let minus = propagate_jost(c(-k, 0.0), &pg).unwrap();
        assert!(matches!(
            jost_matrix(&plus, None, &bp),
            Err(Error::MissingConjugateSample)
        ));
        let j = jost_matrix(&plus, Some(&minus), &bp).unwrap();
        assert!((j[(0, 0)] - c(0.0, k)).norm() < 1e-13);
        let bd = BoundaryPair::mixed(1, 0.3);
        let j = jost_matrix(&plus, Some(&minus), &bd).unwrap();
        let expected = bc::free_jost(c(k, 0.0), &bd);
        assert!(linalg::max_abs(&(j - expected)) < 1e-13);
    }

    #[test]
    fn coupled_channel_table_is_unitary() {
        let pg = Preset::CoupledChannels {
            g: 0.5,
            d1: -1.0,
            d2: 0.5,
            width: 1.0,
        }
        .build(0.02, None)
        .unwrap();
        let prop = Propagator::new(&pg).unwrap();
        let bp = BoundaryPair::mixed(2, 0.9);
        let table =
            ScatteringTable::compute(&prop, &bp, KGrid::new(40.0, 0.1).unwrap(), false).unwrap();
        assert!(table.unitarity_residual() < EPS_S);
        assert!(table.symmetry_residual() < EPS_S);
    }

    #[test]
    fn ode_residual_small_for_smooth_potential() {
        let pg = Preset::ExpDecay {
            amplitude: -1.0,
            rate: 2.0,
        }
        .build(0.01, None)
        .unwrap();
        let prop = Propagator::new(&pg).unwrap();
        let js = prop.sample(c(1.1, 0.0), true).unwrap();
        assert!(ode_residual(&js, &prop, &pg).unwrap() < 1e-6);
    }
}
