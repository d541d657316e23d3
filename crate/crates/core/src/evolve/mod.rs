//! Time evolution `e^{-itH} P_c` by three independent routes: quadrature of
//! the spectral representation, the kernel route built from `K` and `F_s`,
//! and a Crank-Nicolson stepper on the truncated grid.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::bc::BoundaryPair;
use crate::error::{Error, Result};
use crate::fft;
use crate::fresnel;
use crate::jost::{jost_matrix, scattering_from_jost, Propagator, ScatteringTable};
use crate::kernels::{self, fs_transform, transformation_kernel, FsTable, KernelK, KernelSettings};
use crate::linalg::{self, c, CMat, CVec, ZERO};
use crate::par;
use crate::potential::PotentialGrid;
use crate::quad::piecewise_weights;
use crate::spectrum::{project_continuous, BoundStateSet};
use crate::state::{State, StateGrid};

mod stepper;
pub use stepper::{evolve_stepper, StepperSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Spectral,
    Kernel,
    Stepper,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::Kernel => "kernel",
            Method::Stepper => "stepper",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub t: f64,
    pub grid: StateGrid,
    pub u: State,
    pub method: Method,
    /// `||u(t)|| / ||P_c psi|| - 1`.
    pub norm_drift: f64,
    /// See [`boundary_residual`].
    pub boundary_residual: f64,
}

/// `|-B^+ u(0) + A^+ u'(0)|` relative to `|B| |u|_inf + |A| |u'|_inf`, with a
/// one-sided fourth-order derivative at `x = 0`.
pub fn boundary_residual(grid: &StateGrid, u: &[Complex64], bp: &BoundaryPair) -> f64 {
    let n = grid.n;
    if grid.nodes < 5 {
        return 0.0;
    }
    let node = |j: usize| CVec::from_column_slice(grid.node(u, j));
    let deriv = |j: usize| {
        const W: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
        let mut d = CVec::zeros(n);
        for (m, w) in W.iter().enumerate() {
            d += node(j + m) * c(*w / (12.0 * grid.h), 0.0);
        }
        d
    };
    let r = -bp.b.adjoint() * node(0) + bp.a.adjoint() * deriv(0);
    let sup_u = grid.lp_norm(u, f64::INFINITY);
    // derivative scale from centred differences over the grid
    let mut sup_du: f64 = deriv(0).norm();
    for j in 1..grid.nodes - 1 {
        let d = (node(j + 1) - node(j - 1)).norm() / (2.0 * grid.h);
        sup_du = sup_du.max(d);
    }
    let scale = linalg::op_norm(&bp.b) * sup_u + linalg::op_norm(&bp.a) * sup_du;
    if scale > 0.0 {
        r.norm() / scale
    } else {
        r.norm()
    }
}

/// Physical solutions `Psi(k, x) = f(-k, x) + f(k, x) S(k)` on the positive
/// half-offset nodes `k_j = (j + 1/2) dk`, tabulated on the potential nodes.
#[derive(Debug, Clone)]
pub struct SpectralTables {
    pub n: usize,
    pub h: f64,
    /// Nodes `0..support` lie inside the potential; beyond them
    /// `Psi = e^{-ikx} + e^{ikx} S`.
    pub support: usize,
    pub dk: f64,
    pub ks: Vec<f64>,
    pub s: Vec<CMat>,
    pub s_inf: CMat,
    psi: Vec<Complex64>,
}

impl SpectralTables {
    pub fn new(prop: &Propagator, bp: &BoundaryPair, k_max: f64, dk: f64) -> Result<Self> {
        if !(k_max > 0.0 && dk > 0.0 && dk < k_max) {
            return Err(Error::InvalidParameter(
                "spectral tables need 0 < dk < k_max",
            ));
        }
        let n = prop.n;
        let count = libm::ceil(k_max / dk) as usize;
        let ks: Vec<f64> = (0..count).map(|j| (j as f64 + 0.5) * dk).collect();
        let support = prop.cells() + 1;
        let nn = n * n;
        let rows = par::try_map_range(count, |j| -> Result<(CMat, Vec<Complex64>)> {
            let k = ks[j];
            let plus = prop.sample(c(k, 0.0), true)?;
            let minus = prop.sample(c(-k, 0.0), true)?;
            let jp = jost_matrix(&plus, Some(&minus), bp)?;
            let jm = jost_matrix(&minus, Some(&plus), bp)?;
            let s = scattering_from_jost(&jm, &jp, k)?;
            let tp = plus.trajectory.as_ref().expect("trajectory requested");
            let tm = minus.trajectory.as_ref().expect("trajectory requested");
            let mut block = Vec::with_capacity(support * nn);
            for node in 0..support {
                let psi = tm.f(node) + tp.f(node) * &s;
                block.extend_from_slice(psi.as_slice());
            }
            Ok((s, block))
        })?;
        let mut s = Vec::with_capacity(count);
        let mut psi = Vec::with_capacity(count * support * nn);
        for (sj, block) in rows {
            s.push(sj);
            psi.extend(block);
        }
        let s_inf = crate::bc::s_infinity(&crate::bc::normalize_boundary(bp)?);
        Ok(Self {
            n,
            h: prop.h,
            support,
            dk,
            ks,
            s,
            s_inf,
            psi,
        })
    }

    pub fn k_max(&self) -> f64 {
        self.ks.len() as f64 * self.dk
    }

    /// `Psi(k_j, x_node)` on the potential grid.
    pub fn psi(&self, j: usize, node: usize) -> CMat {
        if node < self.support {
            let nn = self.n * self.n;
            let at = (j * self.support + node) * nn;
            return CMat::from_column_slice(self.n, self.n, &self.psi[at..at + nn]);
        }
        let x = node as f64 * self.h;
        let e = linalg::cis(self.ks[j] * x);
        &self.s[j] * e + linalg::scaled_identity(self.n, e.conj())
    }

    fn check_grid(&self, grid: &StateGrid) -> Result<()> {
        if grid.n != self.n || (grid.h - self.h).abs() > 1e-12 * self.h {
            return Err(Error::GridMismatch {
                expected: self.n,
                found: grid.n,
            });
        }
        Ok(())
    }

    /// Midpoint `k` quadrature resolves `e^{-itk^2}` only while
    /// `|t| k_max dk <= pi / 2`.
    pub fn check_time(&self, t: f64) -> Result<()> {
        let product = t.abs() * self.k_max() * self.dk;
        if product > PI / 2.0 {
            return Err(Error::SpectralGridTooCoarse { product });
        }
        Ok(())
    }

    /// `phi(k_j) = int Psi(k_j, y)^dag psi(y) dy`.
    pub fn analyse(&self, psi: &[Complex64], grid: &StateGrid) -> Result<Vec<CVec>> {
        self.check_grid(grid)?;
        grid.check(psi)?;
        let n = self.n;
        let inside = self.support.min(grid.nodes);
        Ok(par::map_range(self.ks.len(), |j| {
            let mut phi = CVec::zeros(n);
            for node in 0..inside {
                let v = CVec::from_column_slice(grid.node(psi, node));
                phi += self.psi(j, node).adjoint() * v * c(grid.weight(node), 0.0);
            }
            // outside: e^{ikx} psi + S^dag e^{-ikx} psi
            let step = linalg::cis(self.ks[j] * self.h);
            let mut e = linalg::cis(self.ks[j] * inside as f64 * self.h);
            let mut fwd = CVec::zeros(n);
            let mut back = CVec::zeros(n);
            for node in inside..grid.nodes {
                let w = grid.weight(node);
                for (r, &z) in grid.node(psi, node).iter().enumerate() {
                    fwd[r] += e * z * w;
                    back[r] += e.conj() * z * w;
                }
                e *= step;
            }
            phi + fwd + self.s[j].adjoint() * back
        }))
    }

    /// `u(x) = (1 / 2 pi) sum_j dk Psi(k_j, x) coeff_j`.
    pub fn synthesise(&self, coeff: &[CVec], grid: &StateGrid) -> Result<State> {
        self.check_grid(grid)?;
        let n = self.n;
        let scale = c(self.dk / (2.0 * PI), 0.0);
        let reflected: Vec<CVec> = coeff.iter().zip(&self.s).map(|(a, s)| s * a).collect();
        let nodes = par::map_range(grid.nodes, |node| {
            let mut u = CVec::zeros(n);
            if node < self.support {
                for (j, a) in coeff.iter().enumerate() {
                    u += self.psi(j, node) * a;
                }
            } else {
                let x = grid.x(node);
                let step = linalg::cis(self.dk * x);
                let mut e = linalg::cis(0.5 * self.dk * x);
                for (a, sa) in coeff.iter().zip(&reflected) {
                    u += a * e.conj() + sa * e;
                    e *= step;
                }
            }
            u * scale
        });
        let mut out = Vec::with_capacity(grid.len());
        for v in nodes {
            out.extend(v.iter().copied());
        }
        Ok(out)
    }

    /// `T(x, y) = int_0^inf Psi(k, x) e^{-itk^2} Psi(k, y)^dag dk` at grid
    /// nodes. The free part is taken in closed form and only the remainder,
    /// which decays like `1/k`, is summed.
    pub fn kernel(&self, t: f64, x_node: usize, y_node: usize) -> Result<CMat> {
        if t == 0.0 {
            return Err(Error::ZeroTime);
        }
        self.check_time(t)?;
        let (x, y) = (x_node as f64 * self.h, y_node as f64 * self.h);
        let mut acc = linalg::zeros(self.n);
        for (j, &k) in self.ks.iter().enumerate() {
            let full = self.psi(j, x_node) * self.psi(j, y_node).adjoint();
            let free = linalg::scaled_identity(self.n, c(2.0 * libm::cos(k * (x - y)), 0.0))
                + &self.s_inf * c(2.0 * libm::cos(k * (x + y)), 0.0);
            acc += (full - free) * (linalg::cis(-t * k * k) * self.dk);
        }
        Ok(acc + free_kernel(t, x, y, &self.s_inf))
    }
}

/// `I_0 = sqrt(pi / it) (e^{i(x-y)^2/4t} + e^{i(x+y)^2/4t} S_inf)` for `t != 0`.
pub fn free_kernel(t: f64, x: f64, y: f64, s_inf: &CMat) -> CMat {
    let pre = fresnel::free_prefactor(t);
    let d = linalg::cis((x - y) * (x - y) / (4.0 * t));
    let s = linalg::cis((x + y) * (x + y) / (4.0 * t));
    (linalg::scaled_identity(s_inf.nrows(), d) + s_inf * s) * pre
}

fn norm_drift(grid: &StateGrid, u: &[Complex64], reference: f64) -> f64 {
    if reference > 0.0 {
        grid.norm(u) / reference - 1.0
    } else {
        grid.norm(u)
    }
}

/// `e^{-itH} P_c psi` from the spectral representation. `P_c` is applied
/// explicitly before the transform.
pub fn evolve_spectral(
    psi: &[Complex64],
    t: f64,
    tables: &SpectralTables,
    bound: &BoundStateSet,
    bp: &BoundaryPair,
) -> Result<EvolutionResult> {
    let grid = bound.grid;
    tables.check_time(t)?;
    let pc = project_continuous(psi, bound)?;
    let phi = tables.analyse(&pc, &grid)?;
    let coeff: Vec<CVec> = phi
        .iter()
        .zip(&tables.ks)
        .map(|(p, &k)| p * linalg::cis(-t * k * k))
        .collect();
    let u = tables.synthesise(&coeff, &grid)?;
    Ok(EvolutionResult {
        t,
        grid,
        norm_drift: norm_drift(&grid, &u, grid.norm(&pc)),
        boundary_residual: boundary_residual(&grid, &u, bp),
        u,
        method: Method::Spectral,
    })
}

/// `e^{-itH} psi = e^{-itH} P_c psi + sum e^{it kappa^2} <psi_jr, psi> psi_jr`.
pub fn full_evolution(
    psi: &[Complex64],
    t: f64,
    tables: &SpectralTables,
    bound: &BoundStateSet,
    bp: &BoundaryPair,
) -> Result<State> {
    let mut u = evolve_spectral(psi, t, tables, bound, bp)?.u;
    let grid = bound.grid;
    for (kappa, e) in bound.eigenfunctions() {
        let coeff = grid.inner(e, psi) * linalg::cis(t * kappa * kappa);
        for (o, ei) in u.iter_mut().zip(e) {
            *o += coeff * ei;
        }
    }
    Ok(u)
}

/// `K`, `F_s` and `S_inf` for the kernel route.
#[derive(Debug, Clone)]
pub struct KernelTables {
    pub kernel: KernelK,
    pub fs: FsTable,
    pub s_inf: CMat,
    /// Potential discontinuities `c`; `K(x, .)` kinks at `2c - x`.
    pub jumps: Vec<f64>,
}

impl KernelTables {
    /// Needs a scattering table computed with trajectories on [`kernel_kgrid`].
    pub fn new(
        table: &ScatteringTable,
        pg: &PotentialGrid,
        settings: &KernelSettings,
    ) -> Result<Self> {
        Ok(Self {
            kernel: transformation_kernel(table, pg, settings)?,
            fs: fs_transform(table, pg, settings)?,
            s_inf: table.s_inf.clone(),
            jumps: pg.discontinuities(kernels::JUMP_SHARE, kernels::MAX_JUMPS),
        })
    }

    pub fn h(&self) -> f64 {
        self.kernel.h
    }
}

/// `I_0 .. I_5` and their sum `T` on a grid of `(x, y)` nodes.
#[derive(Debug, Clone)]
pub struct KernelPieces {
    pub t: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `pieces[j][a * ys.len() + b] = I_j(xs[a], ys[b])`.
    pub pieces: [Vec<CMat>; 6],
    pub total: Vec<CMat>,
}

impl KernelPieces {
    pub fn at(&self, j: usize, a: usize, b: usize) -> &CMat {
        &self.pieces[j][a * self.ys.len() + b]
    }

    pub fn total_at(&self, a: usize, b: usize) -> &CMat {
        &self.total[a * self.ys.len() + b]
    }

    /// `sup |I_j|` (operator norm) over the window.
    pub fn sup(&self, j: usize) -> f64 {
        self.pieces[j]
            .iter()
            .map(linalg::op_norm)
            .fold(0.0, f64::max)
    }

    pub fn sup_total(&self) -> f64 {
        self.total.iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    /// `max |T - sum_j I_j|`.
    pub fn assembly_residual(&self) -> f64 {
        (0..self.total.len())
            .map(|q| {
                let mut sum = linalg::zeros(self.total[q].nrows());
                for piece in &self.pieces {
                    sum += &piece[q];
                }
                linalg::max_abs(&(&self.total[q] - sum))
            })
            .fold(0.0, f64::max)
    }
}

/// Fresnel convolutions of the kernel tables at one `t > 0`, on grid
/// offsets `u = l h`.
struct Fresnel<'a> {
    t: f64,
    tables: &'a KernelTables,
}

impl Fresnel<'_> {
    fn weight(s: usize, h: f64) -> f64 {
        if s == 0 {
            0.5 * h
        } else {
            h
        }
    }

    /// Tail part of [`Fresnel::p`].
    fn p_tails(&self, i: usize, u: f64, adjoint: bool) -> CMat {
        let kern = &self.tables.kernel;
        let mut acc = linalg::zeros(kern.n);
        let model = kern.tails(i);
        for tail in &model.tails {
            let w = fresnel::tail_weights(self.t, u - tail.at, model.lambda);
            for (coef, wm) in tail.coef.iter().zip(w) {
                if adjoint {
                    acc += coef.adjoint() * wm;
                } else {
                    acc += coef * wm;
                }
            }
        }
        acc
    }

    /// `int G(u - z) K(x_i, z) dz`, or with `K^dag` when `adjoint` is set.
    fn p(&self, i: usize, u: f64, adjoint: bool) -> CMat {
        let kern = &self.tables.kernel;
        if i >= kern.nodes {
            return linalg::zeros(kern.n);
        }
        let mut acc = self.p_tails(i, u, adjoint);
        let x = kern.x(i);
        for s in 0..kern.span {
            let g = fresnel::kernel(self.t, u - x - s as f64 * kern.h) * Self::weight(s, kern.h);
            let r = kern.residual(i, s);
            if adjoint {
                acc += r.adjoint() * g;
            } else {
                acc += r * g;
            }
        }
        acc
    }

    /// `P(x_i, u)` at `u = sign l h`, `l < count`, for a live node `i`.
    fn p_row(&self, i: usize, count: usize, sign: f64) -> Vec<CMat> {
        let kern = &self.tables.kernel;
        let h = kern.h;
        let a: Vec<CMat> = (0..kern.span)
            .map(|s| kern.residual(i, s) * c(Self::weight(s, h), 0.0))
            .collect();
        // u - x - s h = (l + shift - s) h
        let res = if sign > 0.0 {
            self.correlate(&a, -(i as isize), count)
        } else {
            let mut r = self.correlate(&a, -(i as isize) - (count as isize - 1), count);
            r.reverse();
            r
        };
        res.into_iter()
            .enumerate()
            .map(|(l, r)| r + self.p_tails(i, sign * l as f64 * h, false))
            .collect()
    }

    /// `C_3(u) = int G(u - z) F_s(z) dz` at `u = l h`, `l < count`.
    fn c3_row(&self, count: usize) -> Vec<CMat> {
        let fs = &self.tables.fs;
        let a: Vec<CMat> = (0..fs.len())
            .map(|l| fs.residual(l) * c(fs.h, 0.0))
            .collect();
        let res = if a.is_empty() {
            alloc::vec![linalg::zeros(fs.n); count]
        } else {
            self.correlate(&a, fs.m as isize, count)
        };
        par::map_range(count, |l| {
            let u = l as f64 * fs.h;
            let mut acc = res[l].clone();
            for tail in &fs.tails.tails {
                let w = fresnel::tail_weights(self.t, u - tail.at, fs.tails.lambda);
                for (coef, wm) in tail.coef.iter().zip(w) {
                    acc += coef * wm;
                }
            }
            acc
        })
    }

    /// `out[l] = sum_j a_j G((l + shift - j) h)` for `l < count`, by FFT.
    fn correlate(&self, a: &[CMat], shift: isize, count: usize) -> Vec<CMat> {
        let n = self.tables.kernel.n;
        let h = self.tables.h();
        let first = shift - (a.len() as isize - 1);
        let g: Vec<Complex64> = (0..count + a.len() - 1)
            .map(|k| fresnel::kernel(self.t, (first + k as isize) as f64 * h))
            .collect();
        let mut out = alloc::vec![linalg::zeros(n); count];
        for r in 0..n {
            for col in 0..n {
                let f: Vec<Complex64> = a.iter().map(|m| m[(r, col)]).collect();
                let conv = fft::convolve(&f, &g);
                for (l, o) in out.iter_mut().enumerate() {
                    o[(r, col)] = conv[l + a.len() - 1];
                }
            }
        }
        out
    }
}

/// Kernel pieces at `x = x_nodes[a] h`, `y = y_nodes[b] h` for `t != 0`;
/// negative times use `T_{-t}(x, y) = T_t(y, x)^dag`.
pub fn kernel_pieces(
    t: f64,
    tables: &KernelTables,
    x_nodes: &[usize],
    y_nodes: &[usize],
) -> Result<KernelPieces> {
    if t == 0.0 {
        return Err(Error::ZeroTime);
    }
    let h = tables.h();
    if t > 0.0 {
        return Ok(pieces_forward(t, tables, x_nodes, y_nodes));
    }
    let swapped = pieces_forward(-t, tables, y_nodes, x_nodes);
    let (nx, ny) = (x_nodes.len(), y_nodes.len());
    let flip = |v: &Vec<CMat>| -> Vec<CMat> {
        let mut out = Vec::with_capacity(nx * ny);
        for a in 0..nx {
            for b in 0..ny {
                out.push(v[b * nx + a].adjoint());
            }
        }
        out
    };
    Ok(KernelPieces {
        t,
        xs: x_nodes.iter().map(|&i| i as f64 * h).collect(),
        ys: y_nodes.iter().map(|&i| i as f64 * h).collect(),
        pieces: core::array::from_fn(|j| flip(&swapped.pieces[j])),
        total: flip(&swapped.total),
    })
}

fn pieces_forward(
    t: f64,
    tables: &KernelTables,
    x_nodes: &[usize],
    y_nodes: &[usize],
) -> KernelPieces {
    let kern = &tables.kernel;
    let h = kern.h;
    let n = kern.n;
    let span = kern.span;
    let two_pi = c(2.0 * PI, 0.0);
    let s_inf = &tables.s_inf;
    let fr = Fresnel { t, tables };
    let max_x = x_nodes.iter().copied().max().unwrap_or(0);
    let max_y = y_nodes.iter().copied().max().unwrap_or(0);

    // C_3 on l = 0 .. max_x + max_y + 2 span
    let c3_len = max_x + max_y + 2 * span + 1;
    let c3 = fr.c3_row(c3_len);
    // K(y, y + s h)^dag rows
    let k_rows: Vec<Vec<CMat>> = y_nodes
        .iter()
        .map(|&j| (0..span).map(|s| kern.value(j, s).adjoint()).collect())
        .collect();
    let k_live = |j: usize| j < kern.nodes;

    let rows = par::map_range(x_nodes.len(), |a| {
        let i = x_nodes[a];
        let x = i as f64 * h;
        let live = i < kern.nodes;
        // P_x(+-z) for z = l h, l = 0 .. max_y + span
        let reach = max_y + span;
        let (p_plus, p_minus): (Vec<CMat>, Vec<CMat>) = if live {
            (fr.p_row(i, reach, 1.0), fr.p_row(i, reach, -1.0))
        } else {
            (Vec::new(), Vec::new())
        };
        // Q_x(z) = int K(x, z1) C_3(z1 + z) dz1 for z = l h
        let q: Vec<CMat> = if live {
            let row: Vec<CMat> = (0..span)
                .map(|s| kern.value(i, s) * c(Fresnel::weight(s, h), 0.0))
                .collect();
            slide(&row, &c3[i..], reach)
        } else {
            Vec::new()
        };
        let mut out: [Vec<CMat>; 6] = core::array::from_fn(|_| Vec::with_capacity(y_nodes.len()));
        for (b, &j) in y_nodes.iter().enumerate() {
            let y = j as f64 * h;
            out[0].push(free_kernel(t, x, y, s_inf));
            let zero = linalg::zeros(n);
            // I_1
            let mut i1 = zero.clone();
            if k_live(j) {
                i1 += fr.p(j, x, true) + s_inf * fr.p(j, -x, true);
            }
            if live {
                i1 += &p_plus[j] + &p_minus[j] * s_inf;
            }
            out[1].push(i1 * two_pi);
            // I_2, I_5 and the first part of I_4 integrate against K(y, .)^dag
            let mut i2 = zero.clone();
            let mut i4 = zero.clone();
            let mut i5 = zero.clone();
            if k_live(j) {
                for s in 0..span {
                    let w = c(Fresnel::weight(s, h), 0.0);
                    let kd = &k_rows[b][s];
                    let l = j + s;
                    if live {
                        i2 += (&p_plus[l] + &p_minus[l] * s_inf) * kd * w;
                        i5 += &q[l] * kd * w;
                    }
                    i4 += &c3[i + l] * kd * w;
                }
            }
            if live {
                i4 += &q[j];
            }
            out[2].push(i2 * two_pi);
            out[3].push(&c3[i + j] * two_pi);
            out[4].push(i4 * two_pi);
            out[5].push(i5 * two_pi);
        }
        out
    });

    let mut pieces: [Vec<CMat>; 6] =
        core::array::from_fn(|_| Vec::with_capacity(x_nodes.len() * y_nodes.len()));
    for row in rows {
        for (dst, src) in pieces.iter_mut().zip(row) {
            dst.extend(src);
        }
    }
    let total = (0..pieces[0].len())
        .map(|q| {
            let mut sum = linalg::zeros(n);
            for piece in &pieces {
                sum += &piece[q];
            }
            sum
        })
        .collect();
    KernelPieces {
        t,
        xs: x_nodes.iter().map(|&i| i as f64 * h).collect(),
        ys: y_nodes.iter().map(|&i| i as f64 * h).collect(),
        pieces,
        total,
    }
}

/// `out[l] = sum_s a[s] b[s + l]` for `l < count`, by FFT per entry.
fn slide(a: &[CMat], b: &[CMat], count: usize) -> Vec<CMat> {
    let n = a.first().map_or(0, |m| m.nrows());
    let mut out = alloc::vec![linalg::zeros(n); count];
    if a.is_empty() {
        return out;
    }
    let len = count + a.len() - 1;
    for r in 0..n {
        for col in 0..n {
            for mid in 0..n {
                let f: Vec<Complex64> = a.iter().map(|m| m[(r, mid)]).collect();
                let g: Vec<Complex64> = b[..len].iter().rev().map(|m| m[(mid, col)]).collect();
                let conv = fft::convolve(&f, &g);
                for (l, o) in out.iter_mut().enumerate() {
                    o[(r, col)] += conv[len - 1 - l];
                }
            }
        }
    }
    out
}

/// `out[q] = sum_j m[q - (N - 1) + j] a_j` for `q = 0 .. m.len() + N - 1`,
/// matrices times vectors, by FFT per entry.
fn correlate(m: &[CMat], a: &[CVec], n: usize) -> Vec<CVec> {
    let mut out = alloc::vec![CVec::zeros(n); m.len() + a.len() - 1];
    for r in 0..n {
        for col in 0..n {
            let f: Vec<Complex64> = m.iter().map(|x| x[(r, col)]).collect();
            let rev: Vec<Complex64> = a.iter().rev().map(|v| v[col]).collect();
            for (o, val) in out.iter_mut().zip(fft::convolve(&f, &rev)) {
                o[r] += val;
            }
        }
    }
    out
}

/// Extra line length per unit `|t|` on each side of the kernel route's
/// periodic grid, so content moving slower than this does not wrap.
pub const KERNEL_PAD_SPEED: f64 = 24.0;

/// `e^{-itH} P_c psi` by the kernel route:
/// `u = (I + K) U_0(t) [E + Phi]`, where `chi = (I + K)^dag psi`, `E` is
/// `chi` on `z > 0` and `S_inf chi(-z)` on `z < 0`,
/// `Phi(r) = int_0^inf F_s(r + z) chi(z) dz` and `U_0` is the free
/// propagator on the line, applied by FFT.
pub fn evolve_kernel(
    psi: &[Complex64],
    t: f64,
    tables: &KernelTables,
    bound: &BoundStateSet,
    bp: &BoundaryPair,
) -> Result<EvolutionResult> {
    let grid = bound.grid;
    let kern = &tables.kernel;
    let fs = &tables.fs;
    let n = grid.n;
    if n != kern.n || (grid.h - kern.h).abs() > 1e-12 * kern.h {
        return Err(Error::GridMismatch {
            expected: kern.n,
            found: grid.n,
        });
    }
    let h = grid.h;
    let pc = project_continuous(psi, bound)?;
    let vec_at = |v: &[Complex64], j: usize| CVec::from_column_slice(&v[j * n..(j + 1) * n]);

    // chi(z_j) = psi(z_j) + int_0^z K(y, z)^dag psi(y) dy; in y the integrand
    // kinks at the jumps c and at 2c - z
    let chi: Vec<CVec> = par::map_range(grid.nodes, |j| {
        let mut acc = vec_at(&pc, j);
        if kern.nodes == 0 {
            return acc;
        }
        let lo = j.saturating_sub(kern.span - 1);
        let hi = j.min(kern.nodes - 1);
        if lo > hi {
            return acc;
        }
        let z = j as f64 * h;
        let breaks: Vec<f64> = tables
            .jumps
            .iter()
            .flat_map(|&cj| [cj, 2.0 * cj - z])
            .collect();
        let w = piecewise_weights(
            lo as f64 * h,
            h,
            hi - lo + 1,
            lo as f64 * h,
            hi as f64 * h,
            &breaks,
        );
        for i in lo..=hi {
            acc += kern.value(i, j - i).adjoint() * vec_at(&pc, i) * c(w[i - lo], 0.0);
        }
        acc
    });

    // periodic line grid z = l h, l in [-half_len, half_len)
    let pad = libm::ceil(KERNEL_PAD_SPEED * t.abs() / h) as usize;
    let half_len = (grid.nodes + pad + kern.span).next_power_of_two();
    let len = 2 * half_len;
    let slot = |l: i64| l.rem_euclid(len as i64) as usize;
    let mut line: Vec<Vec<Complex64>> = alloc::vec![alloc::vec![ZERO; len]; n];
    for (j, v) in chi.iter().enumerate() {
        let w = if j == 0 { 0.5 } else { 1.0 };
        let reflected = &tables.s_inf * v;
        for r in 0..n {
            line[r][slot(j as i64)] += v[r] * w;
            line[r][slot(-(j as i64))] += reflected[r] * w;
        }
    }

    // Phi(l h) = int_0^inf F_s((l h + z) chi(z) dz, split into the smooth
    // remainder of F_s and its tails; each sum gets Gregory weights at its
    // first node (z = 0, or the tail start).
    let base: Vec<CVec> = chi.iter().map(|v| v * c(h, 0.0)).collect();
    let nodes = grid.nodes as i64;
    let mut add = |l: i64, v: &CVec| {
        if l >= -(half_len as i64) && l < half_len as i64 {
            let at = slot(l);
            for r in 0..n {
                line[r][at] += v[r];
            }
        }
    };
    let greg = |s: usize| [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0][s] - 1.0;
    // remainder: sum_j h R((l + j) h) chi_j, table index l + j + m
    let res: Vec<CMat> = (0..fs.len()).map(|q| fs.residual(q)).collect();
    for (q, v) in correlate(&res, &base, n).into_iter().enumerate() {
        add(q as i64 - (nodes - 1) - fs.m as i64, &v);
    }
    for l in -(fs.m as i64) - nodes..fs.m as i64 {
        let mut v = CVec::zeros(n);
        for (s, chi_s) in chi.iter().enumerate().take(4) {
            let q = l + s as i64 + fs.m as i64;
            if q >= 0 && (q as usize) < res.len() {
                v += &res[q as usize] * chi_s * c(greg(s) * h, 0.0);
            }
        }
        add(l, &v);
    }
    // tails: sum_{j >= start} h M((l + j) h - at) chi_j with M = 0 below 0
    let lambda = fs.tails.lambda;
    let tail_len = (libm::ceil(60.0 / (lambda * h)) as usize).min(len);
    for tail in &fs.tails.tails {
        let shift = libm::round(tail.at / h) as i64;
        let value = |p: usize| {
            let z = p as f64 * h;
            (&tail.coef[0] + &tail.coef[1] * c(z, 0.0) + &tail.coef[2] * c(0.5 * z * z, 0.0))
                * c(libm::exp(-lambda * z), 0.0)
        };
        let table: Vec<CMat> = (0..tail_len).map(value).collect();
        for (q, v) in correlate(&table, &base, n).into_iter().enumerate() {
            add(q as i64 - (nodes - 1) + shift, &v);
        }
        for l in shift - nodes + 1..shift + tail_len as i64 {
            let start = (shift - l).max(0);
            let mut v = CVec::zeros(n);
            for s in 0..4 {
                let j = start + s;
                let p = l + j - shift;
                if j < nodes && p >= 0 && (p as usize) < tail_len {
                    v += &table[p as usize] * &chi[j as usize] * c(greg(s as usize) * h, 0.0);
                }
            }
            add(l, &v);
        }
    }

    // free propagation on the line
    let dkl = 2.0 * PI / (len as f64 * h);
    for comp in line.iter_mut() {
        fft::fft_in_place(comp, -1.0);
        for (q, z) in comp.iter_mut().enumerate() {
            let qq = if q < half_len {
                q as f64
            } else {
                q as f64 - len as f64
            };
            let k = qq * dkl;
            *z *= linalg::cis(-t * k * k) / len as f64;
        }
        fft::fft_in_place(comp, 1.0);
    }
    let w_at = |j: usize| CVec::from_fn(n, |r, _| line[r][j]);

    // u(x_i) = w(x_i) + int_x^inf K(x_i, z) w(z) dz; in z the integrand kinks
    // at the jumps c and at 2c - x_i
    let nodes = par::map_range(grid.nodes, |i| {
        let mut u = w_at(i);
        if i < kern.nodes {
            let count = kern.span.min(half_len - i);
            let x = i as f64 * h;
            let breaks: Vec<f64> = tables
                .jumps
                .iter()
                .flat_map(|&cj| [cj, 2.0 * cj - x])
                .collect();
            let w = piecewise_weights(x, h, count, x, x + (count - 1) as f64 * h, &breaks);
            for s in 0..count {
                u += kern.value(i, s) * w_at(i + s) * c(w[s], 0.0);
            }
        }
        u
    });
    let mut u = Vec::with_capacity(grid.len());
    for v in nodes {
        u.extend(v.iter().copied());
    }
    Ok(EvolutionResult {
        t,
        grid,
        norm_drift: norm_drift(&grid, &u, grid.norm(&pc)),
        boundary_residual: boundary_residual(&grid, &u, bp),
        u,
        method: Method::Kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Preset;
    use crate::spectrum::find_bound_states;

    fn packet(grid: &StateGrid, x0: f64, k0: f64) -> State {
        grid.from_fn(|x| {
            let g = linalg::cis(k0 * x) * libm::exp(-0.5 * (x - x0) * (x - x0));
            CVec::from_element(grid.n, g)
        })
    }

    #[test]
    fn spectral_route_conserves_norm_and_is_identity_at_zero() {
        let pg = Preset::SquareWell {
            depth: -3.0,
            width: 1.0,
        }
        .build(0.02, None)
        .unwrap();
        let prop = Propagator::new(&pg).unwrap();
        let bp = BoundaryPair::mixed(1, 0.7);
        let grid = StateGrid::new(1, pg.h, 140.0).unwrap();
        let bound = find_bound_states(&prop, &bp, 1e-3, 4.0, &grid).unwrap();
        assert!(bound.count() >= 1);
        let tables = SpectralTables::new(&prop, &bp, 9.0, 0.015).unwrap();
        let psi = packet(&grid, 8.0, 1.5);
        let pc = project_continuous(&psi, &bound).unwrap();
        let at0 = evolve_spectral(&psi, 0.0, &tables, &bound, &bp).unwrap();
        let diff = grid.norm(&crate::state::difference(&at0.u, &pc)) / grid.norm(&pc);
        assert!(diff < 1e-6, "t = 0: {diff}");
        for t in [0.1, 1.0, 5.0, 8.0, 10.0] {
            let r = evolve_spectral(&psi, t, &tables, &bound, &bp).unwrap();
            assert!(r.norm_drift.abs() < 1e-6, "t = {t}: {}", r.norm_drift);
            assert!(
                r.boundary_residual < 1e-4,
                "t = {t}: {}",
                r.boundary_residual
            );
        }
        assert!(matches!(
            evolve_spectral(&psi, 100.0, &tables, &bound, &bp),
            Err(Error::SpectralGridTooCoarse { .. })
        ));
    }

    #[test]
    fn bound_eigenfunction_rotates_by_a_phase() {
        let pg = Preset::SquareWell {
            depth: -4.0,
            width: 1.0,
        }
        .build(0.02, None)
        .unwrap();
        let prop = Propagator::new(&pg).unwrap();
        let bp = BoundaryPair::dirichlet(1);
        let grid = StateGrid::new(1, pg.h, 40.0).unwrap();
        let bound = find_bound_states(&prop, &bp, 1e-3, 4.0, &grid).unwrap();
        assert_eq!(bound.count(), 1);
        let (kappa, e) = bound.eigenfunctions().next().unwrap();
        let e = e.clone();
        let tables = SpectralTables::new(&prop, &bp, 8.0, 0.04).unwrap();
        let t = 1.3;
        let u = full_evolution(&e, t, &tables, &bound, &bp).unwrap();
        let expected: State = e
            .iter()
            .map(|z| z * linalg::cis(t * kappa * kappa))
            .collect();
        let err = grid.norm(&crate::state::difference(&u, &expected));
        assert!(err < 1e-6, "{err}");
    }

    fn kernel_tables(pg: &PotentialGrid, bp: &BoundaryPair) -> KernelTables {
        let settings = KernelSettings::default();
        let prop = Propagator::new(pg).unwrap();
        let kg = crate::kernels::kernel_kgrid(pg.h, pg.x_max, &settings);
        let table = ScatteringTable::compute(&prop, bp, kg, true).unwrap();
        KernelTables::new(&table, pg, &settings).unwrap()
    }

    #[test]
    fn free_dirichlet_kernel_is_closed_form() {
        let pg = Preset::Zero { n: 1 }.build(0.02, Some(1.0)).unwrap();
        let tables = kernel_tables(&pg, &BoundaryPair::dirichlet(1));
        let p = kernel_pieces(1.0, &tables, &[50], &[50]).unwrap();
        let expected = fresnel::free_prefactor(1.0) * (c(1.0, 0.0) - linalg::cis(1.0));
        assert!((p.total_at(0, 0)[(0, 0)] - expected).norm() < 1e-12);
        for j in 1..6 {
            assert!(p.sup(j) < 1e-12);
        }
    }

    #[test]
    fn kernel_pieces_match_spectral_kernel() {
        let pg = Preset::SquareWell {
            depth: -2.0,
            width: 1.0,
        }
        .build(0.02, None)
        .unwrap();
        let bp = BoundaryPair::dirichlet(1);
        let tables = kernel_tables(&pg, &bp);
        let prop = Propagator::new(&pg).unwrap();
        let spectral = SpectralTables::new(&prop, &bp, 40.0, 0.005).unwrap();
        let nodes = [0usize, 10, 25, 40, 50, 60, 75, 100];
        for t in [1.0, -1.0] {
            let p = kernel_pieces(t, &tables, &nodes, &nodes).unwrap();
            assert!(p.assembly_residual() < 1e-12);
            let sup = p.sup_total();
            let mut worst: f64 = 0.0;
            for (a, &i) in nodes.iter().enumerate() {
                for (b, &j) in nodes.iter().enumerate() {
                    let reference = spectral.kernel(t, i, j).unwrap();
                    worst = worst.max(linalg::max_abs(&(p.total_at(a, b) - reference)));
                }
            }
            assert!(worst <= 1e-3 * sup, "t = {t}: {worst} vs sup {sup}");
        }
    }

    #[test]
    fn kernel_route_matches_spectral_route() {
        let pg = Preset::SquareWell {
            depth: -3.0,
            width: 1.0,
        }
        .build(0.02, None)
        .unwrap();
        let bp = BoundaryPair::mixed(1, 0.7);
        let prop = Propagator::new(&pg).unwrap();
        let grid = StateGrid::new(1, pg.h, 40.0).unwrap();
        let bound = find_bound_states(&prop, &bp, 1e-3, 4.0, &grid).unwrap();
        let kt = kernel_tables(&pg, &bp);
        let st = SpectralTables::new(&prop, &bp, 9.0, 0.02).unwrap();
        let psi = packet(&grid, 6.0, -1.5);
        let mut worst = Vec::new();
        for t in [0.0, 0.5, 2.0] {
            let a = evolve_kernel(&psi, t, &kt, &bound, &bp).unwrap();
            let b = evolve_spectral(&psi, t, &st, &bound, &bp).unwrap();
            let rel = grid.norm(&crate::state::difference(&a.u, &b.u)) / grid.norm(&b.u);
            worst.push((t, rel));
        }
        assert!(worst.iter().all(|w| w.1 < 1e-4), "{worst:?}");
    }

    #[test]
    fn stepper_matches_spectral_route() {
        for (bp, depth) in [
            (BoundaryPair::mixed(1, 0.7), -3.0),
            (BoundaryPair::dirichlet(1), -1.0),
        ] {
            let pg = Preset::SquareWell { depth, width: 1.0 }
                .build(0.02, None)
                .unwrap();
            let prop = Propagator::new(&pg).unwrap();
            let grid = StateGrid::new(1, pg.h, 40.0).unwrap();
            let bound = find_bound_states(&prop, &bp, 1e-3, 4.0, &grid).unwrap();
            let st = SpectralTables::new(&prop, &bp, 9.0, 0.02).unwrap();
            let psi = packet(&grid, 6.0, -1.5);
            let mut worst = Vec::new();
            for t in [0.5, 2.0] {
                let a =
                    evolve_stepper(&psi, t, &pg, &bp, &bound, &StepperSettings::default()).unwrap();
                let b = evolve_spectral(&psi, t, &st, &bound, &bp).unwrap();
                let rel = grid.norm(&crate::state::difference(&a.u, &b.u)) / grid.norm(&b.u);
                worst.push((t, rel, a.norm_drift));
            }
            assert!(
                worst.iter().all(|w| w.1 < 1e-3 && w.2.abs() < 1e-5),
                "{worst:?}"
            );
        }
    }

    #[test]
    fn three_routes_agree_on_coupled_channels() {
        let pg = Preset::CoupledChannels {
            g: 0.5,
            d1: 0.0,
            d2: 0.0,
            width: 1.0,
        }
        .build(0.02, None)
        .unwrap();
        let bp = BoundaryPair::mixed(2, 0.7);
        let prop = Propagator::new(&pg).unwrap();
        let grid = StateGrid::new(2, pg.h, 40.0).unwrap();
        let bound = find_bound_states(&prop, &bp, 1e-3, 4.0, &grid).unwrap();
        let kt = kernel_tables(&pg, &bp);
        let st = SpectralTables::new(&prop, &bp, 9.0, 0.02).unwrap();
        let psi = grid.from_fn(|x| {
            let g = linalg::cis(-1.5 * x) * libm::exp(-0.5 * (x - 6.0) * (x - 6.0));
            CVec::from_vec(alloc::vec![g, g * c(0.0, 0.5)])
        });
        let mut worst = Vec::new();
        for t in [0.5, 1.0, 2.0] {
            let a = evolve_spectral(&psi, t, &st, &bound, &bp).unwrap();
            let b = evolve_kernel(&psi, t, &kt, &bound, &bp).unwrap();
            let s = evolve_stepper(&psi, t, &pg, &bp, &bound, &StepperSettings::default()).unwrap();
            let rel =
                |p: &State, q: &State| grid.norm(&crate::state::difference(p, q)) / grid.norm(q);
            worst.push((t, rel(&b.u, &a.u), rel(&s.u, &a.u), rel(&s.u, &b.u)));
        }
        assert!(
            worst.iter().all(|w| w.1 < 1e-3 && w.2 < 1e-3 && w.3 < 1e-3),
            "{worst:?}"
        );
    }
}
