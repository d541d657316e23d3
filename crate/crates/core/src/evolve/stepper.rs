//! Crank-Nicolson stepping of `i u_t = (-u'' + V u)` on a refined copy of the
//! state grid.
//!
//! The state is rotated into the normal-form basis `c = M^dag u`, where the
//! boundary condition reads `cos(theta) c(0) + sin(theta) c'(0) = 0` per
//! channel. Dirichlet channels pin `c(0) = 0`; the others use a ghost node
//! `c(-h) = c(h) + 2 h cot(theta) c(0)`, which keeps the discrete operator
//! self-adjoint for the weights `(h/2, h, h, ...)`. A quartic absorbing
//! potential fills the far end of the grid, with `c = 0` at the last node.

use alloc::vec::Vec;
use num_complex::Complex64;

use super::{boundary_residual, norm_drift, EvolutionResult, Method};
use crate::bc::{normalize_boundary, BoundaryPair, ChannelKind};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, I, ZERO};
use crate::potential::PotentialGrid;
use crate::spectrum::{project_continuous, BoundStateSet};

#[derive(Debug, Clone, Copy)]
pub struct StepperSettings {
    /// Stepper nodes per state-grid node.
    pub refine: usize,
    pub dt: f64,
    /// Share of the grid covered by the absorbing layer.
    pub cap_fraction: f64,
    /// Peak of the absorbing potential `eta s^4`, `s` in `[0, 1]` across the layer.
    pub cap_strength: f64,
}

impl Default for StepperSettings {
    fn default() -> Self {
        Self {
            refine: 4,
            dt: 1e-3,
            cap_fraction: 0.15,
            cap_strength: 10.0,
        }
    }
}

/// Largest allowed per-step violation of the discrete norm balance.
const MAX_STEP_DRIFT: f64 = 1e-4;

/// Small dense `n x n` blocks stored column-major.
#[derive(Clone)]
struct Block {
    n: usize,
    a: Vec<Complex64>,
}

impl Block {
    fn from_mat(m: &CMat) -> Self {
        Self {
            n: m.nrows(),
            a: m.as_slice().to_vec(),
        }
    }

    fn to_mat(&self) -> CMat {
        CMat::from_column_slice(self.n, self.n, &self.a)
    }

    /// `out = self * v`
    fn mul(&self, v: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        for r in 0..n {
            let mut acc = ZERO;
            for col in 0..n {
                acc += self.a[col * n + r] * v[col];
            }
            out[r] = acc;
        }
    }
}

struct Operator {
    n: usize,
    nodes: usize,
    h: f64,
    /// Potential in the channel basis at each node.
    v: Vec<Block>,
    cap: Vec<f64>,
    /// `2 cot(theta) / h` for Robin channels, `None` for Dirichlet ones.
    robin: Vec<Option<f64>>,
}

impl Operator {
    /// `(H - iW) c` with the boundary rows described in the module docs.
    fn apply(&self, cv: &[Complex64], out: &mut [Complex64]) {
        let n = self.n;
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut tmp = alloc::vec![ZERO; n];
        for j in 0..self.nodes {
            let at = |k: usize| &cv[k * n..(k + 1) * n];
            self.v[j].mul(at(j), &mut tmp);
            for ch in 0..n {
                let here = cv[j * n + ch];
                let right = if j + 1 < self.nodes {
                    cv[(j + 1) * n + ch]
                } else {
                    ZERO
                };
                let lap = if j == 0 {
                    match self.robin[ch] {
                        Some(g) => (2.0 * here - 2.0 * right - g * self.h * self.h * here) * inv_h2,
                        None => {
                            out[ch] = ZERO;
                            continue;
                        }
                    }
                } else {
                    (2.0 * here - right - cv[(j - 1) * n + ch]) * inv_h2
                };
                out[j * n + ch] = lap + tmp[ch] - I * self.cap[j] * here;
            }
        }
    }

    fn weight(&self, j: usize) -> f64 {
        if j == 0 {
            0.5 * self.h
        } else {
            self.h
        }
    }

    fn norm2(&self, cv: &[Complex64]) -> f64 {
        let n = self.n;
        (0..self.nodes)
            .map(|j| {
                self.weight(j)
                    * cv[j * n..(j + 1) * n]
                        .iter()
                        .map(|z| z.norm_sqr())
                        .sum::<f64>()
            })
            .sum()
    }
}

/// Block-tridiagonal LU of `I + i dt/2 (H - iW)`, factored once.
struct Factor {
    n: usize,
    /// Inverses of the eliminated diagonal blocks.
    dinv: Vec<Block>,
    /// Multipliers `L_j D'_{j-1}^{-1}`.
    mult: Vec<Block>,
    /// Upper couplings (diagonal per channel).
    upper: Vec<Vec<Complex64>>,
}

impl Factor {
    fn new(op: &Operator, dt: f64) -> Result<Self> {
        let n = op.n;
        let a = I * (0.5 * dt);
        let inv_h2 = 1.0 / (op.h * op.h);
        let mut diag = Vec::with_capacity(op.nodes);
        let mut upper = Vec::with_capacity(op.nodes);
        let mut lower = Vec::with_capacity(op.nodes);
        for j in 0..op.nodes {
            let mut d = op.v[j].to_mat() * a;
            for ch in 0..n {
                d[(ch, ch)] += c(1.0, 0.0) + a * (2.0 * inv_h2 - I * op.cap[j]);
            }
            let mut up = alloc::vec![-a * inv_h2; n];
            let mut lo = alloc::vec![-a * inv_h2; n];
            if j == 0 {
                for ch in 0..n {
                    match op.robin[ch] {
                        Some(g) => {
                            d[(ch, ch)] -= a * g;
                            up[ch] = -a * 2.0 * inv_h2;
                        }
                        None => {
                            for col in 0..n {
                                d[(ch, col)] = ZERO;
                            }
                            d[(ch, ch)] = c(1.0, 0.0);
                            up[ch] = ZERO;
                        }
                    }
                }
            }
            if j + 1 == op.nodes {
                up = alloc::vec![ZERO; n];
            }
            if j == 0 {
                lo = alloc::vec![ZERO; n];
            }
            diag.push(d);
            upper.push(up);
            lower.push(lo);
        }
        let mut dinv = Vec::with_capacity(op.nodes);
        let mut mult = Vec::with_capacity(op.nodes);
        let mut prev_inv: Option<CMat> = None;
        for j in 0..op.nodes {
            let mut d = diag[j].clone();
            let m = match &prev_inv {
                Some(pinv) => {
                    // m = L_j D'^{-1}_{j-1}; D'_j = D_j - m U_{j-1}
                    let l = CMat::from_diagonal(&CVec::from_vec(lower[j].clone()));
                    let m = l * pinv;
                    let u = CMat::from_diagonal(&CVec::from_vec(upper[j - 1].clone()));
                    d -= &m * u;
                    m
                }
                None => linalg::zeros(n),
            };
            let inv = linalg::inverse(&d).ok_or(Error::StepTooLarge {
                drift: f64::INFINITY,
            })?;
            mult.push(Block::from_mat(&m));
            dinv.push(Block::from_mat(&inv));
            prev_inv = Some(inv);
        }
        Ok(Self {
            n,
            dinv,
            mult,
            upper,
        })
    }

    fn solve(&self, rhs: &mut [Complex64]) {
        let n = self.n;
        let nodes = self.dinv.len();
        let mut tmp = alloc::vec![ZERO; n];
        for j in 1..nodes {
            let (before, after) = rhs.split_at_mut(j * n);
            self.mult[j].mul(&before[(j - 1) * n..], &mut tmp);
            for ch in 0..n {
                after[ch] -= tmp[ch];
            }
        }
        for j in (0..nodes).rev() {
            if j + 1 < nodes {
                for ch in 0..n {
                    let next = rhs[(j + 1) * n + ch];
                    rhs[j * n + ch] -= self.upper[j][ch] * next;
                }
            }
            self.dinv[j].mul(&rhs[j * n..(j + 1) * n], &mut tmp);
            rhs[j * n..(j + 1) * n].copy_from_slice(&tmp);
        }
    }
}

/// Cubic Lagrange interpolation of node-major `psi` at `x` (one-sided near the ends).
fn interpolate(psi: &[Complex64], n: usize, nodes: usize, h: f64, x: f64, out: &mut [Complex64]) {
    let pos = x / h;
    let base = (libm::floor(pos) as i64 - 1).clamp(0, nodes as i64 - 4) as usize;
    for o in out.iter_mut() {
        *o = ZERO;
    }
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (pos - (base + b) as f64) / (a as f64 - b as f64);
            }
        }
        for ch in 0..n {
            out[ch] += psi[(base + a) * n + ch] * w;
        }
    }
}

struct Work {
    hc: Vec<Complex64>,
    prev: Vec<Complex64>,
}

impl Work {
    fn new(len: usize) -> Self {
        Self {
            hc: alloc::vec![ZERO; len],
            prev: alloc::vec![ZERO; len],
        }
    }
}

/// One Crank-Nicolson step; returns the relative violation of
/// `||c+||^2 - ||c||^2 = -2 dt <m, W m>` with `m` the midpoint.
fn step(op: &Operator, factor: &Factor, cv: &mut [Complex64], work: &mut Work, dt: f64) -> f64 {
    let before = op.norm2(cv);
    work.prev.copy_from_slice(cv);
    op.apply(cv, &mut work.hc);
    for (x, hx) in cv.iter_mut().zip(&work.hc) {
        *x -= I * (0.5 * dt) * hx;
    }
    for ch in 0..op.n {
        if op.robin[ch].is_none() {
            cv[ch] = ZERO;
        }
    }
    factor.solve(cv);
    let n = op.n;
    let absorbed: f64 = (0..op.nodes)
        .map(|j| {
            let w = op.weight(j) * op.cap[j];
            if w == 0.0 {
                return 0.0;
            }
            (0..n)
                .map(|ch| ((cv[j * n + ch] + work.prev[j * n + ch]) * 0.5).norm_sqr())
                .sum::<f64>()
                * w
        })
        .sum();
    let balance = op.norm2(cv) - before + 2.0 * dt * absorbed;
    balance.abs() / before.max(f64::MIN_POSITIVE)
}

/// `e^{-itH} P_c psi` by Crank-Nicolson for `t >= 0`.
pub fn evolve_stepper(
    psi: &[Complex64],
    t: f64,
    pg: &PotentialGrid,
    bp: &BoundaryPair,
    bound: &BoundStateSet,
    settings: &StepperSettings,
) -> Result<EvolutionResult> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(
            "the stepper runs forward in time only",
        ));
    }
    if settings.refine == 0 || !(settings.dt > 0.0) {
        return Err(Error::InvalidParameter(
            "stepper needs refine >= 1 and dt > 0",
        ));
    }
    let grid = bound.grid;
    let n = grid.n;
    if n != pg.n || bp.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: pg.n.max(bp.n),
        });
    }
    if grid.nodes < 4 {
        return Err(Error::GridMismatch {
            expected: 4,
            found: grid.nodes,
        });
    }
    let pc = project_continuous(psi, bound)?;
    let nf = normalize_boundary(bp)?;
    let m_adj = nf.m.adjoint();

    let r = settings.refine;
    let h = grid.h / r as f64;
    // the last state node is the Dirichlet wall and is not an unknown
    let nodes = (grid.nodes - 1) * r;
    let length = grid.length();
    let layer = settings.cap_fraction * length;
    let cap: Vec<f64> = (0..nodes)
        .map(|j| {
            let s = (j as f64 * h - (length - layer)) / layer;
            if layer > 0.0 && s > 0.0 {
                settings.cap_strength * s * s * s * s
            } else {
                0.0
            }
        })
        .collect();
    let v: Vec<Block> = (0..nodes)
        .map(|j| {
            let x = j as f64 * h;
            // average of the cells on either side, so jumps sit at their midpoint
            let vx = if j == 0 {
                pg.at(0.0)
            } else {
                (pg.at(x - 0.5 * h) + pg.at(x + 0.5 * h)) * c(0.5, 0.0)
            };
            Block::from_mat(&(&m_adj * vx * &nf.m))
        })
        .collect();
    let robin: Vec<Option<f64>> = (0..n)
        .map(|ch| match nf.kind(ch) {
            ChannelKind::Dirichlet => None,
            ChannelKind::Neumann => Some(0.0),
            ChannelKind::Mixed => {
                let th = nf.thetas[ch];
                Some(2.0 * libm::cos(th) / libm::sin(th) / h)
            }
        })
        .collect();
    let op = Operator {
        n,
        nodes,
        h,
        v,
        cap,
        robin,
    };
    let factor = Factor::new(&op, settings.dt)?;

    // initial data in the channel basis on the refined grid
    let mut cv = alloc::vec![ZERO; nodes * n];
    let mut tmp = alloc::vec![ZERO; n];
    for j in 0..nodes {
        interpolate(&pc, n, grid.nodes, grid.h, j as f64 * h, &mut tmp);
        let rot = &m_adj * CVec::from_column_slice(&tmp);
        cv[j * n..(j + 1) * n].copy_from_slice(rot.as_slice());
    }
    for ch in 0..n {
        if op.robin[ch].is_none() {
            cv[ch] = ZERO;
        }
    }

    let steps = libm::ceil(t / settings.dt - 1e-9).max(0.0) as usize;
    let dt = if steps > 0 { t / steps as f64 } else { 0.0 };
    let factor = if steps > 0 && (dt - settings.dt).abs() > 1e-15 {
        Factor::new(&op, dt)?
    } else {
        factor
    };
    let mut work = Work::new(nodes * n);
    for _ in 0..steps {
        let drift = step(&op, &factor, &mut cv, &mut work, dt);
        if drift > MAX_STEP_DRIFT {
            return Err(Error::StepTooLarge { drift });
        }
    }

    let mut u = grid.zeros();
    for j in 0..grid.nodes - 1 {
        let back = &nf.m * CVec::from_column_slice(&cv[j * r * n..(j * r + 1) * n]);
        u[j * n..(j + 1) * n].copy_from_slice(back.as_slice());
    }
    let u = project_continuous(&u, bound)?;
    Ok(EvolutionResult {
        t,
        grid,
        norm_drift: norm_drift(&grid, &u, grid.norm(&pc)),
        boundary_residual: boundary_residual(&grid, &u, bp),
        u,
        method: Method::Stepper,
    })
}
