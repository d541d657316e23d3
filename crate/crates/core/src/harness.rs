//! Measured decay rates and mixed norms of `e^{-itH} P_c`.
//!
//! Everything here is empirical: a fitted power law in `t`, a sampled ratio
//! of grid norms, or a windowed quadrature. Evolutions are supplied by the
//! caller as a closure `(psi, t) -> u(t)` so any route can be plugged in.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::bc::{normalize_boundary, BoundaryPair, ChannelKind};
use crate::error::{Error, Result};
use crate::evolve::{kernel_pieces, KernelTables};
use crate::linalg::{c, CVec, ZERO};
use crate::par;
use crate::state::{State, StateGrid};

/// Least-squares line `log v = intercept + slope log t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r2: f64,
}

pub fn fit_power_law(ts: &[f64], values: &[f64]) -> Result<PowerFit> {
    if ts.len() != values.len() || ts.len() < 2 {
        return Err(Error::InvalidParameter(
            "a power-law fit needs at least two samples",
        ));
    }
    if ts
        .iter()
        .chain(values)
        .any(|v| !(*v > 0.0) || !v.is_finite())
    {
        return Err(Error::InvalidParameter(
            "power-law samples must be positive and finite",
        ));
    }
    let xs: Vec<f64> = ts.iter().map(|t| libm::log(*t)).collect();
    let ys: Vec<f64> = values.iter().map(|v| libm::log(*v)).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "a power-law fit needs distinct times",
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let slope_stderr = if xs.len() > 2 {
        libm::sqrt(ssr / (m - 2.0) / sxx)
    } else {
        0.0
    };
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(PowerFit {
        slope,
        intercept,
        slope_stderr,
        r2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub p: f64,
    /// Conjugate exponent, `INFINITY` for `p = 1`.
    pub p_conj: f64,
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: PowerFit,
    /// Expected slope `-(1/p - 1/2)`.
    pub expected_slope: f64,
    /// `max_t v(t) t^{1/p - 1/2}`.
    pub constant: f64,
}

impl DecayReport {
    fn new(p: f64, ts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let fit = fit_power_law(&ts, &values)?;
        let rate = 1.0 / p - 0.5;
        let constant = ts
            .iter()
            .zip(&values)
            .map(|(t, v)| v * libm::pow(*t, rate))
            .fold(0.0, f64::max);
        Ok(Self {
            p,
            p_conj: conjugate(p),
            ts,
            values,
            fit,
            expected_slope: -rate,
            constant,
        })
    }

    /// `|slope - expected| <= tol`.
    pub fn slope_within(&self, tol: f64) -> bool {
        (self.fit.slope - self.expected_slope).abs() <= tol
    }

    /// Slopes between `t` and `2t` over every such pair of samples.
    pub fn octave_slopes(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, &t) in self.ts.iter().enumerate() {
            if let Some(j) = self
                .ts
                .iter()
                .position(|&s| (s - 2.0 * t).abs() <= 1e-9 * t)
            {
                out.push(libm::log(self.values[j] / self.values[i]) / core::f64::consts::LN_2);
            }
        }
        out
    }

    /// Error bar of the fitted slope: the regression standard error, or half
    /// the range of the octave slopes when the curve bends more than that.
    pub fn slope_uncertainty(&self) -> f64 {
        let local = self.octave_slopes();
        let lo = local.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = local.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let spread = if local.is_empty() {
            0.0
        } else {
            0.5 * (hi - lo)
        };
        self.fit.slope_stderr.max(spread)
    }
}

pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `t = t0 2^j`, `j = 0 .. count`.
pub fn geometric_times(t0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| t0 * libm::pow(2.0, j as f64)).collect()
}

/// `sup |T_t(x, y)| / 2 pi` over the node box.
pub fn sup_kernel(
    t: f64,
    tables: &KernelTables,
    x_nodes: &[usize],
    y_nodes: &[usize],
) -> Result<f64> {
    Ok(kernel_pieces(t, tables, x_nodes, y_nodes)?.sup_total() / (2.0 * PI))
}

/// `L^1 -> L^infinity` rate from the kernel: `s(t)` at each `t`, fitted in log-log.
pub fn decay_fit(
    tables: &KernelTables,
    ts: &[f64],
    x_nodes: &[usize],
    y_nodes: &[usize],
) -> Result<DecayReport> {
    let values = ts
        .iter()
        .map(|&t| sup_kernel(t, tables, x_nodes, y_nodes))
        .collect::<Result<Vec<_>>>()?;
    DecayReport::new(1.0, ts.to_vec(), values)
}

/// Nodes `0, stride, 2 stride, ...` up to `x_max`.
pub fn node_box(h: f64, x_max: f64, stride: usize) -> Vec<usize> {
    let last = libm::floor(x_max / h + 1e-9) as usize;
    (0..=last).step_by(stride.max(1)).collect()
}

fn check_p(p: f64) -> Result<()> {
    if (1.0..=2.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter("p must lie in [1, 2]"))
    }
}

/// `||u(t)||_{p'} / ||psi||_p` fitted against `t`.
pub fn lp_sample_bound<F>(
    grid: &StateGrid,
    psi: &[Complex64],
    p: f64,
    ts: &[f64],
    evolve: F,
) -> Result<DecayReport>
where
    F: Fn(&[Complex64], f64) -> Result<State> + Sync + Send,
{
    check_p(p)?;
    grid.check(psi)?;
    let input = grid.lp_norm(psi, p);
    let pc = conjugate(p);
    let values = par::try_map_range(ts.len(), |j| {
        Ok(grid.lp_norm(&evolve(psi, ts[j])?, pc) / input)
    })?;
    DecayReport::new(p, ts.to_vec(), values)
}

/// Second-order finite-difference derivative, one-sided at the ends.
pub fn derivative(grid: &StateGrid, u: &[Complex64]) -> State {
    let n = grid.n;
    let m = grid.nodes;
    let h = grid.h;
    let at = |j: usize, ch: usize| u[j * n + ch];
    let mut out = alloc::vec![ZERO; u.len()];
    for j in 0..m {
        for ch in 0..n {
            out[j * n + ch] = if m < 3 {
                ZERO
            } else if j == 0 {
                (at(0, ch) * -3.0 + at(1, ch) * 4.0 - at(2, ch)) / (2.0 * h)
            } else if j + 1 == m {
                (at(m - 1, ch) * 3.0 - at(m - 2, ch) * 4.0 + at(m - 3, ch)) / (2.0 * h)
            } else {
                (at(j + 1, ch) - at(j - 1, ch)) / (2.0 * h)
            };
        }
    }
    out
}

/// `||u||_p + ||u'||_p` on the grid.
pub fn sobolev_norm(grid: &StateGrid, u: &[Complex64], p: f64) -> f64 {
    grid.lp_norm(u, p) + grid.lp_norm(&derivative(grid, u), p)
}

/// Dirichlet channels of the normal form must vanish at the origin, relative
/// to `tol * sup |psi|`.
pub fn check_admissible(
    grid: &StateGrid,
    psi: &[Complex64],
    bp: &BoundaryPair,
    tol: f64,
) -> Result<()> {
    grid.check(psi)?;
    let nf = normalize_boundary(bp)?;
    let scale = grid.lp_norm(psi, f64::INFINITY).max(f64::MIN_POSITIVE);
    let rotated = nf.m.adjoint() * CVec::from_column_slice(grid.node(psi, 0));
    for ch in 0..grid.n {
        if nf.kind(ch) == ChannelKind::Dirichlet {
            let value = rotated[ch].norm() / scale;
            if value > tol {
                return Err(Error::InadmissibleState { value });
            }
        }
    }
    Ok(())
}

/// Relative size of a Dirichlet-channel value at 0 still treated as zero.
pub const ADMISSIBLE_TOL: f64 = 1e-8;

/// `||u(t)||_{W^{1,p'}} / ||psi||_{W^{1,p}}` fitted against `t`.
pub fn sobolev_decay<F>(
    grid: &StateGrid,
    psi: &[Complex64],
    bp: &BoundaryPair,
    p: f64,
    ts: &[f64],
    evolve: F,
) -> Result<DecayReport>
where
    F: Fn(&[Complex64], f64) -> Result<State> + Sync + Send,
{
    check_p(p)?;
    check_admissible(grid, psi, bp, ADMISSIBLE_TOL)?;
    let input = sobolev_norm(grid, psi, p);
    let pc = conjugate(p);
    let values = par::try_map_range(ts.len(), |j| {
        Ok(sobolev_norm(grid, &evolve(psi, ts[j])?, pc) / input)
    })?;
    DecayReport::new(p, ts.to_vec(), values)
}

/// `2/q = 1/2 - 1/r` with `2 <= r <= infinity`, to `1e-12`.
pub fn check_admissible_pair(q: f64, r: f64) -> Result<()> {
    let inv = |v: f64| if v.is_infinite() { 0.0 } else { 1.0 / v };
    if !(r >= 2.0) || !(q >= 2.0) || (2.0 * inv(q) - (0.5 - inv(r))).abs() > 1e-12 {
        return Err(Error::NotAdmissible { q, r });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrichartzReport {
    pub q: f64,
    pub r: f64,
    pub t_min: f64,
    pub input_norm: f64,
    /// `(T, ||u||_{L^q([t_min, T], L^r)} / ||phi||_2)` for each window.
    pub windows: Vec<(f64, f64)>,
    /// `(t, ||u(t)||_r)` at every quadrature node.
    pub samples: Vec<(f64, f64)>,
}

impl StrichartzReport {
    pub fn ratio(&self) -> f64 {
        self.windows.last().map_or(0.0, |w| w.1)
    }

    /// Relative change of the ratio over the last window doubling.
    pub fn convergence(&self) -> f64 {
        match self.windows.as_slice() {
            [.., a, b] => (b.1 - a.1).abs() / b.1.abs().max(f64::MIN_POSITIVE),
            _ => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StrichartzWindows {
    pub t_min: f64,
    /// The first window ends at `t_min 2^first_octaves`.
    pub first_octaves: usize,
    /// Number of window doublings after the first.
    pub doublings: usize,
    /// Simpson intervals per octave in `log t` (made even).
    pub per_octave: usize,
}

impl Default for StrichartzWindows {
    fn default() -> Self {
        Self {
            t_min: 0.1,
            first_octaves: 6,
            doublings: 2,
            per_octave: 8,
        }
    }
}

/// `L^q_t L^r_x` norm of `u(t)` over `[t_min, T]` for doubling `T`, by
/// Simpson's rule in `log t`; `q = infinity` takes the sup over the nodes.
pub fn strichartz_norm<F>(
    grid: &StateGrid,
    phi: &[Complex64],
    q: f64,
    r: f64,
    windows: &StrichartzWindows,
    evolve: F,
) -> Result<StrichartzReport>
where
    F: Fn(&[Complex64], f64) -> Result<State> + Sync + Send,
{
    check_admissible_pair(q, r)?;
    grid.check(phi)?;
    if !(windows.t_min > 0.0) || windows.first_octaves == 0 {
        return Err(Error::InvalidParameter(
            "Strichartz windows need t_min > 0 and at least one octave",
        ));
    }
    let per = (windows.per_octave.max(2) + 1) & !1;
    let octaves = windows.first_octaves + windows.doublings;
    let total = octaves * per;
    let ds = core::f64::consts::LN_2 / per as f64;
    let ts: Vec<f64> = (0..=total)
        .map(|j| windows.t_min * libm::exp(j as f64 * ds))
        .collect();
    let norms = par::try_map_range(ts.len(), |j| Ok(grid.lp_norm(&evolve(phi, ts[j])?, r)))?;
    let input = grid.norm(phi);
    let mut out = Vec::with_capacity(windows.doublings + 1);
    for w in 0..=windows.doublings {
        let end = (windows.first_octaves + w) * per;
        let value = if q.is_infinite() {
            norms[..=end].iter().copied().fold(0.0, f64::max)
        } else {
            // int f dt = int f(t) t ds
            let integral: f64 = (0..=end)
                .map(|j| {
                    let wgt = if j == 0 || j == end {
                        1.0
                    } else if j % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    wgt * libm::pow(norms[j], q) * ts[j]
                })
                .sum::<f64>()
                * ds
                / 3.0;
            libm::pow(integral, 1.0 / q)
        };
        out.push((ts[end], value / input));
    }
    Ok(StrichartzReport {
        q,
        r,
        t_min: windows.t_min,
        input_norm: input,
        windows: out,
        samples: ts.into_iter().zip(norms).collect(),
    })
}

/// `int_0^{min(t, s_end)} e^{-i(t-s)H} P_c f(s) ds` by composite Simpson on
/// `panels` intervals, for a source supported in `[0, s_end]`.
pub fn retarded_integral<F, G>(
    t: f64,
    s_end: f64,
    panels: usize,
    source: G,
    evolve: F,
) -> Result<State>
where
    F: Fn(&[Complex64], f64) -> Result<State> + Sync + Send,
    G: Fn(f64) -> State + Sync + Send,
{
    if !(t > 0.0 && s_end > 0.0) {
        return Err(Error::InvalidParameter(
            "retarded integral needs t > 0 and s_end > 0",
        ));
    }
    let panels = (panels.max(2) + 1) & !1;
    let top = t.min(s_end);
    let ds = top / panels as f64;
    let terms = par::try_map_range(panels + 1, |j| {
        let s = j as f64 * ds;
        evolve(&source(s), t - s)
    })?;
    let mut out = alloc::vec![ZERO; terms[0].len()];
    for (j, u) in terms.iter().enumerate() {
        let w = if j == 0 || j == panels {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let w = c(w * ds / 3.0, 0.0);
        for (o, v) in out.iter_mut().zip(u) {
            *o += w * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{evolve_kernel, KernelTables};
    use crate::jost::{Propagator, ScatteringTable};
    use crate::kernels::{kernel_kgrid, KernelSettings};
    use crate::potential::{PotentialGrid, Preset};
    use crate::spectrum::BoundStateSet;

    fn tables(pg: &PotentialGrid, bp: &BoundaryPair) -> KernelTables {
        let settings = KernelSettings::default();
        let prop = Propagator::new(pg).unwrap();
        let table =
            ScatteringTable::compute(&prop, bp, kernel_kgrid(pg.h, pg.x_max, &settings), true)
                .unwrap();
        KernelTables::new(&table, pg, &settings).unwrap()
    }

    #[test]
    fn power_fit_recovers_exact_law() {
        let ts = geometric_times(1.0, 6);
        let vs: Vec<f64> = ts.iter().map(|t| 3.0 * libm::pow(*t, -0.5)).collect();
        let f = fit_power_law(&ts, &vs).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && (libm::exp(f.intercept) - 3.0).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bending_curves_get_wider_error_bars() {
        let ts: Vec<f64> = (1..=16).map(f64::from).collect();
        let exact = DecayReport::new(
            1.0,
            ts.clone(),
            ts.iter().map(|t| libm::pow(*t, -0.5)).collect(),
        )
        .unwrap();
        assert_eq!(exact.octave_slopes().len(), 8);
        assert!(exact.slope_uncertainty() < 1e-12);
        let bent = DecayReport::new(
            1.0,
            ts.clone(),
            ts.iter()
                .map(|t| libm::pow(*t, -0.5) * (1.0 + 0.1 / t))
                .collect(),
        )
        .unwrap();
        let local = bent.octave_slopes();
        let spread = 0.5
            * (local.iter().copied().fold(f64::MIN, f64::max)
                - local.iter().copied().fold(f64::MAX, f64::min));
        assert!(
            spread > bent.fit.slope_stderr && (bent.slope_uncertainty() - spread).abs() < 1e-15
        );
    }

    #[test]
    fn admissibility_identity() {
        assert!(check_admissible_pair(8.0, 4.0).is_ok());
        assert!(check_admissible_pair(f64::INFINITY, 2.0).is_ok());
        assert!(check_admissible_pair(4.0, f64::INFINITY).is_ok());
        assert!(check_admissible_pair(6.0, 6.0).is_ok());
        assert_eq!(
            check_admissible_pair(4.0, 4.0).unwrap_err(),
            Error::NotAdmissible { q: 4.0, r: 4.0 }
        );
        assert!((conjugate(4.0 / 3.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_data_must_vanish_at_the_origin() {
        let grid = StateGrid::new(1, 0.05, 10.0).unwrap();
        let bp = BoundaryPair::dirichlet(1);
        let good = grid.from_fn(|x| CVec::from_element(1, c(x * libm::exp(-x * x), 0.0)));
        let bad = grid.from_fn(|x| CVec::from_element(1, c(libm::exp(-x * x), 0.0)));
        assert!(check_admissible(&grid, &good, &bp, ADMISSIBLE_TOL).is_ok());
        assert!(matches!(
            check_admissible(&grid, &bad, &bp, ADMISSIBLE_TOL),
            Err(Error::InadmissibleState { .. })
        ));
        assert!(check_admissible(&grid, &bad, &BoundaryPair::neumann(1), ADMISSIBLE_TOL).is_ok());
    }

    #[test]
    fn free_dirichlet_sup_kernel_is_closed_form() {
        let pg = Preset::Zero { n: 1 }.build(0.05, Some(1.0)).unwrap();
        let kt = tables(&pg, &BoundaryPair::dirichlet(1));
        let nodes = node_box(0.05, 20.0, 1);
        let report = decay_fit(&kt, &geometric_times(1.0, 5), &nodes, &nodes).unwrap();
        for (t, v) in report.ts.iter().zip(&report.values) {
            let exact = 1.0 / libm::sqrt(PI * t);
            assert!((v - exact).abs() < 1e-3 * exact, "{t} {v} {exact}");
        }
        assert!(report.slope_within(0.01), "{:?}", report.fit);
    }

    #[test]
    fn unit_pair_gives_unit_ratio_and_duhamel_reproduces_the_flow() {
        let pg = Preset::SquareWell {
            depth: -1.0,
            width: 1.0,
        }
        .build(0.05, None)
        .unwrap();
        let bp = BoundaryPair::dirichlet(1);
        let kt = tables(&pg, &bp);
        let grid = StateGrid::new(1, 0.05, 60.0).unwrap();
        let bound = BoundStateSet::empty(grid);
        let evolve =
            |psi: &[Complex64], t: f64| evolve_kernel(psi, t, &kt, &bound, &bp).map(|r| r.u);
        let phi =
            grid.from_fn(|x| CVec::from_element(1, c(x * libm::exp(-(x - 3.0) * (x - 3.0)), 0.0)));
        let w = StrichartzWindows {
            t_min: 0.1,
            first_octaves: 2,
            doublings: 1,
            per_octave: 4,
        };
        let rep = strichartz_norm(&grid, &phi, f64::INFINITY, 2.0, &w, evolve).unwrap();
        assert!((rep.ratio() - 1.0).abs() < 1e-6, "{}", rep.ratio());
        // with f(s) = e^{-isH} phi on [0, 1] the integral is e^{-itH} phi
        let t = 1.5;
        let phi_ref = &phi;
        let source = |s: f64| evolve(phi_ref, s).unwrap();
        let got = retarded_integral(t, 1.0, 16, source, evolve).unwrap();
        let want = evolve(&phi, t).unwrap();
        let err = grid.norm(&crate::state::difference(&got, &want)) / grid.norm(&want);
        assert!(err < 1e-6, "{err}");
    }
}
