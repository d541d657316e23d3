//! Transformation kernel `K(x, y)`, the scattering transform `F_s(y)` and
//! the Marchenko residual.
//!
//! Both kernels are inverse Fourier transforms of tables sampled on the
//! half-offset `k` grid. Their slowly decaying high-`k` parts come from a
//! jump (`K` at `y = x`, `F_s` at `y = 0`) and from kinks where the
//! reflection of a jump of `V` lands. Before the FFT these are fitted with
//! rational terms `e^{ika} / (lambda -+ ik)^m` on the upper half of the band
//! and subtracted. Each term transforms exactly to a [`Tail`]; only the smooth
//! remainder goes through the FFT.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::fresnel::MODEL_TERMS;
use crate::jost::{KGrid, ScatteringTable};
use crate::linalg::{self, c, CMat, ZERO};
use crate::par;
use crate::potential::{Moments, PotentialGrid};

#[derive(Debug, Clone, Copy)]
pub struct KernelSettings {
    /// Decay rate of the model subtracted from `d(k, x)`.
    pub lambda_k: f64,
    /// Decay rate of the model subtracted from `S(k) - S_inf`.
    pub lambda_f: f64,
    /// Fit the model on `|k| >= fit_from * k_max`.
    pub fit_from: f64,
}

impl Default for KernelSettings {
    fn default() -> Self {
        Self {
            lambda_k: 2.0,
            lambda_f: 1.0,
            fit_from: 0.5,
        }
    }
}

/// `k` grid for kernel tables of a potential on `[0, x_max]` with step `h`:
/// `k_max = pi / h`, and a period long enough for `dk * 2 x_max <= pi / 4`
/// and for the model tails to decay.
pub fn kernel_kgrid(h: f64, x_max: f64, settings: &KernelSettings) -> KGrid {
    let lam = settings.lambda_k.min(settings.lambda_f);
    let half_period = (8.0 * x_max).max(2.0 * x_max + 34.0 / lam + 4.0).max(24.0);
    let m = (libm::ceil(half_period / h) as usize).next_power_of_two();
    KGrid {
        m,
        dk: PI / (m as f64 * h),
    }
}

/// One tail `1_{y >= at} e^{-lambda s} (c_0 + c_1 s + c_2 s^2 / 2)`, `s = y - at`.
#[derive(Debug, Clone)]
pub struct Tail {
    pub at: f64,
    pub coef: [CMat; MODEL_TERMS],
}

/// Sum of [`Tail`]s with a common decay rate. Under
/// `(1 / 2 pi) int e^{sign iky} . dk` it comes from
/// `sum_m coef[m] e^{-sign ik at} / (lambda + sign ik)^{m+1}`.
#[derive(Debug, Clone)]
pub struct TailModel {
    pub n: usize,
    pub lambda: f64,
    pub tails: Vec<Tail>,
}

impl TailModel {
    pub fn zero(n: usize, lambda: f64) -> Self {
        Self {
            n,
            lambda,
            tails: Vec::new(),
        }
    }

    /// Value at `y`, closed at each tail start.
    pub fn eval(&self, y: f64) -> CMat {
        let mut out = linalg::zeros(self.n);
        for t in &self.tails {
            let s = y - t.at;
            if s < 0.0 {
                continue;
            }
            let e = libm::exp(-self.lambda * s);
            out += (&t.coef[0] + &t.coef[1] * c(s, 0.0) + &t.coef[2] * c(0.5 * s * s, 0.0))
                * c(e, 0.0);
        }
        out
    }

    pub fn spectrum(&self, k: f64, sign: f64) -> CMat {
        let inv = c(1.0, 0.0) / c(self.lambda, sign * k);
        let mut out = linalg::zeros(self.n);
        for t in &self.tails {
            let e = linalg::cis(-sign * k * t.at) * inv;
            out += (&t.coef[0] + (&t.coef[1] + &t.coef[2] * inv) * inv) * e;
        }
        out
    }
}

/// Least-squares tails starting at `starts = (at, lowest order)` (order 0 is a
/// jump, 1 a kink) for the `n x n` samples `data[j]` at `ks[j]`. A Hann taper
/// in `|k|` over the fitted band keeps the band edges from dominating.
fn fit_tails(
    ks: &[f64],
    data: &[&CMat],
    n: usize,
    starts: &[(f64, usize)],
    lambda: f64,
    sign: f64,
) -> TailModel {
    let k_lo = ks.iter().map(|k| k.abs()).fold(f64::INFINITY, f64::min);
    let k_hi = ks.iter().map(|k| k.abs()).fold(0.0, f64::max);
    let cols: Vec<(usize, usize)> = starts
        .iter()
        .enumerate()
        .flat_map(|(f, &(_, lo))| (lo..MODEL_TERMS).map(move |m| (f, m)))
        .collect();
    let mut design = CMat::zeros(ks.len(), cols.len());
    let mut rhs = CMat::zeros(ks.len(), n * n);
    for (row, &k) in ks.iter().enumerate() {
        let wt = libm::sin(PI * (k.abs() - k_lo) / (k_hi - k_lo).max(f64::MIN_POSITIVE));
        let inv = c(1.0, 0.0) / c(lambda, sign * k);
        for (q, &(f, m)) in cols.iter().enumerate() {
            let mut v = linalg::cis(-sign * k * starts[f].0) * inv;
            for _ in 0..m {
                v *= inv;
            }
            design[(row, q)] = v * wt;
        }
        for col in 0..n {
            for r in 0..n {
                rhs[(row, col * n + r)] = data[row][(r, col)] * wt;
            }
        }
    }
    let dec = design.svd(true, true);
    let eps = 1e-10 * dec.singular_values.max();
    let sol = dec
        .solve(&rhs, eps)
        .unwrap_or_else(|_| CMat::zeros(cols.len(), n * n));
    let mut tails: Vec<Tail> = starts
        .iter()
        .map(|&(at, _)| Tail {
            at,
            coef: core::array::from_fn(|_| linalg::zeros(n)),
        })
        .collect();
    for (q, &(f, m)) in cols.iter().enumerate() {
        for col in 0..n {
            for r in 0..n {
                tails[f].coef[m][(r, col)] = sol[(q, col * n + r)];
            }
        }
    }
    TailModel { n, lambda, tails }
}

/// Share of `max |V|` above which a jump of `V` gets its own kink tail.
pub(crate) const JUMP_SHARE: f64 = 0.1;
pub(crate) const MAX_JUMPS: usize = 4;

/// `max |F_s|` below which the table counts as zero.
const VANISHING: f64 = 1e-12;

/// Unnormalised DFT of the remainder; [`transformed_value`] applies the
/// half-offset phase and `dk / 2 pi` at a given `y`.
fn inverse_transform(mut data: Vec<Complex64>, sign: f64) -> Vec<Complex64> {
    fft::fft_in_place(&mut data, sign);
    data
}

/// `(dk / 2 pi) sum_j r_j e^{sign i k_j y}` for grid `y`.
fn transformed_value(kg: &KGrid, raw: &[Complex64], y: f64, h: f64, sign: f64) -> Complex64 {
    let len = raw.len() as i64;
    let l = libm::round(y / h) as i64;
    let idx = l.rem_euclid(len) as usize;
    let shift = (0.5 - kg.m as f64) * kg.dk * y;
    raw[idx] * linalg::cis(sign * shift) * (kg.dk / (2.0 * PI))
}

/// `K(x_i, x_i + s h)` for nodes `x_i = i h` inside the potential and
/// offsets `s = 0..span`; zero for `y < x` and for `x >= x_max`.
#[derive(Debug, Clone)]
pub struct KernelK {
    pub n: usize,
    pub h: f64,
    pub lambda: f64,
    pub nodes: usize,
    pub span: usize,
    tails: Vec<TailModel>,
    res: Vec<Complex64>,
    /// `max |K(x, y)|` over `y < x` before clipping, relative to `max |K|`.
    pub leakage: f64,
    pub max_abs: f64,
    /// Estimated truncation error of the band-limited transform.
    pub tol: f64,
    pub kgrid: KGrid,
}

impl KernelK {
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    fn res_index(&self, i: usize, s: usize) -> usize {
        (i * self.span + s) * self.n * self.n
    }

    pub fn model(&self, i: usize, s: usize) -> CMat {
        self.tails[i].eval(self.x(i) + s as f64 * self.h)
    }

    /// Fitted tails of row `x_i`, in absolute `y`.
    pub fn tails(&self, i: usize) -> &TailModel {
        &self.tails[i]
    }

    /// Remainder after removing the model, stored flat (column-major blocks).
    pub fn residual(&self, i: usize, s: usize) -> CMat {
        let at = self.res_index(i, s);
        CMat::from_column_slice(self.n, self.n, &self.res[at..at + self.n * self.n])
    }

    pub fn residual_entry(&self, i: usize, s: usize, r: usize, col: usize) -> Complex64 {
        self.res[self.res_index(i, s) + col * self.n + r]
    }

    /// `K(x_i, x_i + s h)`; `s = 0` is the limit from `y > x`.
    pub fn value(&self, i: usize, s: usize) -> CMat {
        if i >= self.nodes || s >= self.span {
            return linalg::zeros(self.n);
        }
        self.model(i, s) + self.residual(i, s)
    }

    /// `K(x_i, y_l)` on absolute node indices.
    pub fn at(&self, i: usize, l: usize) -> CMat {
        if l < i {
            return linalg::zeros(self.n);
        }
        self.value(i, l - i)
    }

    /// `e^{ikx} I + int_x^inf e^{iky} K(x, y) dy` at node `x_i`, with the model
    /// part integrated exactly.
    pub fn reconstruct_jost(&self, i: usize, k: f64) -> CMat {
        let x = self.x(i);
        let mut out = linalg::scaled_identity(self.n, linalg::cis(k * x));
        if i >= self.nodes {
            return out;
        }
        out += self.tails[i].spectrum(k, -1.0);
        for s in 0..self.span {
            out += self.residual(i, s) * (linalg::cis(k * (x + s as f64 * self.h)) * self.h);
        }
        out
    }

    /// `max_i |K(x_i, x_i) - 1/2 int_{x_i}^inf V|`.
    pub fn diagonal_error(&self, pg: &PotentialGrid) -> f64 {
        (0..self.nodes)
            .map(|i| {
                linalg::max_abs(&(self.value(i, 0) - pg.tail_integral(self.x(i)) * c(0.5, 0.0)))
            })
            .fold(0.0, f64::max)
    }

    /// `max |K - K^dag|` over stored nodes.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nodes {
            for s in 0..self.span {
                worst = worst.max(linalg::hermitian_residual(&self.value(i, s)));
            }
        }
        worst
    }

    /// Largest excess of `|K(x, y)|` over `1/2 e^{sigma1(x)} sigma((x + y)/2) + tol`.
    pub fn magnitude_bound_excess(&self, m: &Moments) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.nodes {
            let x = self.x(i);
            let pre = 0.5 * libm::exp(m.sigma1(x));
            for s in 0..self.span {
                let y = x + s as f64 * self.h;
                let bound = pre * m.sigma(0.5 * (x + y)) + self.tol;
                worst = worst.max(linalg::op_norm(&self.value(i, s)) - bound);
            }
        }
        worst
    }

    /// Largest excess of the one-sided `y` difference quotient over the
    /// first-derivative bound (plus `tol / h` for the difference).
    pub fn derivative_bound_excess(&self, pg: &PotentialGrid, m: &Moments) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.nodes {
            let x = self.x(i);
            let pre = 0.5 * libm::exp(m.sigma1(x)) * m.sigma(x);
            for s in 1..self.span - 1 {
                let y = x + (s as f64 + 0.5) * self.h;
                let dq =
                    linalg::op_norm(&((self.value(i, s + 1) - self.value(i, s)) / c(self.h, 0.0)));
                let mid = 0.5 * (x + y);
                let vmax = pg
                    .at(mid - 0.5 * self.h)
                    .norm()
                    .max(pg.at(mid + 0.5 * self.h).norm());
                let bound =
                    0.25 * vmax + pre * m.sigma(mid - 0.5 * self.h) + 2.0 * self.tol / self.h;
                worst = worst.max(dq - bound);
            }
        }
        worst
    }
}

/// Builds `K` from a scattering table computed with trajectories.
pub fn transformation_kernel(
    table: &ScatteringTable,
    pg: &PotentialGrid,
    settings: &KernelSettings,
) -> Result<KernelK> {
    let kg = table.kgrid;
    let first = table
        .samples
        .first()
        .and_then(|s| s.trajectory.as_ref())
        .ok_or(Error::MissingKernelTables)?;
    let h = first.h;
    let n = first.n;
    let nodes = first.nodes();
    let y_max = 2.0 * pg.x_max;
    if kg.dk * y_max > PI / 4.0 + 1e-12 {
        return Err(Error::GridTooCoarse {
            required: PI / (4.0 * y_max),
            actual: kg.dk,
        });
    }
    if (kg.y_step() - h).abs() > 1e-9 * h {
        return Err(Error::GridTooCoarse {
            required: PI / (kg.m as f64 * h),
            actual: kg.dk,
        });
    }
    let lambda = settings.lambda_k;
    let len = kg.len();
    let span = (libm::ceil((y_max + 34.0 / lambda) / h) as usize + 1).min(len / 2);
    let ks: Vec<f64> = (0..len).map(|j| kg.k(j)).collect();
    let fit_idx: Vec<usize> = (0..len)
        .filter(|&j| ks[j].abs() >= settings.fit_from * kg.k_max())
        .collect();
    let fit_k: Vec<f64> = fit_idx.iter().map(|&j| ks[j]).collect();
    let leak_window = libm::ceil(4.0 / h) as usize;
    let jumps = pg.discontinuities(JUMP_SHARE, MAX_JUMPS);

    struct Row {
        tails: TailModel,
        res: Vec<Complex64>,
        leak: f64,
        edge: f64,
    }
    let rows = par::map_range(nodes, |i| {
        let x = i as f64 * h;
        // d(k, x) = f(k, x) - e^{ikx} I
        let d: Vec<CMat> = (0..len)
            .map(|j| {
                let tr = table.samples[j].trajectory.as_ref().expect("trajectory");
                tr.f(i) - linalg::scaled_identity(n, linalg::cis(ks[j] * x))
            })
            .collect();
        // jump on the diagonal, kinks where y = 2c - x meets a jump of V at c
        let mut starts = alloc::vec![(x, 0)];
        starts.extend(
            jumps
                .iter()
                .filter(|&&cj| cj > x + 0.25 * h)
                .map(|&cj| (2.0 * cj - x, 1)),
        );
        let fit_d: Vec<&CMat> = fit_idx.iter().map(|&j| &d[j]).collect();
        let tails = fit_tails(&fit_k, &fit_d, n, &starts, lambda, -1.0);
        let rem: Vec<CMat> = (0..len)
            .map(|j| &d[j] - tails.spectrum(ks[j], -1.0))
            .collect();
        let mut res = alloc::vec![ZERO; span * n * n];
        let mut leak: f64 = 0.0;
        let mut edge: f64 = 0.0;
        for col in 0..n {
            for r in 0..n {
                let entry: Vec<Complex64> = rem.iter().map(|m| m[(r, col)]).collect();
                edge = edge.max(entry[0].norm()).max(entry[len - 1].norm());
                let raw = inverse_transform(entry, -1.0);
                for s in 0..span {
                    let y = x + s as f64 * h;
                    res[s * n * n + col * n + r] = transformed_value(&kg, &raw, y, h, -1.0);
                }
                for back in 1..=leak_window {
                    let y = x - back as f64 * h;
                    leak = leak.max(transformed_value(&kg, &raw, y, h, -1.0).norm());
                }
            }
        }
        Row {
            tails,
            res,
            leak,
            edge,
        }
    });

    let mut kernel = KernelK {
        n,
        h,
        lambda,
        nodes,
        span,
        tails: Vec::with_capacity(nodes),
        res: Vec::with_capacity(nodes * span * n * n),
        leakage: 0.0,
        max_abs: 0.0,
        tol: 0.0,
        kgrid: kg,
    };
    let mut leak: f64 = 0.0;
    let mut edge: f64 = 0.0;
    for row in rows {
        kernel.tails.push(row.tails);
        kernel.res.extend(row.res);
        leak = leak.max(row.leak);
        edge = edge.max(row.edge);
    }
    let mut max_abs: f64 = 0.0;
    for i in 0..nodes {
        for s in 0..span {
            max_abs = max_abs.max(linalg::max_abs(&kernel.value(i, s)));
        }
    }
    kernel.max_abs = max_abs;
    kernel.leakage = if max_abs > 0.0 { leak / max_abs } else { leak };
    // remainder decaying at least like 1/k^2 beyond k_max
    kernel.tol = (5.0 * edge * kg.k_max() / PI).max(1e-6);
    Ok(kernel)
}

/// `F_s(y)` on `y_l = (l - m) h`, `l = 0..2m`.
#[derive(Debug, Clone)]
pub struct FsTable {
    pub n: usize,
    pub h: f64,
    pub m: usize,
    pub lambda: f64,
    pub tails: TailModel,
    res: Vec<Complex64>,
    /// `(Y, int_{|y| <= Y} |F_s|)` on `Y = j h`.
    pub cumulative: Vec<(f64, f64)>,
    /// `(c(Y_max) - c(Y_max / 2)) / c(Y_max)` (0 when `max |F_s| <= 1e-12`).
    pub tail_ratio: f64,
    /// `max |Im F_s|`, meaningful for scalar real potentials.
    pub max_imag: f64,
    pub max_abs: f64,
}

impl FsTable {
    pub fn y(&self, l: usize) -> f64 {
        (l as f64 - self.m as f64) * self.h
    }

    pub fn len(&self) -> usize {
        2 * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn y_max(&self) -> f64 {
        self.m as f64 * self.h
    }

    pub fn residual(&self, l: usize) -> CMat {
        let nn = self.n * self.n;
        CMat::from_column_slice(self.n, self.n, &self.res[l * nn..(l + 1) * nn])
    }

    /// Model part, taking half the jump at 0.
    pub fn model(&self, y: f64) -> CMat {
        let mut out = self.tails.eval(y);
        if y == 0.0 {
            out -= &self.tails.tails[0].coef[0] * c(0.5, 0.0);
        }
        out
    }

    /// `F_s` at grid index `l`.
    pub fn value(&self, l: usize) -> CMat {
        self.model(self.y(l)) + self.residual(l)
    }

    /// `F_s(y)` for `y` on the grid; zero outside the table.
    pub fn at(&self, y: f64) -> CMat {
        let l = libm::round(y / self.h + self.m as f64);
        if l < 0.0 || l >= self.len() as f64 {
            return linalg::zeros(self.n);
        }
        self.value(l as usize)
    }

    /// `F_s(y)` for `y > 0` on the grid, taking the one-sided value at `0+`.
    pub fn at_positive(&self, y: f64) -> CMat {
        if y == 0.0 {
            return self.model(1e-300) + self.residual(self.m);
        }
        self.at(y)
    }
}

pub fn fs_transform(
    table: &ScatteringTable,
    pg: &PotentialGrid,
    settings: &KernelSettings,
) -> Result<FsTable> {
    let kg = table.kgrid;
    let h = pg.h;
    if (kg.y_step() - h).abs() > 1e-9 * h {
        return Err(Error::GridTooCoarse {
            required: PI / (kg.m as f64 * h),
            actual: kg.dk,
        });
    }
    let n = table.n();
    let len = kg.len();
    let lambda = settings.lambda_f;
    let ks: Vec<f64> = (0..len).map(|j| kg.k(j)).collect();
    let fit_idx: Vec<usize> = (0..len)
        .filter(|&j| ks[j].abs() >= settings.fit_from * kg.k_max())
        .collect();
    let fit_k: Vec<f64> = fit_idx.iter().map(|&j| ks[j]).collect();
    let t: Vec<CMat> = table.s.iter().map(|sk| sk - &table.s_inf).collect();
    let mut starts = alloc::vec![(0.0, 0)];
    starts.extend(
        pg.discontinuities(JUMP_SHARE, MAX_JUMPS)
            .into_iter()
            .map(|cj| (2.0 * cj, 1)),
    );
    let fit_t: Vec<&CMat> = fit_idx.iter().map(|&j| &t[j]).collect();
    let tails = fit_tails(&fit_k, &fit_t, n, &starts, lambda, 1.0);
    let rem: Vec<CMat> = (0..len)
        .map(|j| &t[j] - tails.spectrum(ks[j], 1.0))
        .collect();
    let nn = n * n;
    let mut res = alloc::vec![ZERO; len * nn];
    for col in 0..n {
        for r in 0..n {
            let entry: Vec<Complex64> = rem.iter().map(|m| m[(r, col)]).collect();
            let raw = inverse_transform(entry, 1.0);
            for l in 0..len {
                let y = (l as f64 - kg.m as f64) * h;
                res[l * nn + col * n + r] = transformed_value(&kg, &raw, y, h, 1.0);
            }
        }
    }
    let mut fs = FsTable {
        n,
        h,
        m: kg.m,
        lambda,
        tails,
        res,
        cumulative: Vec::new(),
        tail_ratio: 0.0,
        max_imag: 0.0,
        max_abs: 0.0,
    };
    let norms: Vec<f64> = (0..len).map(|l| linalg::op_norm(&fs.value(l))).collect();
    fs.max_abs = norms.iter().copied().fold(0.0, f64::max);
    fs.max_imag = (0..len)
        .map(|l| fs.value(l).iter().map(|z| z.im.abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let m = kg.m;
    let mut acc = 0.0;
    fs.cumulative.push((0.0, 0.0));
    for j in 1..m {
        // trapezoid on [-(j) h, -(j-1) h] and [(j-1) h, j h]
        acc += 0.5 * h * (norms[m + j - 1] + norms[m + j] + norms[m - j + 1] + norms[m - j]);
        fs.cumulative.push((j as f64 * h, acc));
    }
    let total = acc;
    let half = fs.cumulative[(m - 1) / 2].1;
    // a table at round-off level is F_s = 0, and its ratio would measure noise
    fs.tail_ratio = if fs.max_abs > VANISHING {
        (total - half) / total
    } else {
        0.0
    };
    Ok(fs)
}

/// `F(y) = F_s(y) + sum_j M_j^2 e^{-kappa_j y}` for `y > 0`.
#[derive(Debug, Clone)]
pub struct AssembledF {
    pub fs: FsTable,
    /// `(kappa_j, M_j^2)`.
    pub terms: Vec<(f64, CMat)>,
    /// Set when the `M_j^2` came from a least-squares fit.
    pub fitted: bool,
}

impl AssembledF {
    /// Requires `M_j^2` for every bound state unless there are none.
    pub fn new(fs: FsTable, kappas: &[f64], m2: Option<Vec<CMat>>) -> Result<Self> {
        match m2 {
            None if !kappas.is_empty() => Err(Error::MissingNormalization),
            None => Ok(Self {
                fs,
                terms: Vec::new(),
                fitted: false,
            }),
            Some(m) => {
                if m.len() != kappas.len() {
                    return Err(Error::MissingNormalization);
                }
                Ok(Self {
                    fs,
                    terms: kappas.iter().copied().zip(m).collect(),
                    fitted: false,
                })
            }
        }
    }

    pub fn value(&self, y: f64) -> CMat {
        let mut f = self.fs.at_positive(y);
        for (kappa, m2) in &self.terms {
            f += m2 * c(libm::exp(-kappa * y), 0.0);
        }
        f
    }

    pub fn sup(&self) -> f64 {
        (self.fs.m..self.fs.len())
            .map(|l| linalg::op_norm(&self.value(self.fs.y(l))))
            .fold(0.0, f64::max)
    }
}

/// Node ranges used by the Marchenko check: `x_i` for `i < nodes` and
/// `y_l` with `i < l` and `y <= y_max`.
fn marchenko_y_range(kernel: &KernelK, fs: &FsTable, i: usize) -> (usize, usize) {
    let y_hi = (2 * (kernel.nodes - 1)).max(i + 1);
    let cap = fs.m.saturating_sub(1);
    (i + 1, y_hi.min(cap))
}

/// `t` nodes `x_i .. x_i + span` truncated so that `t + y` stays in the table.
fn t_range(kernel: &KernelK, fs: &FsTable, i: usize, l: usize) -> usize {
    let table_end = fs.m.saturating_sub(1);
    kernel.span.min(table_end.saturating_sub(i + l) + 1)
}

/// `R(x, y) = K(x, y) + F(x + y) + int_x^inf K(x, t) F(t + y) dt` on nodes,
/// returning `sup_y |R|` per `x` node.
pub fn marchenko_residual(kernel: &KernelK, f: &AssembledF) -> Vec<(f64, f64)> {
    let h = kernel.h;
    par::map_range(kernel.nodes, |i| {
        let x = kernel.x(i);
        let (lo, hi) = marchenko_y_range(kernel, &f.fs, i);
        let mut worst: f64 = 0.0;
        for l in lo..=hi {
            let y = l as f64 * h;
            let mut r = kernel.at(i, l) + f.value(x + y);
            let tmax = t_range(kernel, &f.fs, i, l);
            for s in 0..tmax {
                let w = if s == 0 || s + 1 == tmax { 0.5 * h } else { h };
                r += kernel.value(i, s) * f.value(x + s as f64 * h + y) * c(w, 0.0);
            }
            worst = worst.max(linalg::op_norm(&r));
        }
        (x, worst)
    })
}

/// Least-squares `M_j^2` minimising the Marchenko residual over the same
/// nodes `marchenko_residual` inspects. The result is marked `fitted`.
pub fn fit_normalizations(kernel: &KernelK, fs: FsTable, kappas: &[f64]) -> Result<AssembledF> {
    let n = kernel.n;
    let h = kernel.h;
    let base = AssembledF {
        fs,
        terms: Vec::new(),
        fitted: false,
    };
    if kappas.is_empty() {
        return Ok(base);
    }
    let nk = kappas.len();
    // rows: (sample, matrix row); unknowns per column: nk * n
    let mut design: Vec<Vec<Complex64>> = Vec::new();
    let mut rhs: Vec<Vec<Complex64>> = alloc::vec![Vec::new(); n];
    let stride = (kernel.nodes / 40).max(1);
    for i in (0..kernel.nodes).step_by(stride) {
        let x = kernel.x(i);
        let (lo, hi) = marchenko_y_range(kernel, &base.fs, i);
        let l_stride = ((hi.saturating_sub(lo)) / 40).max(1);
        // L_j(x) = e^{-kappa x} I + int K(x, t) e^{-kappa t} dt
        let lj: Vec<CMat> = kappas
            .iter()
            .map(|&kappa| {
                let mut acc = linalg::scaled_identity(n, c(libm::exp(-kappa * x), 0.0));
                for s in 0..kernel.span {
                    let w = if s == 0 || s + 1 == kernel.span {
                        0.5 * h
                    } else {
                        h
                    };
                    let t = x + s as f64 * h;
                    acc += kernel.value(i, s) * c(w * libm::exp(-kappa * t), 0.0);
                }
                acc
            })
            .collect();
        for l in (lo..=hi).step_by(l_stride) {
            let y = l as f64 * h;
            let mut r0 = kernel.at(i, l) + base.value(x + y);
            let tmax = t_range(kernel, &base.fs, i, l);
            for s in 0..tmax {
                let w = if s == 0 || s + 1 == tmax { 0.5 * h } else { h };
                r0 += kernel.value(i, s) * base.value(x + s as f64 * h + y) * c(w, 0.0);
            }
            for row in 0..n {
                let mut coeffs = Vec::with_capacity(nk * n);
                for (j, &kappa) in kappas.iter().enumerate() {
                    let e = libm::exp(-kappa * y);
                    for q in 0..n {
                        coeffs.push(lj[j][(row, q)] * e);
                    }
                }
                design.push(coeffs);
                for col in 0..n {
                    rhs[col].push(-r0[(row, col)]);
                }
            }
        }
    }
    let rows = design.len();
    let mat = CMat::from_fn(rows, nk * n, |r, q| design[r][q]);
    let dec = mat.svd(true, true);
    let mut terms: Vec<(f64, CMat)> = kappas.iter().map(|&k| (k, linalg::zeros(n))).collect();
    for col in 0..n {
        let b = linalg::CVec::from_vec(rhs[col].clone());
        let sol = dec
            .solve(&b, 1e-12)
            .map_err(|_| Error::MissingNormalization)?;
        for j in 0..nk {
            for q in 0..n {
                terms[j].1[(q, col)] = sol[j * n + q];
            }
        }
    }
    Ok(AssembledF {
        fs: base.fs,
        terms,
        fitted: true,
    })
}
