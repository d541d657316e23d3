//! Reference computations that share no code with the solvers: plane-wave
//! amplitude matching for scalar piecewise-constant problems, the square
//! well's transcendental equation, delta-interaction matching and closed-form
//! free Gaussian evolution. The acceptance suite compares against these.

use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Scalar piecewise-constant profile: `values[i]` on `[edges[i], edges[i+1])`,
/// zero outside `[edges[0], edges.last()]`.
#[derive(Debug, Clone)]
pub struct Steps {
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl Steps {
    pub fn new(edges: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(edges.len(), values.len() + 1);
        Self { edges, values }
    }

    pub fn square(value: f64, width: f64) -> Self {
        Self::new(vec![0.0, width], vec![value])
    }

    /// Value at `x`; on an edge, the mean of the two sides.
    pub fn at(&self, x: f64) -> f64 {
        let side = |y: f64| {
            (0..self.values.len())
                .find(|&i| y >= self.edges[i] && y < self.edges[i + 1])
                .map_or(0.0, |i| self.values[i])
        };
        let on_edge = self.edges.iter().any(|e| (x - e).abs() < 1e-12);
        if on_edge {
            0.5 * (side(x - 1e-9) + side(x + 1e-9))
        } else {
            side(x)
        }
    }
}

/// Local wavenumber `sqrt(k^2 - v)` on the branch with `Im q >= 0`.
fn local_q(k2: Complex64, v: f64) -> Complex64 {
    let q = (k2 - v).sqrt();
    if q.im < 0.0 {
        -q
    } else {
        q
    }
}

/// Value and derivative of `a e^{iqx} + b e^{-iqx}`.
fn eval(a: Complex64, b: Complex64, q: Complex64, x: f64) -> (Complex64, Complex64) {
    let ep = (I * q * x).exp();
    let em = (-I * q * x).exp();
    (a * ep + b * em, I * q * (a * ep - b * em))
}

/// Amplitudes `(a, b)` with `a e^{iqx} + b e^{-iqx}` matching `(f, fp)` at `x`.
fn amplitudes(f: Complex64, fp: Complex64, q: Complex64, x: f64) -> (Complex64, Complex64) {
    let d = fp / (I * q);
    (
        0.5 * (f + d) * (-I * q * x).exp(),
        0.5 * (f - d) * (I * q * x).exp(),
    )
}

/// `(f(k, x0), f'(k, x0))` for the solution equal to `e^{ikx}` right of
/// the profile, with optional point couplings `(x_p, lambda)` that impose
/// `f'(x_p+) - f'(x_p-) = lambda f(x_p)`. `k` may be complex.
pub fn plane_wave_match(
    k: Complex64,
    steps: &Steps,
    deltas: &[(f64, f64)],
    x0: f64,
) -> (Complex64, Complex64) {
    let k2 = k * k;
    let mut cuts: Vec<f64> = steps.edges.iter().copied().filter(|&e| e > x0).collect();
    cuts.extend(deltas.iter().map(|d| d.0).filter(|&e| e > x0));
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let value_at = |x: f64| {
        steps
            .values
            .iter()
            .enumerate()
            .find(|(i, _)| x >= steps.edges[*i] && x < steps.edges[*i + 1])
            .map_or(0.0, |(_, v)| *v)
    };
    let start = cuts.first().copied().unwrap_or(x0).max(x0) + 1.0;
    let mut q = local_q(k2, value_at(start));
    let (mut a, mut b) = amplitudes(
        (I * k * start).exp(),
        I * k * (I * k * start).exp(),
        q,
        start,
    );
    for &cut in &cuts {
        let (f, mut fp) = eval(a, b, q, cut);
        for &(xp, lam) in deltas {
            if xp == cut {
                fp -= lam * f;
            }
        }
        let mid = 0.5 * (cut + cuts.iter().copied().find(|&c| c < cut).unwrap_or(x0));
        let below = if mid < cut { mid } else { cut - 1e-12 };
        q = local_q(k2, value_at(below));
        let ab = amplitudes(f, fp, q, cut);
        a = ab.0;
        b = ab.1;
    }
    eval(a, b, q, x0)
}

/// Scalar `J(k) = conj(f(-k*, 0)) B - conj(f'(-k*, 0)) A`.
pub fn scalar_jost(k: Complex64, steps: &Steps, a: f64, b: f64) -> Complex64 {
    let (f, fp) = plane_wave_match(-k.conj(), steps, &[], 0.0);
    f.conj() * b - fp.conj() * a
}

/// `S(k) = -J(-k) / J(k)` for real `k`.
pub fn scalar_s(k: f64, steps: &Steps, a: f64, b: f64) -> Complex64 {
    let kc = Complex64::new(k, 0.0);
    -scalar_jost(-kc, steps, a, b) / scalar_jost(kc, steps, a, b)
}

/// Bound-state `kappa` of the Dirichlet square well `V = -depth` on
/// `[0, width]`: roots of `q cos(q w) + kappa sin(q w)`, `q^2 = depth - kappa^2`.
pub fn square_well_dirichlet_kappas(depth: f64, width: f64) -> Vec<f64> {
    let g = |kappa: f64| {
        let q = (depth - kappa * kappa).max(0.0).sqrt();
        q * (q * width).cos() + kappa * (q * width).sin()
    };
    let top = depth.sqrt();
    let n = 200_000;
    let mut roots = Vec::new();
    let mut prev = (1e-12, g(1e-12));
    for i in 1..n {
        let x = top * i as f64 / n as f64;
        let gx = g(x);
        if gx == 0.0 || gx.signum() != prev.1.signum() {
            let (mut lo, mut hi) = (prev.0, x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid).signum() == g(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = (x, gx);
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

/// Line reflection and transmission `(r, t)` for incidence from the left:
/// `e^{ikx} + r e^{-ikx}` on the left, `t e^{ikx}` on the right.
pub fn line_coefficients(k: f64, steps: &Steps, deltas: &[(f64, f64)]) -> (Complex64, Complex64) {
    let kc = Complex64::new(k, 0.0);
    let left = steps
        .edges
        .first()
        .copied()
        .unwrap_or(0.0)
        .min(deltas.iter().map(|d| d.0).fold(0.0, f64::min))
        - 1.0;
    let (f, fp) = plane_wave_match(kc, steps, deltas, left);
    let (a, b) = amplitudes(f, fp, kc, left);
    (b / a, Complex64::new(1.0, 0.0) / a)
}

/// Delta coupling `lambda` at the origin on the free line, condition
/// `psi'(0+) - psi'(0-) = lambda psi(0)`: `(r, t)` in closed form.
pub fn delta_coefficients(k: f64, lambda: f64) -> (Complex64, Complex64) {
    let den = Complex64::new(-lambda, 2.0 * k);
    (lambda / den, Complex64::new(0.0, 2.0 * k) / den)
}

/// Free-line evolution of `exp(-a (x - x0)^2 + i k0 (x - x0))` under
/// `i u_t = -u_xx`.
pub fn free_gaussian(a: f64, x0: f64, k0: f64, t: f64, x: f64) -> Complex64 {
    let den = Complex64::new(1.0, 4.0 * a * t);
    let y = x - x0;
    let num = Complex64::new(-a * y * y, k0 * y - k0 * k0 * t);
    (num / den).exp() / den.sqrt()
}

/// Half-line evolution by images: `sign = -1` for Dirichlet, `+1` for Neumann.
pub fn image_gaussian(a: f64, x0: f64, k0: f64, t: f64, x: f64, sign: f64) -> Complex64 {
    // mirror packet: exp(-a (x + x0)^2 - i k0 (x + x0))
    free_gaussian(a, x0, k0, t, x) + sign * free_gaussian(a, -x0, -k0, t, x)
}

/// `int G_t(u - z) F(z) dz` over `[0, z_max]` by composite Simpson with
/// `G_t(z) = e^{iz^2/4t} / sqrt(4 pi i t)`.
pub fn fresnel_simpson(
    t: f64,
    u: f64,
    f: impl Fn(f64) -> f64,
    z_max: f64,
    panels: usize,
) -> Complex64 {
    let panels = panels + panels % 2;
    let dz = z_max / panels as f64;
    let pref = Complex64::new(0.0, 4.0 * std::f64::consts::PI * t).sqrt();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..=panels {
        let z = i as f64 * dz;
        let w = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * f(z) * (I * (u - z) * (u - z) / (4.0 * t)).exp();
    }
    acc * dz / 3.0 / pref
}

/// Free half-line `F_s` for the scalar condition `A = -sin(theta)`,
/// `B = cos(theta)` with `0 < theta < pi/2`: here `S(k) - 1 = -2 kappa /
/// (kappa + ik)` with `kappa = cot(theta)`, whose transform is
/// `-2 kappa e^{-kappa y}` for `y > 0`. At `y = 0` this returns the value
/// at `0+`, as quadratures over `[0, inf)` need.
pub fn free_mixed_fs(theta: f64, y: f64) -> f64 {
    let kappa = 1.0 / theta.tan();
    if y >= 0.0 {
        -2.0 * kappa * (-kappa * y).exp()
    } else {
        0.0
    }
}

/// Crank-Nicolson for `i u_t = -u_xx + q(x) u` on `[-l, l]` with `u = 0` at
/// both ends and the jump `u'(0+) - u'(0-) = lambda u(0)`, on nodes
/// `x_j = -l + j h` (`2l / h` must be an even integer so 0 is a node).
/// Returns the nodes and `u(t)`.
pub fn line_crank_nicolson(
    q: impl Fn(f64) -> f64,
    lambda: f64,
    h: f64,
    l: f64,
    u0: impl Fn(f64) -> Complex64,
    t: f64,
    dt: f64,
) -> (Vec<f64>, Vec<Complex64>) {
    let cells = (2.0 * l / h).round() as usize;
    assert!(cells.is_multiple_of(2) && cells >= 4);
    let xs: Vec<f64> = (0..=cells).map(|j| -l + j as f64 * h).collect();
    let m = cells - 1;
    // H = tridiag(-1, 2 + h^2 q, -1) / h^2 on the interior nodes
    let diag: Vec<f64> = (1..cells)
        .map(|j| {
            let delta = if j == cells / 2 { lambda / h } else { 0.0 };
            2.0 / (h * h) + q(xs[j]) + delta
        })
        .collect();
    let off = -1.0 / (h * h);
    let steps = (t / dt).ceil().max(1.0) as usize;
    let tau = t / steps as f64;
    let a = I * (0.5 * tau);
    let mut u: Vec<Complex64> = (1..cells).map(|j| u0(xs[j])).collect();
    // (1 + a H) u+ = (1 - a H) u, Thomas sweep with fixed coefficients
    let mut cp = vec![Complex64::new(0.0, 0.0); m];
    let mut denom = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..m {
        let b = 1.0 + a * diag[j];
        let lower = if j > 0 {
            a * off * cp[j - 1]
        } else {
            Complex64::new(0.0, 0.0)
        };
        denom[j] = b - lower;
        cp[j] = a * off / denom[j];
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); m];
    for _ in 0..steps {
        for j in 0..m {
            let mut hu = diag[j] * u[j];
            if j > 0 {
                hu += off * u[j - 1];
            }
            if j + 1 < m {
                hu += off * u[j + 1];
            }
            rhs[j] = u[j] - a * hu;
        }
        for j in 0..m {
            let prev = if j > 0 {
                a * off * rhs[j - 1]
            } else {
                Complex64::new(0.0, 0.0)
            };
            rhs[j] = (rhs[j] - prev) / denom[j];
        }
        for j in (0..m.saturating_sub(1)).rev() {
            let next = rhs[j + 1];
            rhs[j] -= cp[j] * next;
        }
        u.copy_from_slice(&rhs);
    }
    let mut out = Vec::with_capacity(cells + 1);
    out.push(Complex64::new(0.0, 0.0));
    out.extend(u);
    out.push(Complex64::new(0.0, 0.0));
    (xs, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_profile_gives_plane_wave() {
        let s = Steps::new(vec![0.0, 1.0], vec![0.0]);
        let (f, fp) = plane_wave_match(Complex64::new(1.3, 0.0), &s, &[], 0.2);
        let e = (I * 1.3 * 0.2).exp();
        assert!((f - e).norm() < 1e-14 && (fp - I * 1.3 * e).norm() < 1e-14);
    }

    #[test]
    fn delta_matching_agrees_with_closed_form() {
        for lam in [1.5, -0.7] {
            for k in [0.5, 1.0, 2.0] {
                let (r, t) =
                    line_coefficients(k, &Steps::new(vec![0.0, 0.0], vec![0.0]), &[(0.0, lam)]);
                let (r0, t0) = delta_coefficients(k, lam);
                assert!((r - r0).norm() < 1e-12 && (t - t0).norm() < 1e-12);
                assert!((r.norm_sqr() + t.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_solves_schrodinger() {
        let (a, x0, k0) = (0.7, 1.0, 1.5);
        let (t, x, d) = (0.8, 0.3, 1e-3);
        let u = |t: f64, x: f64| free_gaussian(a, x0, k0, t, x);
        let ut = (u(t + d, x) - u(t - d, x)) / (2.0 * d);
        let uxx = (u(t, x + d) - 2.0 * u(t, x) + u(t, x - d)) / (d * d);
        assert!((I * ut + uxx).norm() < 1e-5);
    }

    #[test]
    fn crank_nicolson_moves_a_free_packet() {
        let (a, x0, k0, t) = (0.5, -2.0, 1.5, 1.0);
        let (xs, u) = line_crank_nicolson(
            |_| 0.0,
            0.0,
            0.01,
            30.0,
            |x| free_gaussian(a, x0, k0, 0.0, x),
            t,
            1e-3,
        );
        let err = xs
            .iter()
            .zip(&u)
            .map(|(&x, v)| (v - free_gaussian(a, x0, k0, t, x)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }
}
