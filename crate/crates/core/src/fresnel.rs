//! Free Schrodinger propagator and its action on exponential model tails.
//!
//! `G_t(z) = e^{i z^2 / 4t} / sqrt(4 pi i t)` is the kernel of `e^{-it H_0}`
//! on the line. Convolving it with `1_{z >= 0} e^{-lambda z}` (or
//! `z e^{-lambda z}`) is done in `k`: the integrand
//! `e^{-itk^2 + ikv} / (k - p)^m` is integrated along the steepest-descent
//! line through the saddle `v / 2t`, plus the residue of any pole swept
//! over. On that line the integrand is a Gaussian, so the trapezoid rule
//! converges geometrically.

use core::f64::consts::{FRAC_1_SQRT_2, PI};
use num_complex::Complex64;

use crate::linalg::{c, I};

/// `e^{i z^2 / 4t} / sqrt(4 pi i t)`.
pub fn kernel(t: f64, z: f64) -> Complex64 {
    (I * (z * z / (4.0 * t))).exp() / c(0.0, 4.0 * PI * t).sqrt()
}

/// `sqrt(pi / (i t))`, the prefactor of the free kernel pieces.
pub fn free_prefactor(t: f64) -> Complex64 {
    (c(PI, 0.0) / c(0.0, t)).sqrt()
}

/// Number of terms in the rational tail models.
pub const MODEL_TERMS: usize = 3;

/// `(1 / 2 pi) int_R e^{-itk^2 + ikv} (k - p)^{-m} dk` for `m = 1..=3`, `t > 0`.
pub fn pole_integrals(t: f64, v: f64, p: Complex64) -> [Complex64; MODEL_TERMS] {
    debug_assert!(t > 0.0);
    let rot = Complex64::from_polar(1.0, -PI / 4.0);
    let saddle = v / (2.0 * t);
    let width = 1.0 / libm::sqrt(t);
    let min_gap = 0.5 * width;

    // distance of the pole from the line in the line parameter
    let gap = |k0: f64| ((p - k0) * rot.conj()).im;
    let mut c0 = 0.0;
    let g0 = gap(saddle);
    if g0.abs() < min_gap {
        let side = if g0 >= 0.0 { 1.0 } else { -1.0 };
        c0 = core::f64::consts::SQRT_2 * (g0 - side * min_gap);
    }
    let k0 = saddle + c0;
    let d = gap(k0).abs();

    let phase = (I * (v * v / (4.0 * t))).exp();
    let center = -c0 * FRAC_1_SQRT_2;
    let reach = libm::sqrt(40.0 / t) + c0.abs();
    let step = (0.5 * width).min(d / 6.0);
    let count = libm::ceil(reach / step) as i64;
    let mut out = [c(0.0, 0.0); MODEL_TERMS];
    for j in -count..=count {
        let rho = center + j as f64 * step;
        let w = c0 + rot * rho;
        let g = phase * (-I * t * w * w).exp();
        let inv = c(1.0, 0.0) / (c(saddle, 0.0) + w - p);
        let mut term = g;
        for o in out.iter_mut() {
            term *= inv;
            *o += term;
        }
    }
    for o in out.iter_mut() {
        *o *= rot * step;
    }

    let lower_right = p.im < 0.0 && p.re > k0 - p.im;
    let upper_left = p.im > 0.0 && p.re < k0 - p.im;
    if lower_right || upper_left {
        let g = (-I * t * p * p + I * p * v).exp();
        let slope = -2.0 * I * t * p + I * v;
        // g, g', g''/2 at the pole
        let res = [g, slope * g, 0.5 * (slope * slope - 2.0 * I * t) * g];
        let sign = if upper_left { 1.0 } else { -1.0 };
        for (o, r) in out.iter_mut().zip(res) {
            *o += sign * 2.0 * PI * I * r;
        }
    }
    for o in out.iter_mut() {
        *o /= 2.0 * PI;
    }
    out
}

/// `w[m] = int_0^inf G_t(u - z) e^{-lambda z} z^m / m! dz`, `t > 0`, `lambda > 0`.
pub fn tail_weights(t: f64, u: f64, lambda: f64) -> [Complex64; MODEL_TERMS] {
    // 1/(lambda - ik)^m = i^m / (k - p)^m with p = -i lambda
    let mut ints = pole_integrals(t, -u, c(0.0, -lambda));
    let mut im = c(1.0, 0.0);
    for w in ints.iter_mut() {
        im *= I;
        *w *= im;
    }
    ints
}

/// `int_0^inf G_t(u - z) e^{-lambda z} sum_m coef[m] z^m / m! dz`.
pub fn exp_tail(t: f64, u: f64, lambda: f64, coef: &[Complex64; MODEL_TERMS]) -> Complex64 {
    tail_weights(t, u, lambda)
        .iter()
        .zip(coef)
        .map(|(w, c)| w * c)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(t: f64, u: f64, f: impl Fn(f64) -> f64, z_max: f64, panels: usize) -> Complex64 {
        let dz = z_max / panels as f64;
        let mut acc = c(0.0, 0.0);
        for i in 0..=panels {
            let z = i as f64 * dz;
            let w = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += kernel(t, u - z) * (w * f(z));
        }
        acc * (dz / 3.0)
    }

    #[test]
    fn exponential_tail_matches_quadrature() {
        let unit = |m: usize| {
            let mut coef = [c(0.0, 0.0); MODEL_TERMS];
            coef[m] = c(1.0, 0.0);
            coef
        };
        for &t in &[0.5, 1.0, 4.0, 64.0] {
            for &u in &[-6.0, -1.0, 0.0, 0.3, 2.0, 9.0] {
                for &lambda in &[1.0, 2.5] {
                    for m in 0..MODEL_TERMS {
                        let fact = [1.0, 1.0, 2.0][m];
                        let fast = exp_tail(t, u, lambda, &unit(m));
                        let slow = simpson(
                            t,
                            u,
                            |z| libm::pow(z, m as f64) / fact * libm::exp(-lambda * z),
                            40.0,
                            400_000,
                        );
                        assert!(
                            (fast - slow).norm() < 1e-9,
                            "m={m} t={t} u={u} l={lambda}: {fast} {slow}"
                        );
                    }
                }
            }
        }
    }
}
