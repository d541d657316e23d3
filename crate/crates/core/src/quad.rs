//! Quadrature weights on equispaced nodes for integrands that are smooth
//! between known break points (jumps or kinks), which need not be nodes.

use alloc::vec::Vec;

const GREGORY: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];

/// 4-point Gauss-Legendre on `[-1, 1]`.
const GL_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Adds to `w[first..first + m]` the weights of `int_a^b p`, where `p`
/// interpolates the samples at nodes `first .. first + m` (`x_j = x0 + j h`).
fn add_interpolant(w: &mut [f64], x0: f64, h: f64, first: usize, m: usize, a: f64, b: f64) {
    if m == 0 || b <= a {
        return;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    // the interpolant has degree <= 6 here; two Gauss panels keep it exact
    for panel in 0..2 {
        let pm = mid + (panel as f64 - 0.5) * half;
        let ph = 0.5 * half;
        for (gx, gw) in GL_X.iter().zip(GL_W) {
            let x = pm + gx * ph;
            let s = (x - x0) / h - first as f64;
            for k in 0..m {
                let mut l = 1.0;
                for q in 0..m {
                    if q != k {
                        l *= (s - q as f64) / (k as f64 - q as f64);
                    }
                }
                w[first + k] += gw * ph * l;
            }
        }
    }
}

/// Weights for `int_a^b g` with `g` smooth on `[a, b]`, using the nodes of
/// `[0, count)` that lie in `[a, b]`; adds into `w`.
fn add_segment(w: &mut [f64], x0: f64, h: f64, count: usize, a: f64, b: f64) {
    if b <= a || count == 0 {
        return;
    }
    let lo = libm::ceil((a - x0) / h - 1e-9).max(0.0) as usize;
    let hi_f = libm::floor((b - x0) / h + 1e-9);
    if hi_f < 0.0 {
        return;
    }
    let hi = (hi_f as usize).min(count - 1);
    if lo > hi {
        // no node inside: interpolate linearly from the neighbours
        let left = lo.saturating_sub(1).min(count - 1);
        let first = left.min(count.saturating_sub(2));
        add_interpolant(w, x0, h, first, count.min(2), a, b);
        return;
    }
    let m = hi - lo + 1;
    if m < 8 {
        add_interpolant(w, x0, h, lo, m, a, b);
        return;
    }
    for s in 0..m {
        let from_lo = GREGORY.get(s).copied().unwrap_or(1.0);
        let from_hi = GREGORY.get(m - 1 - s).copied().unwrap_or(1.0);
        // interior nodes have weight 1 from both rules
        w[lo + s] += (from_lo + from_hi - 1.0) * h;
    }
    let xl = x0 + lo as f64 * h;
    let xh = x0 + hi as f64 * h;
    add_interpolant(w, x0, h, lo, 4, a, xl);
    add_interpolant(w, x0, h, hi - 3, 4, xh, b);
}

/// Weights on nodes `x_j = x0 + j h`, `j < count`, for `int_a^b g` where `g`
/// is smooth between the `breaks`. Node values at a break belong to both
/// sides, so only continuous breaks may fall on interior nodes; a jump may
/// sit at `a` or `b`.
pub fn piecewise_weights(
    x0: f64,
    h: f64,
    count: usize,
    a: f64,
    b: f64,
    breaks: &[f64],
) -> Vec<f64> {
    let mut w = alloc::vec![0.0; count];
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&p| p > a + 1e-9 * h && p < b - 1e-9 * h)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut left = a;
    for &cut in cuts.iter().chain(core::iter::once(&b)) {
        add_segment(&mut w, x0, h, count, left, cut);
        left = cut;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(w: &[f64], x0: f64, h: f64, g: impl Fn(f64) -> f64) -> f64 {
        w.iter()
            .enumerate()
            .map(|(j, wj)| wj * g(x0 + j as f64 * h))
            .sum()
    }

    #[test]
    fn kink_between_nodes_is_integrated_to_high_order() {
        // g = e^{-x} + max(x - p, 0)^1 e^{-(x-p)}, kink at p off the grid
        let p = 0.737;
        let g = |x: f64| {
            libm::exp(-x)
                + if x > p {
                    (x - p) * libm::exp(-(x - p))
                } else {
                    0.0
                }
        };
        let b = 3.0;
        let exact = (1.0 - libm::exp(-b)) + (1.0 - libm::exp(-(b - p)) * (1.0 + b - p));
        let mut errs = Vec::new();
        for h in [0.05, 0.025] {
            let count = libm::round(b / h) as usize + 1;
            let w = piecewise_weights(0.0, h, count, 0.0, b, &[p]);
            errs.push((integrate(&w, 0.0, h, g) - exact).abs());
        }
        assert!(errs[0] < 1e-7 && errs[0] / errs[1] > 12.0, "{errs:?}");
    }

    #[test]
    fn short_and_empty_segments() {
        let h = 0.1;
        // segments with at least four nodes are exact for cubics
        let w = piecewise_weights(0.0, h, 11, 0.0, 1.0, &[0.33]);
        let v = integrate(&w, 0.0, h, |x| x * x * x);
        assert!((v - 0.25).abs() < 1e-13, "{v}");
        // a node-free sliver and a two-node end fall back to linear pieces
        let w = piecewise_weights(0.0, h, 11, 0.0, 1.0, &[0.33, 0.36, 0.9]);
        let v = integrate(&w, 0.0, h, |x| x * x);
        assert!((v - 1.0 / 3.0).abs() < h * h * h, "{v}");
    }
}
