//! Iterative radix-2 FFT and FFT-based linear convolution.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::linalg::ZERO;

/// In-place transform `X_m = sum_j x_j e^{sign 2 pi i j m / N}` (unnormalised).
/// `data.len()` must be a power of two.
pub fn fft_in_place(data: &mut [Complex64], sign: f64) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let half = len / 2;
        // twiddles computed directly rather than by recurrence to keep rounding flat
        let tw: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, ang * k as f64))
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let u = data[start + k];
                let v = data[start + k + half] * tw[k];
                data[start + k] = u + v;
                data[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }
}

/// `out[m] = sum_j a[j] b[m - j]` for `m = 0..a.len() + b.len() - 1`.
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = alloc::vec![ZERO; len];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let size = len.next_power_of_two();
    let mut fa = alloc::vec![ZERO; size];
    let mut fb = alloc::vec![ZERO; size];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    fft_in_place(&mut fa, -1.0);
    fft_in_place(&mut fb, -1.0);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    fft_in_place(&mut fa, 1.0);
    let scale = 1.0 / size as f64;
    fa.truncate(len);
    for x in fa.iter_mut() {
        *x *= scale;
    }
    fa
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn matches_direct_dft() {
        let n = 16;
        let x: Vec<Complex64> = (0..n)
            .map(|j| c(libm::sin(j as f64), libm::cos(0.3 * j as f64 * j as f64)))
            .collect();
        let mut y = x.clone();
        fft_in_place(&mut y, -1.0);
        for m in 0..n {
            let direct: Complex64 = (0..n)
                .map(|j| x[j] * Complex64::from_polar(1.0, -2.0 * PI * (j * m) as f64 / n as f64))
                .sum();
            assert!((direct - y[m]).norm() < 1e-12);
        }
    }

    #[test]
    fn convolution_matches_direct() {
        let a: Vec<Complex64> = (0..100).map(|j| c(j as f64 * 0.1, 1.0)).collect();
        let b: Vec<Complex64> = (0..70).map(|j| c(1.0, -(j as f64))).collect();
        let fast = convolve(&a, &b);
        for m in [0, 1, 50, 120, 168] {
            let direct: Complex64 = (0..a.len())
                .filter(|&j| m >= j && m - j < b.len())
                .map(|j| a[j] * b[m - j])
                .sum();
            assert!((direct - fast[m]).norm() < 1e-9 * direct.norm().max(1.0));
        }
    }
}
