//! Discrete Fourier transforms of arbitrary length.
//!
//! [`fft_bluestein`] rewrites the length-T DFT as a chirp-modulated circular
//! convolution and evaluates that convolution with a radix-2 FFT at the next
//! power of two `M >= 2T - 1`. [`dft_naive`] is the O(T²) reference.

use std::f64::consts::PI;

use num_complex::Complex64;

/// `exp(-2πi·k/n)` for `k` already reduced modulo `n`.
#[inline]
fn unit_root(k: usize, n: usize) -> Complex64 {
    let theta = -2.0 * PI * k as f64 / n as f64;
    Complex64::new(theta.cos(), theta.sin())
}

/// Direct evaluation of `X[k] = Σ_t x[t] exp(-2πi kt/T)`.
pub fn dft_naive(signal: &[Complex64]) -> Vec<Complex64> {
    let n = signal.len();
    let roots: Vec<Complex64> = (0..n).map(|k| unit_root(k, n)).collect();
    (0..n)
        .map(|k| {
            signal
                .iter()
                .enumerate()
                .map(|(t, &x)| x * roots[(k * t) % n])
                .sum()
        })
        .collect()
}

/// In-place iterative radix-2 FFT. `inverse` flips the twiddle sign and
/// does not scale.
fn fft_radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }
    // Twiddles computed directly per index; recurrences drift at large n.
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| {
            let w = unit_root(k, n);
            if inverse {
                w.conj()
            } else {
                w
            }
        })
        .collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Chirp `exp(-πi n²/T)`, with `n²` reduced modulo `2T` before the angle is formed.
fn chirp(n: usize, len: usize) -> Vec<Complex64> {
    let period = 2 * len as u128;
    (0..n)
        .map(|k| {
            let k2 = (k as u128 * k as u128 % period) as f64;
            let theta = -PI * k2 / len as f64;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect()
}

/// Arbitrary-length DFT via Bluestein's chirp-z identity
/// `kt = (k² + t² - (k - t)²) / 2`.
pub fn fft_bluestein(signal: &[Complex64]) -> Vec<Complex64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let m = (2 * n - 1).next_power_of_two();
    let w = chirp(n, n);

    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for (dst, (&x, &wk)) in a.iter_mut().zip(signal.iter().zip(&w)) {
        *dst = x * wk;
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = w[0].conj();
    for k in 1..n {
        b[k] = w[k].conj();
        b[m - k] = w[k].conj();
    }

    fft_radix2(&mut a, false);
    fft_radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft_radix2(&mut a, true);

    let scale = 1.0 / m as f64;
    a.iter().zip(&w).take(n).map(|(&c, &wk)| c * scale * wk).collect()
}

pub fn fft_real(signal: &[f64]) -> Vec<Complex64> {
    let complex: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_bluestein(&complex)
}

/// `|X[k]|` for `k = 0 ..= T/2`; the upper half of a real signal's spectrum is redundant.
pub fn magnitude_half_spectrum(spectrum: &[Complex64]) -> Vec<f64> {
    if spectrum.is_empty() {
        return Vec::new();
    }
    spectrum[..spectrum.len() / 2 + 1].iter().map(|c| c.norm()).collect()
}
