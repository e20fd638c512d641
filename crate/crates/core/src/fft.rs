//! Discrete Fourier transforms of arbitrary length.
//!
//! Power-of-two lengths run an iterative radix-2 Cooley–Tukey; every other
//! length goes through Bluestein's chirp-z reduction onto a power-of-two
//! convolution. Forward transforms are unnormalized, the inverse carries 1/N.

use std::f64::consts::PI;

use thiserror::Error;

use crate::linalg::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FftError {
    #[error("cannot transform an empty sequence")]
    Empty,
}

/// Frequency-domain bins of a length-N sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<C64>,
}

impl Spectrum {
    pub fn new(bins: Vec<C64>) -> Result<Self, FftError> {
        if bins.is_empty() {
            return Err(FftError::Empty);
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[C64] {
        &self.bins
    }

    pub fn into_bins(self) -> Vec<C64> {
        self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// X_k = Σ_n x_n exp(-2πi nk/N)
pub fn fft(x: &[C64]) -> Result<Spectrum, FftError> {
    if x.is_empty() {
        return Err(FftError::Empty);
    }
    let mut buf = x.to_vec();
    transform(&mut buf, false);
    Ok(Spectrum { bins: buf })
}

/// Inverse DFT with 1/N normalization.
pub fn ifft(x: &Spectrum) -> Result<Vec<C64>, FftError> {
    if x.bins.is_empty() {
        return Err(FftError::Empty);
    }
    let mut buf = x.bins.clone();
    transform(&mut buf, true);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
    Ok(buf)
}

fn transform(buf: &mut [C64], inverse: bool) {
    let n = buf.len();
    if n == 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(buf, inverse);
    } else {
        bluestein(buf, inverse);
    }
}

/// exp(sign·2πi k/n), with the angle reduced before evaluation.
fn twiddle(k: usize, n: usize, inverse: bool) -> C64 {
    let sign = if inverse { 1.0 } else { -1.0 };
    let angle = sign * 2.0 * PI * (k % n) as f64 / n as f64;
    C64::new(angle.cos(), angle.sin())
}

fn radix2(buf: &mut [C64], inverse: bool) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    // One table for the largest stage; smaller stages stride through it.
    let table: Vec<C64> = (0..n / 2).map(|k| twiddle(k, n, inverse)).collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = table[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

fn bluestein(buf: &mut [C64], inverse: bool) {
    let n = buf.len();
    let m = (2 * n - 1).next_power_of_two();
    let sign = if inverse { 1.0 } else { -1.0 };
    // chirp_k = exp(sign·iπ k²/n); k² is reduced mod 2n to keep the angle small
    let chirp: Vec<C64> = (0..n)
        .map(|k| {
            let k2 = (k as u128 * k as u128 % (2 * n as u128)) as f64;
            let angle = sign * PI * k2 / n as f64;
            C64::new(angle.cos(), angle.sin())
        })
        .collect();

    let mut a = vec![C64::new(0.0, 0.0); m];
    for k in 0..n {
        a[k] = buf[k] * chirp[k];
    }
    let mut b = vec![C64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    radix2(&mut a, true);
    let scale = 1.0 / m as f64;
    for k in 0..n {
        buf[k] = a[k] * scale * chirp[k];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn real(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| c(x, 0.0)).collect()
    }

    /// O(N²) reference transform.
    fn direct_dft(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let ang = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                        v * C64::new(ang.cos(), ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn max_err(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn impulse_and_constant() {
        let s = fft(&real(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(max_err(s.bins(), &real(&[1.0; 4])) < 1e-15);

        let s = fft(&real(&[0.0, 1.0, 0.0, 0.0])).unwrap();
        let expected = [c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0)];
        assert!(max_err(s.bins(), &expected) < 1e-15);

        let s = fft(&real(&[1.0; 4])).unwrap();
        assert!(max_err(s.bins(), &real(&[4.0, 0.0, 0.0, 0.0])) < 1e-15);
    }

    #[test]
    fn inverse_examples() {
        let s = Spectrum::new(real(&[4.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(max_err(&ifft(&s).unwrap(), &real(&[1.0; 4])) < 1e-15);
        let s = Spectrum::new(real(&[1.0, 1.0])).unwrap();
        assert!(max_err(&ifft(&s).unwrap(), &real(&[1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(fft(&[]), Err(FftError::Empty));
        assert_eq!(Spectrum::new(vec![]), Err(FftError::Empty));
    }

    #[test]
    fn matches_direct_dft_up_to_64() {
        for n in 1..=64 {
            let x: Vec<C64> =
                (0..n).map(|j| c((j as f64 * 0.37).sin(), (j as f64 * 1.3).cos() - 0.2)).collect();
            let err = max_err(fft(&x).unwrap().bins(), &direct_dft(&x));
            assert!(err < 1e-10, "n = {n}: error {err}");
        }
    }

    fn signal() -> impl Strategy<Value = Vec<C64>> {
        prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..300)
            .prop_map(|v| v.into_iter().map(|(a, b)| c(a, b)).collect())
    }

    proptest! {
        #[test]
        fn round_trip(x in signal()) {
            let back = ifft(&fft(&x).unwrap()).unwrap();
            prop_assert!(max_err(&back, &x) < 1e-12);
        }

        #[test]
        fn parseval(x in signal()) {
            let s = fft(&x).unwrap();
            let time: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            let freq: f64 = s.bins().iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64;
            prop_assert!((time - freq).abs() <= 1e-10 * time.max(1e-300));
        }

        #[test]
        fn linearity(x in signal(), ar in -3.0f64..3.0, ai in -3.0f64..3.0, br in -3.0f64..3.0) {
            let y: Vec<C64> = x.iter().rev().map(|z| z * c(0.5, -1.0)).collect();
            let a = c(ar, ai);
            let b = c(br, 0.25);
            let combo: Vec<C64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = fft(&combo).unwrap();
            let fx = fft(&x).unwrap();
            let fy = fft(&y).unwrap();
            let rhs: Vec<C64> = fx.bins().iter().zip(fy.bins()).map(|(p, q)| a * p + b * q).collect();
            let scale = rhs.iter().map(|z| z.norm()).fold(1.0, f64::max);
            prop_assert!(max_err(lhs.bins(), &rhs) < 1e-10 * scale);
        }
    }
}
