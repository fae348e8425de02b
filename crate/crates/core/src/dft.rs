//! Unitary discrete Fourier transform.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SenseError};

/// Forward and inverse FFT plans of one length, scaled by 1/√N so the
/// transform is unitary.
#[derive(Clone)]
pub struct UnitaryDft {
    len: usize,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for UnitaryDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitaryDft").field("len", &self.len).finish()
    }
}

impl UnitaryDft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(SenseError::arg("DFT length must be at least 1"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            scale: 1.0 / (len as f64).sqrt(),
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }

    pub fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = x.to_vec();
        self.forward_in_place(&mut out);
        out
    }

    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut out = spectrum.to_vec();
        self.inverse_in_place(&mut out);
        out
    }
}

/// X = F·x with F unitary.
pub fn unitary_dft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    Ok(UnitaryDft::new(x.len())?.forward(x))
}

/// x = F⁻¹·X with F unitary.
pub fn inverse_unitary_dft(spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    Ok(UnitaryDft::new(spectrum.len())?.inverse(spectrum))
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_vec(len: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    /// Dense O(N²) unitary DFT matrix product.
    fn dense_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        let scale = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let angle = -2.0 * PI * (k * t % n) as f64 / n as f64;
                        v * Complex64::from_polar(1.0, angle)
                    })
                    .sum::<Complex64>()
                    * scale
            })
            .collect()
    }

    #[test]
    fn zeros_map_to_zeros() {
        let out = unitary_dft(&[Complex64::default(); 16]).unwrap();
        assert!(out.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn impulse_maps_to_constant() {
        let n = 64;
        let mut x = vec![Complex64::default(); n];
        x[0] = Complex64::new(1.0, 0.0);
        let out = unitary_dft(&x).unwrap();
        let expected = 1.0 / (n as f64).sqrt();
        for c in out {
            assert!((c.re - expected).abs() < 1e-15 && c.im.abs() < 1e-15);
        }
    }

    #[test]
    fn matches_dense_matrix() {
        let x = random_vec(64, 3);
        let fast = unitary_dft(&x).unwrap();
        let slow = dense_dft(&x);
        let err: f64 = fast
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10, "error {err}");
    }

    #[test]
    fn empty_input_rejected() {
        assert!(unitary_dft(&[]).is_err());
    }

    #[test]
    fn round_trip_and_parseval() {
        for (len, seed) in [(1, 1), (7, 2), (250, 3), (4000, 4)] {
            let x = random_vec(len, seed);
            let spectrum = unitary_dft(&x).unwrap();
            let back = inverse_unitary_dft(&spectrum).unwrap();
            let diff: Vec<_> = x.iter().zip(&back).map(|(a, b)| a - b).collect();
            assert!(norm(&diff) <= 1e-12 * norm(&x));
            assert!((norm(&spectrum) - norm(&x)).abs() <= 1e-12 * norm(&x));
        }
    }
}
