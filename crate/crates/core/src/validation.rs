//! Held-out validation of a spectral estimate and the associated tail bound.
//!
//! For an exact estimate the testing residual is pure measurement noise, so
//! ρ/v concentrates around 2δ². Acquisition halts once |ρ/v − 2δ²| ≤ ε.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{check_len, Result, SenseError};
use crate::linalg::RowBlock;
use crate::par::{self, Execution};
use crate::recovery::SensingOperator;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationRecord {
    pub slot: usize,
    /// M_l, measurements gathered so far.
    pub measurements: usize,
    pub rho: f64,
    pub testing_count: usize,
    pub normalized: f64,
    pub two_delta_sq: f64,
    pub accuracy: f64,
    pub halted: bool,
    /// Tail bound ϱ for this (v, ε).
    pub bound: f64,
    pub solver_converged: bool,
    pub solver_iterations: usize,
    /// ‖X − X̂_l‖₂; recorded for evaluation, never read by the loop.
    pub oracle_error: f64,
    pub relative_oracle_error: f64,
}

/// ρ = ‖V − Ψ·F⁻¹·X̂‖₂².
pub fn verification_parameter(testing: &[Complex64], psi: RowBlock<'_>, estimate: &[Complex64]) -> Result<f64> {
    check_len("testing samples", psi.rows(), testing.len())?;
    check_len("estimate length", psi.cols(), estimate.len())?;
    let predicted = SensingOperator::with_execution(psi, Execution::Sequential)?.apply(estimate)?;
    Ok(testing
        .iter()
        .zip(&predicted)
        .map(|(v, p)| (v - p).norm_sqr())
        .sum())
}

/// |ρ/v − 2δ²| ≤ ε.
pub fn halting_check(rho: f64, testing_count: usize, noise_variance: f64, accuracy: f64) -> bool {
    if testing_count == 0 {
        return false;
    }
    (rho / testing_count as f64 - 2.0 * noise_variance).abs() <= accuracy
}

/// ϱ = 2·exp(−3vε² / (24δ⁴ + 2(U² + δ²)ε)), clamped to 1.
pub fn bernstein_bound(testing_count: usize, accuracy: f64, noise_variance: f64, noise_bound: f64) -> Result<f64> {
    if testing_count == 0 {
        return Err(SenseError::arg("testing count must be positive"));
    }
    if !(accuracy > 0.0) {
        return Err(SenseError::arg(format!("accuracy {accuracy} must be positive")));
    }
    if !(noise_variance > 0.0) {
        return Err(SenseError::arg(format!("noise variance {noise_variance} must be positive")));
    }
    if !(noise_bound > 0.0) {
        return Err(SenseError::arg(format!("noise bound {noise_bound} must be positive")));
    }
    let v = testing_count as f64;
    let d2 = noise_variance;
    let u2 = noise_bound * noise_bound;
    let exponent = -3.0 * v * accuracy * accuracy / (24.0 * d2 * d2 + 2.0 * (u2 + d2) * accuracy);
    Ok((2.0 * exponent.exp()).min(1.0))
}

/// Zero-mean Gaussian with standard deviation `sigma`, redrawn until it
/// falls inside ±`bound`.
pub fn truncated_gaussian<R: rand::Rng>(rng: &mut R, sigma: f64, bound: f64) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let value = sigma * z;
        if value.abs() <= bound {
            return value;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailCheck {
    pub testing_count: usize,
    /// ε / 2δ².
    pub accuracy_ratio: f64,
    pub trials: usize,
    pub exceedances: usize,
    pub frequency: f64,
    pub bound: f64,
}

impl TailCheck {
    pub fn holds(&self) -> bool {
        self.frequency <= self.bound
    }
}

/// Monte Carlo check of the tail bound. Each trial measures an exact
/// estimate through a small random testing matrix, with every noise
/// component truncated at ±U, and counts |ρ/v − 2δ²| > ε.
pub fn tail_check(
    testing_count: usize,
    accuracy_ratio: f64,
    noise_variance: f64,
    noise_bound: f64,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<TailCheck> {
    const COLS: usize = 8;
    let accuracy = accuracy_ratio * 2.0 * noise_variance;
    let bound = bernstein_bound(testing_count, accuracy, noise_variance, noise_bound)?;
    let sigma = noise_variance.sqrt();
    const BATCH: usize = 1000;
    let batches = trials.div_ceil(BATCH);
    let counts = par::map_range(batches, exec, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let mut exceed = 0usize;
        let end = ((b + 1) * BATCH).min(trials);
        let mut matrix = vec![0.0; testing_count * COLS];
        let mut testing = vec![Complex64::default(); testing_count];
        for _ in b * BATCH..end {
            let estimate: Vec<Complex64> = (0..COLS)
                .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            matrix
                .iter_mut()
                .for_each(|v| *v = StandardNormal.sample(&mut rng));
            let psi = RowBlock::new(&matrix, COLS);
            let clean = psi.mul_complex(&crate::dft::inverse_unitary_dft(&estimate).expect("non-empty"));
            for (t, c) in testing.iter_mut().zip(&clean) {
                let n = Complex64::new(
                    truncated_gaussian(&mut rng, sigma, noise_bound),
                    truncated_gaussian(&mut rng, sigma, noise_bound),
                );
                *t = c + n;
            }
            let rho = verification_parameter(&testing, psi, &estimate).expect("dimensions agree");
            if !halting_check(rho, testing_count, noise_variance, accuracy) {
                exceed += 1;
            }
        }
        exceed
    });
    let exceedances: usize = counts.into_iter().sum();
    Ok(TailCheck {
        testing_count,
        accuracy_ratio,
        trials,
        exceedances,
        frequency: exceedances as f64 / trials as f64,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(v: usize, n: usize, seed: u64) -> (Vec<f64>, Vec<Complex64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<f64> = (0..v * n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        (m, x)
    }

    #[test]
    fn exact_noiseless_estimate_gives_zero() {
        let (m, est) = toy(6, 16, 1);
        let psi = RowBlock::new(&m, 16);
        let testing = psi.mul_complex(&crate::dft::inverse_unitary_dft(&est).unwrap());
        let rho = verification_parameter(&testing, psi, &est).unwrap();
        assert!(rho < 1e-20, "{rho}");
    }

    #[test]
    fn matches_componentwise_sum() {
        let (v, n) = (4, 8);
        let (m, est) = toy(v, n, 2);
        let (_, testing) = toy(1, v, 3);
        let psi = RowBlock::new(&m, n);
        // direct: x̂[t] = Σ_k X̂[k]·exp(2πi kt/N)/√N, then V − Ψx̂
        let mut x_hat = vec![Complex64::default(); n];
        for (t, slot) in x_hat.iter_mut().enumerate() {
            for (k, c) in est.iter().enumerate() {
                let angle = 2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                *slot += c * Complex64::from_polar(1.0, angle);
            }
            *slot /= (n as f64).sqrt();
        }
        let mut expected = 0.0;
        for i in 0..v {
            let mut p = Complex64::default();
            for t in 0..n {
                p += x_hat[t] * m[i * n + t];
            }
            let d = testing[i] - p;
            expected += d.re * d.re + d.im * d.im;
        }
        let rho = verification_parameter(&testing, psi, &est).unwrap();
        assert!((rho - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn pure_noise_mean_is_two_delta_squared() {
        let (v, n, trials) = (20, 8, 10_000);
        let delta_sq = 0.8;
        let sigma: f64 = 0.8f64.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (m, est) = toy(v, n, 4);
        let psi = RowBlock::new(&m, n);
        let clean = psi.mul_complex(&crate::dft::inverse_unitary_dft(&est).unwrap());
        let mut sum = 0.0;
        for _ in 0..trials {
            let testing: Vec<Complex64> = clean
                .iter()
                .map(|c| {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    c + Complex64::new(sigma * a, sigma * b)
                })
                .collect();
            sum += verification_parameter(&testing, psi, &est).unwrap() / v as f64;
        }
        let mean = sum / trials as f64;
        assert!((mean - 2.0 * delta_sq).abs() <= 0.02 * 2.0 * delta_sq, "{mean}");
    }

    #[test]
    fn halting_check_cases() {
        let d2 = 0.5;
        assert!(halting_check(2.0 * d2 * 10.0, 10, d2, 0.01));
        assert!(!halting_check(0.0, 10, d2, 0.1));
        let eps = 0.1 * 2.0 * d2;
        assert!(halting_check(2.05 * d2 * 100.0, 100, d2, eps));
        assert!(!halting_check(2.25 * d2 * 100.0, 100, d2, eps));
        assert!(!halting_check(1.0, 0, d2, eps));
    }

    #[test]
    fn bound_limits_and_scaling() {
        let b = |v, e| bernstein_bound(v, e, 1.0, 4.0).unwrap();
        assert!(b(100, 1e6) < 1e-300);
        let small = b(10, 1e-6);
        assert_eq!(small, 1.0);
        // ϱ = 2·exp(−v·c): log(ϱ/2) doubles with v
        let (r1, r2) = (b(200, 0.5), b(400, 0.5));
        let ratio = (r2 / 2.0).ln() / (r1 / 2.0).ln();
        assert!((ratio - 2.0).abs() < 1e-12);
        // v = 100, ε = δ²/2, U = 4δ: exponent = −3·100·0.25/(24 + 34·0.5)
        let expected = 2.0 * (-75.0f64 / 41.0).exp();
        assert!((b(100, 0.5) - expected).abs() < 1e-15);
    }

    #[test]
    fn bound_rejects_nonpositive_arguments() {
        assert!(bernstein_bound(0, 1.0, 1.0, 4.0).is_err());
        assert!(bernstein_bound(10, 0.0, 1.0, 4.0).is_err());
        assert!(bernstein_bound(10, 1.0, 0.0, 4.0).is_err());
        assert!(bernstein_bound(10, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn truncated_noise_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            assert!(truncated_gaussian(&mut rng, 1.0, 1.5).abs() <= 1.5);
        }
    }

    #[test]
    fn small_tail_check_holds() {
        let check = tail_check(400, 0.25, 1.0, 4.0, 2000, 3, Execution::Sequential).unwrap();
        assert!(check.holds(), "{check:?}");
        let par = tail_check(400, 0.25, 1.0, 4.0, 2000, 3, Execution::Parallel).unwrap();
        assert_eq!(check, par);
    }

    proptest! {
        #[test]
        fn bound_is_monotone(v in 1usize..2000, e1 in 0.01f64..5.0, de in 0.0f64..5.0, d2 in 0.1f64..4.0) {
            let u = 4.0 * d2.sqrt();
            let a = bernstein_bound(v, e1, d2, u).unwrap();
            let b = bernstein_bound(v, e1 + de, d2, u).unwrap();
            let c = bernstein_bound(v + 1, e1, d2, u).unwrap();
            prop_assert!(b <= a && c <= a);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn halting_is_monotone_in_accuracy(rho in 0.0f64..100.0, v in 1usize..50, d2 in 0.01f64..2.0, e1 in 0.0f64..5.0, de in 0.0f64..5.0) {
            if halting_check(rho, v, d2, e1) {
                prop_assert!(halting_check(rho, v, d2, e1 + de));
            }
        }

        #[test]
        fn rho_is_nonnegative_and_permutation_invariant(seed in 0u64..1000, shift in 1usize..5) {
            let (v, n) = (5, 8);
            let (m, est) = toy(v, n, seed);
            let (_, testing) = toy(1, v, seed + 1);
            let rho = verification_parameter(&testing, RowBlock::new(&m, n), &est).unwrap();
            prop_assert!(rho >= 0.0);
            let mut m2 = m.clone();
            let mut t2 = testing.clone();
            m2.rotate_left(shift * n);
            t2.rotate_left(shift);
            let rho2 = verification_parameter(&t2, RowBlock::new(&m2, n), &est).unwrap();
            prop_assert!((rho - rho2).abs() <= 1e-12 * rho.max(1.0));
        }
    }
}
