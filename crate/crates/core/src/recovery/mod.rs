//! Sparse spectral recovery from the training subset.

mod operator;
mod solver;

pub use operator::SensingOperator;
pub use solver::{
    operator_norm_squared, oracle_recovery_error, recover, recover_warm, recover_with, SolverSettings,
    SpectralEstimate, StageDiagnostics, WarmStart,
};

/// Default residual threshold ϵ = δ·√(2r)·(1 + 2/√r) for `r` training
/// samples with per-component noise variance δ².
pub fn default_threshold(noise_variance: f64, training_rows: usize) -> f64 {
    let r = training_rows as f64;
    noise_variance.sqrt() * (2.0 * r).sqrt() * (1.0 + 2.0 / r.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dft::unitary_dft;
    use crate::linalg::RowBlock;
    use num_complex::Complex64;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) struct Planted {
        pub matrix: Vec<f64>,
        pub spectrum: Vec<Complex64>,
        pub samples: Vec<Complex64>,
    }

    /// k random ±1 spikes in the spectrum, Gaussian rows, noiseless samples.
    pub(crate) fn planted(n: usize, m: usize, k: usize, seed: u64) -> Planted {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spectrum = vec![Complex64::default(); n];
        let mut support: Vec<usize> = (0..n).collect();
        support.shuffle(&mut rng);
        for &i in &support[..k] {
            spectrum[i] = Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0);
        }
        let matrix: Vec<f64> = (0..m * n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let time = crate::dft::inverse_unitary_dft(&spectrum).unwrap();
        let samples = RowBlock::new(&matrix, n).mul_complex(&time);
        Planted {
            matrix,
            spectrum,
            samples,
        }
    }

    fn relative_error(truth: &[Complex64], est: &[Complex64]) -> f64 {
        oracle_recovery_error(truth, est).unwrap() / crate::dft::norm(truth)
    }

    #[test]
    fn zero_data_gives_zero_estimate() {
        let p = planted(64, 16, 3, 1);
        let zeros = vec![Complex64::default(); 16];
        let est = recover(&zeros, RowBlock::new(&p.matrix, 64), 0.0, &SolverSettings::default()).unwrap();
        assert!(est.spectrum.iter().all(|c| c.norm() == 0.0));
        assert!(est.converged);
        assert_eq!(est.residual_norm, 0.0);
    }

    #[test]
    fn planted_sparse_recovery_mostly_succeeds() {
        let trials = 20;
        let mut successes = 0;
        for seed in 0..trials {
            let p = planted(256, 128, 8, 1000 + seed);
            let est = recover(&p.samples, RowBlock::new(&p.matrix, 256), 0.0, &SolverSettings::default())
                .unwrap();
            let support_ok = p
                .spectrum
                .iter()
                .zip(&est.spectrum)
                .all(|(t, e)| (t.norm() > 0.0) == (e.norm() > 0.5));
            if support_ok && relative_error(&p.spectrum, &est.spectrum) <= 1e-3 {
                successes += 1;
            }
        }
        assert!(successes >= 19, "{successes}/{trials}");
    }

    #[test]
    fn determined_system_recovers_spectrum() {
        let n = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut matrix = vec![0.0; n * n];
        for (i, &p) in perm.iter().enumerate() {
            matrix[i * n + p] = 1.0;
        }
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), 0.0))
            .collect();
        let rows = RowBlock::new(&matrix, n);
        let y = rows.mul_complex(&x);
        let est = recover(&y, rows, 0.0, &SolverSettings::default()).unwrap();
        let truth = unitary_dft(&x).unwrap();
        assert!(relative_error(&truth, &est.spectrum) < 1e-5);
    }

    #[test]
    fn objective_is_monotone_within_stages() {
        let p = planted(256, 100, 10, 5);
        let settings = SolverSettings {
            record_objective: true,
            ..SolverSettings::default()
        };
        let est = recover(&p.samples, RowBlock::new(&p.matrix, 256), 0.0, &settings).unwrap();
        assert!(!est.objective_trace.is_empty());
        for stage in &est.objective_trace {
            for w in stage.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn noisy_recovery_lands_in_residual_band() {
        let p = planted(256, 128, 8, 11);
        let sigma = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let noisy: Vec<Complex64> = p
            .samples
            .iter()
            .map(|s| {
                s + Complex64::new(
                    sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng),
                    sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng),
                )
            })
            .collect();
        let eps = default_threshold(sigma * sigma, 128);
        let settings = SolverSettings::default();
        let est = recover(&noisy, RowBlock::new(&p.matrix, 256), eps, &settings).unwrap();
        assert!(est.converged);
        assert!(est.residual_norm <= eps * (1.0 + settings.tol_slack));
        assert!(relative_error(&p.spectrum, &est.spectrum) < 0.05);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = planted(32, 8, 2, 1);
        let rows = RowBlock::new(&p.matrix, 32);
        let settings = SolverSettings::default();
        assert!(recover(&p.samples[..7], rows, 0.0, &settings).is_err());
        assert!(recover(&p.samples, rows, -1.0, &settings).is_err());
        assert!(oracle_recovery_error(&p.spectrum, &p.spectrum[..3]).is_err());
    }

    #[test]
    fn oracle_error_cases() {
        let p = planted(16, 4, 3, 2);
        assert_eq!(oracle_recovery_error(&p.spectrum, &p.spectrum).unwrap(), 0.0);
        let zeros = vec![Complex64::default(); 16];
        let err = oracle_recovery_error(&p.spectrum, &zeros).unwrap();
        assert!((err - crate::dft::norm(&p.spectrum)).abs() < 1e-15);
        let other = planted(16, 4, 5, 3).spectrum;
        let mut sum = 0.0;
        for k in 0..16 {
            let d = p.spectrum[k] - other[k];
            sum += d.re * d.re + d.im * d.im;
        }
        assert!((oracle_recovery_error(&p.spectrum, &other).unwrap() - sum.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn default_threshold_formula() {
        let eps = default_threshold(0.25, 100);
        assert!((eps - 0.5 * 200f64.sqrt() * 1.2).abs() < 1e-12);
    }
}
