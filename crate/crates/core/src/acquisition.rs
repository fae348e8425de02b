//! Block-wise compressed acquisition with a fixed training/testing split.
//!
//! Every mini slot contributes `M_L/L` Gaussian measurement rows. Before any
//! data is taken each row is assigned to either the training matrix Φ or the
//! testing matrix Ψ, so that after slot `l` exactly `round(test_fraction·M_l)`
//! rows are testing rows. Rows are only ever appended, which makes Φ_l a
//! prefix of Φ_{l+1}.

use num_complex::Complex64;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::ScenarioConfig;
use crate::error::{check_len, Result, SenseError};
use crate::linalg::{dot2, split, RowBlock};
use crate::signal::NyquistSignal;

const ASSIGNMENT_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowRole {
    Training(usize),
    Testing(usize),
}

#[derive(Clone, Debug)]
pub struct MeasurementEnsemble {
    cols: usize,
    slots: usize,
    rows_per_slot: usize,
    training: Vec<f64>,
    testing: Vec<f64>,
    training_index: Vec<usize>,
    testing_index: Vec<usize>,
    roles: Vec<RowRole>,
    /// Cumulative r_l, indexed by l − 1.
    training_counts: Vec<usize>,
    /// Cumulative v_l, indexed by l − 1.
    testing_counts: Vec<usize>,
    noise_variance: f64,
    noise_bound: f64,
}

impl MeasurementEnsemble {
    /// Draws the matrices and the row assignment; δ² is left at zero.
    pub fn generate(config: &ScenarioConfig) -> Result<Self> {
        Self::generate_raw(
            config.nyquist_len(),
            config.mini_slots,
            config.total_measurements(),
            config.test_fraction,
            config.seeds.matrix,
        )
    }

    /// Like [`generate`](Self::generate) with explicit dimensions.
    pub fn generate_raw(
        cols: usize,
        slots: usize,
        total_rows: usize,
        test_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(SenseError::config("test_fraction must lie in (0, 1)"));
        }
        if slots == 0 || total_rows % slots != 0 {
            return Err(SenseError::config(format!(
                "M_L = {total_rows} is not a multiple of L = {slots}"
            )));
        }
        if cols == 0 {
            return Err(SenseError::config("signal length must be positive"));
        }
        let rows_per_slot = total_rows / slots;
        let mut testing_counts = Vec::with_capacity(slots);
        let mut training_counts = Vec::with_capacity(slots);
        for l in 1..=slots {
            let m = l * rows_per_slot;
            let v = (test_fraction * m as f64).round() as usize;
            if v == 0 || v >= m {
                return Err(SenseError::config(format!(
                    "slot {l}: split of {m} measurements leaves v = {v} testing rows"
                )));
            }
            testing_counts.push(v);
            training_counts.push(m - v);
        }

        let mut assign_rng = ChaCha8Rng::seed_from_u64(seed);
        assign_rng.set_stream(ASSIGNMENT_STREAM);
        let mut roles = Vec::with_capacity(total_rows);
        let (mut r, mut v) = (0usize, 0usize);
        let mut previous_v = 0;
        for &target_v in &testing_counts {
            let new_tests = target_v - previous_v;
            if new_tests > rows_per_slot {
                return Err(SenseError::config("test_fraction too large for block size"));
            }
            previous_v = target_v;
            let mut is_test = vec![false; rows_per_slot];
            for i in index::sample(&mut assign_rng, rows_per_slot, new_tests) {
                is_test[i] = true;
            }
            for test in is_test {
                if test {
                    roles.push(RowRole::Testing(v));
                    v += 1;
                } else {
                    roles.push(RowRole::Training(r));
                    r += 1;
                }
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut training = Vec::with_capacity(r * cols);
        let mut testing = Vec::with_capacity(v * cols);
        let mut training_index = Vec::with_capacity(r);
        let mut testing_index = Vec::with_capacity(v);
        for (g, role) in roles.iter().enumerate() {
            let target = match role {
                RowRole::Training(_) => {
                    training_index.push(g);
                    &mut training
                }
                RowRole::Testing(_) => {
                    testing_index.push(g);
                    &mut testing
                }
            };
            target.extend((0..cols).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
        }

        Ok(Self {
            cols,
            slots,
            rows_per_slot,
            training,
            testing,
            training_index,
            testing_index,
            roles,
            training_counts,
            testing_counts,
            noise_variance: 0.0,
            noise_bound: 0.0,
        })
    }

    /// Draws the ensemble and sets δ² from the configured SMNR relative to
    /// the mean noiseless power of the slot-1 training measurements, unless
    /// the config fixes δ² directly. U is `noise_bound_sigmas`·δ.
    pub fn build(config: &ScenarioConfig, signal: &NyquistSignal) -> Result<Self> {
        let mut ensemble = Self::generate(config)?;
        check_len("signal length", ensemble.cols, signal.len())?;
        let variance = match config.noise_variance {
            Some(v) => v,
            None => {
                let power = ensemble.slot_one_training_power(&signal.samples);
                power / (2.0 * 10f64.powf(config.smnr_db / 10.0))
            }
        };
        ensemble.set_noise(variance, config.noise_bound_sigmas * variance.sqrt());
        Ok(ensemble)
    }

    /// Mean of |Φx|² over the training rows of slot 1.
    pub fn slot_one_training_power(&self, x: &[Complex64]) -> f64 {
        let rows = self.training_counts[0];
        let measured = self.training_block().prefix(rows).mul_complex(x);
        measured.iter().map(|c| c.norm_sqr()).sum::<f64>() / rows as f64
    }

    pub fn set_noise(&mut self, variance: f64, bound: f64) {
        self.noise_variance = variance;
        self.noise_bound = bound;
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn rows_per_slot(&self) -> usize {
        self.rows_per_slot
    }

    /// δ², the per-component measurement-noise variance.
    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// U, the amplitude bound plugged into the tail bound.
    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    /// r_l for slot `l` in 1..=L.
    pub fn training_count(&self, l: usize) -> usize {
        self.training_counts[l - 1]
    }

    /// v_l for slot `l` in 1..=L.
    pub fn testing_count(&self, l: usize) -> usize {
        self.testing_counts[l - 1]
    }

    pub fn measurement_count(&self, l: usize) -> usize {
        l * self.rows_per_slot
    }

    pub fn role(&self, global_row: usize) -> RowRole {
        self.roles[global_row]
    }

    /// All training rows of the full interval, in arrival order.
    pub fn training_block(&self) -> RowBlock<'_> {
        RowBlock::new(&self.training, self.cols)
    }

    pub fn testing_block(&self) -> RowBlock<'_> {
        RowBlock::new(&self.testing, self.cols)
    }

    /// Global sample index of each training row.
    pub fn training_index(&self) -> &[usize] {
        &self.training_index
    }

    pub fn testing_index(&self) -> &[usize] {
        &self.testing_index
    }

    /// The measurement row with global index `g`.
    pub fn row(&self, g: usize) -> &[f64] {
        match self.roles[g] {
            RowRole::Training(i) => self.training_block().row(i),
            RowRole::Testing(i) => self.testing_block().row(i),
        }
    }
}

/// Cumulative samples gathered up to the current mini slot.
#[derive(Clone, Debug)]
pub struct AcquisitionState {
    slot: usize,
    samples: Vec<Complex64>,
    noise: Vec<Complex64>,
    training: Vec<Complex64>,
    testing: Vec<Complex64>,
    rng: ChaCha8Rng,
}

/// Aligned training and testing views after slot `l`.
#[derive(Clone, Copy, Debug)]
pub struct Split<'a> {
    pub slot: usize,
    pub training: &'a [Complex64],
    pub testing: &'a [Complex64],
    pub phi: RowBlock<'a>,
    pub psi: RowBlock<'a>,
    pub training_index: &'a [usize],
    pub testing_index: &'a [usize],
}

impl AcquisitionState {
    pub fn new(noise_seed: u64) -> Self {
        Self {
            slot: 0,
            samples: Vec::new(),
            noise: Vec::new(),
            training: Vec::new(),
            testing: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(noise_seed),
        }
    }

    /// Index of the last acquired slot (0 before the first one).
    pub fn slot(&self) -> usize {
        self.slot
    }

    /// y_l in global arrival order.
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// The noise realisation added to each sample in `samples`.
    pub fn noise(&self) -> &[Complex64] {
        &self.noise
    }

    /// Measures the next block: each row gives row·x + n with n circular
    /// complex Gaussian of per-component variance δ².
    pub fn acquire_slot(&mut self, ensemble: &MeasurementEnsemble, x: &[Complex64]) -> Result<()> {
        if self.slot >= ensemble.slots() {
            return Err(SenseError::AcquisitionComplete(ensemble.slots()));
        }
        check_len("signal length", ensemble.cols(), x.len())?;
        let (re, im) = split(x);
        let sigma = ensemble.noise_variance().sqrt();
        let start = self.slot * ensemble.rows_per_slot();
        for g in start..start + ensemble.rows_per_slot() {
            let (a, b) = dot2(ensemble.row(g), &re, &im);
            let n_re: f64 = StandardNormal.sample(&mut self.rng);
            let n_im: f64 = StandardNormal.sample(&mut self.rng);
            let noise = Complex64::new(sigma * n_re, sigma * n_im);
            let y = Complex64::new(a, b) + noise;
            self.samples.push(y);
            self.noise.push(noise);
            match ensemble.role(g) {
                RowRole::Training(_) => self.training.push(y),
                RowRole::Testing(_) => self.testing.push(y),
            }
        }
        self.slot += 1;
        Ok(())
    }

    pub fn split<'a>(&'a self, ensemble: &'a MeasurementEnsemble) -> Result<Split<'a>> {
        if self.slot == 0 {
            return Err(SenseError::arg("no slot acquired yet"));
        }
        let r = ensemble.training_count(self.slot);
        let v = ensemble.testing_count(self.slot);
        debug_assert_eq!(self.training.len(), r);
        debug_assert_eq!(self.testing.len(), v);
        Ok(Split {
            slot: self.slot,
            training: &self.training,
            testing: &self.testing,
            phi: ensemble.training_block().prefix(r),
            psi: ensemble.testing_block().prefix(v),
            training_index: &ensemble.training_index()[..r],
            testing_index: &ensemble.testing_index()[..v],
        })
    }
}
