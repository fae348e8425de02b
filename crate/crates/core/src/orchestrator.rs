//! The adaptive sensing loop: acquire a slot, recover, validate, and stop at
//! the first slot whose testing residual matches the noise level.

use std::collections::BTreeSet;

use crate::acquisition::{AcquisitionState, MeasurementEnsemble};
use crate::config::ScenarioConfig;
use crate::detection::{energy_detect, DetectionResult};
use crate::dft::norm;
use crate::error::Result;
use crate::recovery::{
    default_threshold, oracle_recovery_error, recover_warm, SensingOperator, SpectralEstimate, WarmStart,
};
use crate::signal::{synthesize, NyquistSignal};
use crate::throughput::{adaptive_throughput, baseline_throughput};
use crate::validation::{bernstein_bound, halting_check, verification_parameter, VerificationRecord};

#[derive(Clone, Debug)]
pub struct SensingOutcome {
    /// l⋆, 1-based; L when the criterion never held.
    pub terminated_slot: usize,
    pub estimate: SpectralEstimate,
    /// One record per acquired slot, l = 1..=l⋆.
    pub verification_trace: Vec<VerificationRecord>,
    pub detection: DetectionResult,
    pub throughput_adaptive: f64,
    pub throughput_baseline: f64,
    /// ‖X − X̂_l‖₂ per slot.
    pub oracle_error_trace: Vec<f64>,
    pub occupied: BTreeSet<usize>,
    pub noise_variance: f64,
    pub accuracy: f64,
    pub signal_norm: f64,
}

impl SensingOutcome {
    pub fn halted(&self) -> bool {
        self.verification_trace.last().is_some_and(|r| r.halted)
    }

    pub fn final_record(&self) -> &VerificationRecord {
        self.verification_trace.last().expect("at least one slot")
    }

    pub fn relative_error(&self) -> f64 {
        self.final_record().relative_oracle_error
    }
}

/// Synthesises the scenario and runs the loop.
pub fn adaptive_sense(config: &ScenarioConfig) -> Result<SensingOutcome> {
    config.validate()?;
    let signal = synthesize(config)?;
    let ensemble = MeasurementEnsemble::build(config, &signal)?;
    sense_signal(config, &signal, &ensemble)
}

/// Runs the loop on a given signal and measurement ensemble.
pub fn sense_signal(config: &ScenarioConfig, signal: &NyquistSignal, ensemble: &MeasurementEnsemble) -> Result<SensingOutcome> {
    let mut run = Run::new(config, signal, ensemble);
    let mut last: Option<SpectralEstimate> = None;
    while run.state.slot() < ensemble.slots() {
        let (record, estimate) = run.step(last.as_ref())?;
        let halted = record.halted;
        run.trace.push(record);
        last = Some(estimate);
        if halted {
            break;
        }
    }
    let estimate = last.expect("at least one slot");
    let terminated_slot = run.trace.len();
    let detection = energy_detect(&estimate.spectrum, config, config.target_pfa)?;
    let throughput_adaptive = adaptive_throughput(
        terminated_slot,
        &detection.decisions,
        &signal.occupied,
        &config.link,
        config,
    )?;
    let throughput_baseline = baseline_throughput(&detection.decisions, &signal.occupied, &config.link, config)?;
    let oracle_error_trace = run.trace.iter().map(|r| r.oracle_error).collect();
    Ok(SensingOutcome {
        terminated_slot,
        estimate,
        oracle_error_trace,
        verification_trace: run.trace,
        detection,
        throughput_adaptive,
        throughput_baseline,
        occupied: signal.occupied.clone(),
        noise_variance: ensemble.noise_variance(),
        accuracy: run.accuracy,
        signal_norm: run.signal_norm,
    })
}

/// Verification records for every slot 1..=L, ignoring the halting
/// decision. The `halted` flag still reports whether the criterion held.
pub fn full_trace(config: &ScenarioConfig) -> Result<Vec<VerificationRecord>> {
    config.validate()?;
    let signal = synthesize(config)?;
    let ensemble = MeasurementEnsemble::build(config, &signal)?;
    let mut run = Run::new(config, &signal, &ensemble);
    let mut last: Option<SpectralEstimate> = None;
    while run.state.slot() < ensemble.slots() {
        let (record, estimate) = run.step(last.as_ref())?;
        run.trace.push(record);
        last = Some(estimate);
    }
    Ok(run.trace)
}

struct Run<'a> {
    config: &'a ScenarioConfig,
    signal: &'a NyquistSignal,
    ensemble: &'a MeasurementEnsemble,
    state: AcquisitionState,
    trace: Vec<VerificationRecord>,
    accuracy: f64,
    signal_norm: f64,
}

impl<'a> Run<'a> {
    fn new(config: &'a ScenarioConfig, signal: &'a NyquistSignal, ensemble: &'a MeasurementEnsemble) -> Self {
        Self {
            config,
            signal,
            ensemble,
            state: AcquisitionState::new(config.seeds.noise),
            trace: Vec::new(),
            accuracy: config.accuracy_ratio * 2.0 * ensemble.noise_variance(),
            signal_norm: norm(&signal.spectrum),
        }
    }

    fn step(&mut self, previous: Option<&SpectralEstimate>) -> Result<(VerificationRecord, SpectralEstimate)> {
        let delta_sq = self.ensemble.noise_variance();
        self.state.acquire_slot(self.ensemble, &self.signal.samples)?;
        let split = self.state.split(self.ensemble)?;
        let epsilon = self
            .config
            .recovery_threshold
            .unwrap_or_else(|| default_threshold(delta_sq, split.training.len()));
        let settings = &self.config.solver;
        let warm = previous
            .filter(|_| settings.warm_start)
            .and_then(WarmStart::from_estimate);
        let op = SensingOperator::new(split.phi)?;
        let estimate = recover_warm(&op, split.training, epsilon, settings, warm)?;
        let rho = verification_parameter(split.testing, split.psi, &estimate.spectrum)?;
        let v = split.testing.len();
        let halted = estimate.converged && halting_check(rho, v, delta_sq, self.accuracy);
        let bound = if delta_sq > 0.0 {
            bernstein_bound(v, self.accuracy, delta_sq, self.ensemble.noise_bound())?
        } else {
            1.0
        };
        let oracle_error = oracle_recovery_error(&self.signal.spectrum, &estimate.spectrum)?;
        let record = VerificationRecord {
            slot: split.slot,
            measurements: self.ensemble.measurement_count(split.slot),
            rho,
            testing_count: v,
            normalized: rho / v as f64,
            two_delta_sq: 2.0 * delta_sq,
            accuracy: self.accuracy,
            halted,
            bound,
            solver_converged: estimate.converged,
            solver_iterations: estimate.iterations,
            oracle_error,
            relative_oracle_error: if self.signal_norm > 0.0 {
                oracle_error / self.signal_norm
            } else {
                0.0
            },
        };
        Ok((record, estimate))
    }
}
