use std::collections::BTreeSet;

use num_complex::Complex64;
use proptest::prelude::*;
use wbsense::config::Scenario;
use wbsense::dft::inverse_unitary_dft;
use wbsense::harness::{check_invariants, run_trials};
use wbsense::orchestrator::{full_trace, sense_signal};
use wbsense::{adaptive_sense, Execution, MeasurementEnsemble, NyquistSignal, Preset, ScenarioConfig};

fn tiny() -> ScenarioConfig {
    Preset::Tiny.config()
}

/// A real tone sitting exactly on DFT bin `bin`: two conjugate spikes.
fn tone(n: usize, bin: usize, amplitude: f64) -> NyquistSignal {
    let mut spectrum = vec![Complex64::default(); n];
    spectrum[bin] = Complex64::new(amplitude, 0.5 * amplitude);
    spectrum[n - bin] = spectrum[bin].conj();
    NyquistSignal {
        samples: inverse_unitary_dft(&spectrum).unwrap(),
        spectrum,
        occupied: BTreeSet::new(),
        scenario: Scenario {
            subbands: Vec::new(),
            time_offset_s: 0.0,
        },
    }
}

#[test]
fn vanishing_accuracy_never_halts() {
    let mut config = tiny();
    config.accuracy_ratio = 1e-12;
    let outcome = adaptive_sense(&config).unwrap();
    assert_eq!(outcome.terminated_slot, config.mini_slots);
    assert!(!outcome.halted());
    assert_eq!(outcome.throughput_adaptive, outcome.throughput_baseline);
    assert!(check_invariants(&config, &outcome).is_empty());
}

#[test]
fn exact_recovery_with_tiny_noise_halts_at_first_slot() {
    let mut config = tiny();
    config.noise_variance = Some(1e-6);
    config.accuracy_ratio = 100.0;
    let signal = tone(config.nyquist_len(), 37, 3.0);
    let ensemble = MeasurementEnsemble::build(&config, &signal).unwrap();
    let outcome = sense_signal(&config, &signal, &ensemble).unwrap();
    assert_eq!(outcome.terminated_slot, 1, "{:#?}", outcome.verification_trace);
    assert!(outcome.halted());
    assert!(outcome.relative_error() < 1e-3);
    assert!(outcome.throughput_adaptive > outcome.throughput_baseline);
}

#[test]
fn trace_records_every_slot_and_error_shrinks() {
    let config = tiny();
    let trace = full_trace(&config).unwrap();
    assert_eq!(trace.len(), config.mini_slots);
    for (l, r) in trace.iter().enumerate() {
        assert_eq!(r.slot, l + 1);
        assert_eq!(r.measurements, (l + 1) * config.rows_per_slot());
        assert!(r.testing_count > 0 && r.rho >= 0.0);
    }
    let first = trace.first().unwrap().relative_oracle_error;
    let last = trace.last().unwrap().relative_oracle_error;
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn halting_run_is_a_prefix_of_the_full_trace() {
    let mut config = tiny();
    config.accuracy_ratio = 1e4;
    let outcome = adaptive_sense(&config).unwrap();
    let trace = full_trace(&config).unwrap();
    for (a, b) in outcome.verification_trace.iter().zip(&trace) {
        assert_eq!(a, b);
    }
}

#[test]
fn execution_modes_give_identical_outcomes() {
    let config = tiny();
    let a = run_trials(&config, 4, Execution::Parallel).unwrap();
    let b = run_trials(&config, 4, Execution::Sequential).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.terminated_slot, y.terminated_slot);
        assert_eq!(x.estimate.spectrum, y.estimate.spectrum);
        assert_eq!(x.verification_trace, y.verification_trace);
        assert_eq!(x.detection.decisions, y.detection.decisions);
    }
}

#[test]
fn mean_error_does_not_grow_with_slots() {
    let config = tiny();
    let traces: Vec<_> = (0..20).map(|t| full_trace(&config.with_trial(t)).unwrap()).collect();
    let mean = |l: usize| traces.iter().map(|tr| tr[l].relative_oracle_error).sum::<f64>() / traces.len() as f64;
    for l in 1..config.mini_slots {
        assert!(mean(l) <= mean(l - 1) * 1.05, "slot {}: {} > {}", l + 1, mean(l), mean(l - 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn outcomes_satisfy_structural_invariants(trial in 0u64..1000, ratio in 0.1f64..1e5) {
        let mut config = tiny().with_trial(trial);
        config.accuracy_ratio = ratio;
        let outcome = adaptive_sense(&config).unwrap();
        prop_assert!(check_invariants(&config, &outcome).is_empty());
        prop_assert!((1..=config.mini_slots).contains(&outcome.terminated_slot));
        prop_assert_eq!(outcome.verification_trace.len(), outcome.terminated_slot);
        prop_assert!(outcome.throughput_adaptive >= outcome.throughput_baseline);
    }
}
