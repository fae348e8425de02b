//! Structural invariant checks behind the `validate` subcommand.

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::acquisition::{AcquisitionState, MeasurementEnsemble, RowRole};
use crate::config::{Preset, ScenarioConfig};
use crate::dft::{inverse_unitary_dft, norm, unitary_dft};
use crate::error::Result;
use crate::linalg::RowBlock;
use crate::par::Execution;
use crate::recovery::SensingOperator;
use crate::signal::synthesize;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckResult {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn parseval(config: &ScenarioConfig) -> Result<(bool, String)> {
    let signal = synthesize(config)?;
    let (a, b) = (norm(&signal.samples), norm(&signal.spectrum));
    let rel = (a - b).abs() / a;
    let back = inverse_unitary_dft(&signal.spectrum)?;
    let round = back
        .iter()
        .zip(&signal.samples)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / a;
    Ok((rel <= 1e-10 && round <= 1e-10, format!("|‖x‖−‖X‖|/‖x‖ = {rel:.2e}, round trip {round:.2e}")))
}

fn partition(config: &ScenarioConfig) -> Result<(bool, String)> {
    let e = MeasurementEnsemble::generate(config)?;
    let m = config.total_measurements();
    let mut seen = vec![0u8; m];
    for &g in e.training_index().iter().chain(e.testing_index()) {
        seen[g] += 1;
    }
    let mut ok = seen.iter().all(|&c| c == 1);
    for l in 1..=config.mini_slots {
        let ml = e.measurement_count(l);
        let v = (config.test_fraction * ml as f64).round() as usize;
        let tests = (0..ml).filter(|&g| matches!(e.role(g), RowRole::Testing(_))).count();
        ok &= e.testing_count(l) == v && e.training_count(l) == ml - v && tests == v;
    }
    Ok((ok, format!("{m} rows, {} training, {} testing", e.training_index().len(), e.testing_index().len())))
}

fn prefix(config: &ScenarioConfig) -> Result<(bool, String)> {
    let n = config.nyquist_len();
    let (l, m) = (config.mini_slots, config.total_measurements());
    let half = l / 2;
    let short = MeasurementEnsemble::generate_raw(n, half, half * m / l, config.test_fraction, config.seeds.matrix)?;
    let full = MeasurementEnsemble::generate_raw(n, l, m, config.test_fraction, config.seeds.matrix)?;
    let rows = half * m / l;
    let mut ok = (0..rows).all(|g| short.role(g) == full.role(g) && short.row(g) == full.row(g));
    let signal = synthesize(config)?;
    let mut a = AcquisitionState::new(config.seeds.noise);
    let mut b = AcquisitionState::new(config.seeds.noise);
    let mut e = full.clone();
    e.set_noise(1.0, 4.0);
    for _ in 0..2 {
        a.acquire_slot(&e, &signal.samples)?;
    }
    for _ in 0..3 {
        b.acquire_slot(&e, &signal.samples)?;
    }
    ok &= b.samples()[..a.samples().len()] == *a.samples();
    Ok((ok, format!("first {rows} rows of a {half}-slot draw match the {l}-slot draw")))
}

fn adjoint() -> Result<(bool, String)> {
    let (r, n) = (12, 48);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let data: Vec<f64> = (0..r * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let op = SensingOperator::new(RowBlock::new(&data, n))?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let u: Vec<Complex64> = (0..r)
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let lhs: Complex64 = op.apply(&v)?.iter().zip(&u).map(|(a, b)| a * b.conj()).sum();
        let rhs: Complex64 = v.iter().zip(&op.adjoint(&u)?).map(|(a, b)| a * b.conj()).sum();
        worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1.0));
    }
    Ok((worst <= 1e-12, format!("max |<Av,u> − <v,Aᴴu>| = {worst:.2e}")))
}

fn deterministic(exec: Execution) -> Result<(bool, String)> {
    let config = Preset::Tiny.config();
    let render = |exec| -> Result<Vec<u8>> {
        let outcomes = super::run_trials(&config, 3, exec)?;
        let summary = super::summarize(&config, &outcomes);
        let mut buf = Vec::new();
        super::write_rows(&summary.rows, &mut buf)?;
        for o in &outcomes {
            super::write_trace_csv(&o.verification_trace, &mut buf)?;
            o.detection.write_csv(&mut buf)?;
        }
        Ok(buf)
    };
    let first = render(exec)?;
    let second = render(exec)?;
    let other = render(Execution::Sequential)?;
    let ok = first == second && first == other;
    let spectrum = unitary_dft(&synthesize(&config)?.samples)?;
    let again = unitary_dft(&synthesize(&config)?.samples)?;
    Ok((ok && spectrum == again, format!("{} bytes of trial output compared", first.len())))
}

fn outcome_invariants(exec: Execution) -> Result<(bool, String)> {
    let config = Preset::Tiny.config();
    let outcomes = super::run_trials(&config, 4, exec)?;
    let violations: Vec<String> = outcomes
        .iter()
        .flat_map(|o| super::check_invariants(&config, o))
        .collect();
    Ok((violations.is_empty(), if violations.is_empty() {
        format!("{} runs clean", outcomes.len())
    } else {
        violations.join("; ")
    }))
}

/// Runs every structural check on `config` (the desk preset by default).
pub fn run_suite(config: &ScenarioConfig, exec: Execution) -> Vec<CheckResult> {
    vec![
        check("parseval", || parseval(config)),
        check("training/testing partition", || partition(config)),
        check("matrix and sample prefix", || prefix(config)),
        check("adjoint consistency", adjoint),
        check("deterministic reruns", || deterministic(exec)),
        check("outcome invariants", || outcome_invariants(exec)),
    ]
}
