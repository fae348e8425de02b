//! Monte Carlo experiment runner and figure reproduction.
//!
//! Every trial `t` runs the scenario with all seeds shifted by `t`, so the
//! outputs depend only on the plan and not on the order trials execute in.

mod suite;
mod svg;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

pub use suite::{run_suite, CheckResult};
pub use svg::{render_svg, Frame, PlotSpec, Table};

use crate::config::{ScenarioConfig, SubbandPlan};
use crate::error::{Result, SenseError};
use crate::orchestrator::{adaptive_sense, full_trace, SensingOutcome};
use crate::par::{self, Execution};
use crate::throughput::{adaptive_throughput, baseline_throughput, LinkConfig};
use crate::validation::{halting_check, VerificationRecord};

/// Relative oracle error below which a halted trial counts as accurate.
pub const ACCURATE_ERROR: f64 = 0.05;

/// Transmit powers of the throughput figure, in dBm.
pub const FIG4_POWERS_DBM: [f64; 11] = [30.0, 32.0, 34.0, 36.0, 38.0, 40.0, 42.0, 44.0, 46.0, 48.0, 50.0];
pub const FIG4_DISTANCE_KM: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    TransmitPower,
    Distance,
    TestFraction,
    Accuracy,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::TransmitPower => "transmit_power_dbm",
            SweepParameter::Distance => "distance_km",
            SweepParameter::TestFraction => "test_fraction",
            SweepParameter::Accuracy => "accuracy_ratio",
        }
    }

    /// Whether a change only affects the link, so sensing can be reused.
    fn link_only(self) -> bool {
        matches!(self, SweepParameter::TransmitPower | SweepParameter::Distance)
    }

    pub fn apply(self, config: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut c = config.clone();
        match self {
            SweepParameter::TransmitPower => c.link.transmit_power_dbm = value,
            SweepParameter::Distance => c.link.distance_km = value,
            SweepParameter::TestFraction => c.test_fraction = value,
            SweepParameter::Accuracy => c.accuracy_ratio = value,
        }
        c
    }
}

impl FromStr for SweepParameter {
    type Err = SenseError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" | "transmit_power" | "transmit_power_dbm" => Ok(SweepParameter::TransmitPower),
            "distance" | "distance_km" => Ok(SweepParameter::Distance),
            "test_fraction" => Ok(SweepParameter::TestFraction),
            "accuracy" | "accuracy_ratio" => Ok(SweepParameter::Accuracy),
            other => Err(SenseError::arg(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub scenario: ScenarioConfig,
    pub trials: usize,
    pub sweep: Option<Sweep>,
    pub output_dir: PathBuf,
    pub execution: Execution,
}

impl ExperimentPlan {
    pub fn new(scenario: ScenarioConfig, trials: usize, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            scenario,
            trials,
            sweep: None,
            output_dir: output_dir.into(),
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(SenseError::arg("at least one trial is required"));
        }
        self.scenario.validate()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(SenseError::arg("sweep has no values"));
            }
            for &v in &sweep.values {
                if !v.is_finite() {
                    return Err(SenseError::arg(format!("sweep value {v} is not finite")));
                }
                sweep.parameter.apply(&self.scenario, v).validate()?;
            }
        }
        Ok(())
    }
}

/// One line of the per-trial table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub noise_seed: u64,
    pub matrix_seed: u64,
    pub signal_seed: u64,
    pub terminated_slot: usize,
    pub halted: bool,
    pub measurements: usize,
    pub rho_over_v: f64,
    pub two_delta_sq: f64,
    pub accuracy: f64,
    pub relative_error: f64,
    pub solver_converged: bool,
    pub solver_iterations: usize,
    pub throughput_adaptive: f64,
    pub throughput_baseline: f64,
    pub throughput_ratio: f64,
    pub false_alarm_rate: f64,
    pub detection_rate: f64,
    pub occupied: String,
    pub detected: String,
}

fn index_list(set: &BTreeSet<usize>) -> String {
    set.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

impl TrialRow {
    pub fn from_outcome(trial: usize, config: &ScenarioConfig, outcome: &SensingOutcome) -> Self {
        let last = outcome.final_record();
        let (pfa, pd) = crate::detection::confusion(&outcome.detection.decisions, &outcome.occupied);
        Self {
            trial,
            noise_seed: config.seeds.noise,
            matrix_seed: config.seeds.matrix,
            signal_seed: config.seeds.signal,
            terminated_slot: outcome.terminated_slot,
            halted: last.halted,
            measurements: last.measurements,
            rho_over_v: last.normalized,
            two_delta_sq: last.two_delta_sq,
            accuracy: last.accuracy,
            relative_error: last.relative_oracle_error,
            solver_converged: last.solver_converged,
            solver_iterations: last.solver_iterations,
            throughput_adaptive: outcome.throughput_adaptive,
            throughput_baseline: outcome.throughput_baseline,
            throughput_ratio: ratio(outcome.throughput_adaptive, outcome.throughput_baseline),
            false_alarm_rate: pfa,
            detection_rate: pd,
            occupied: index_list(&outcome.occupied),
            detected: index_list(&outcome.detection.detected()),
        }
    }

    /// Halted inside the accuracy band with a small true error.
    pub fn accurate_halt(&self) -> bool {
        self.halted
            && (self.rho_over_v - self.two_delta_sq).abs() <= self.accuracy
            && self.relative_error <= ACCURATE_ERROR
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        f64::NAN
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub trials: usize,
    pub mean_terminated_slot: f64,
    pub halted_fraction: f64,
    pub accurate_halt_fraction: f64,
    pub mean_relative_error: f64,
    pub mean_throughput_adaptive: f64,
    pub mean_throughput_baseline: f64,
    pub mean_throughput_ratio: f64,
    pub min_throughput_ratio: f64,
    pub mean_false_alarm_rate: f64,
    pub mean_detection_rate: f64,
}

impl Aggregate {
    pub fn from_rows(rows: &[TrialRow]) -> Self {
        let n = rows.len().max(1) as f64;
        let mean = |f: &dyn Fn(&TrialRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let frac = |f: &dyn Fn(&TrialRow) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / n;
        Self {
            trials: rows.len(),
            mean_terminated_slot: mean(&|r| r.terminated_slot as f64),
            halted_fraction: frac(&|r| r.halted),
            accurate_halt_fraction: frac(&TrialRow::accurate_halt),
            mean_relative_error: mean(&|r| r.relative_error),
            mean_throughput_adaptive: mean(&|r| r.throughput_adaptive),
            mean_throughput_baseline: mean(&|r| r.throughput_baseline),
            mean_throughput_ratio: mean(&|r| r.throughput_ratio),
            min_throughput_ratio: rows.iter().map(|r| r.throughput_ratio).fold(f64::INFINITY, f64::min),
            mean_false_alarm_rate: mean(&|r| r.false_alarm_rate),
            mean_detection_rate: mean(&|r| r.detection_rate),
        }
    }
}

/// Checks the structural guarantees of one outcome; returns violations.
pub fn check_invariants(config: &ScenarioConfig, outcome: &SensingOutcome) -> Vec<String> {
    let mut v = Vec::new();
    let l = outcome.terminated_slot;
    let slots = config.mini_slots;
    if l == 0 || l > slots {
        v.push(format!("terminated slot {l} outside 1..={slots}"));
    }
    if outcome.verification_trace.len() != l {
        v.push(format!("trace has {} entries for l* = {l}", outcome.verification_trace.len()));
    }
    for (i, r) in outcome.verification_trace.iter().enumerate() {
        let held = r.solver_converged && halting_check(r.rho, r.testing_count, r.two_delta_sq / 2.0, r.accuracy);
        if held != r.halted {
            v.push(format!("slot {}: halted flag disagrees with the criterion", r.slot));
        }
        if r.halted && i + 1 != l {
            v.push(format!("slot {} halted before l* = {l}", r.slot));
        }
    }
    if let Some(last) = outcome.verification_trace.last() {
        if !last.halted && l != slots {
            v.push("stopped early without halting".into());
        }
    }
    let (a, b) = (outcome.throughput_adaptive, outcome.throughput_baseline);
    if a < b {
        v.push(format!("adaptive throughput {a} below baseline {b}"));
    }
    if b > 0.0 {
        let t = config.frame_length_s;
        let expected = (t - config.sensing_interval_s * l as f64 / slots as f64) / (t - config.sensing_interval_s);
        if ((a / b) - expected).abs() > 1e-9 * expected {
            v.push(format!("throughput ratio {} differs from time factor {expected}", a / b));
        }
    }
    if (a == b) != (l == slots) && b > 0.0 {
        v.push("throughput equality does not match l* = L".into());
    }
    v
}

/// Runs `trials` independent sensing runs.
pub fn run_trials(config: &ScenarioConfig, trials: usize, exec: Execution) -> Result<Vec<SensingOutcome>> {
    par::map_range(trials, exec, |t| adaptive_sense(&config.with_trial(t as u64)))
        .into_iter()
        .collect()
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub rows: Vec<TrialRow>,
    pub aggregate: Aggregate,
    pub violations: Vec<String>,
}

fn summarize(config: &ScenarioConfig, outcomes: &[SensingOutcome]) -> RunSummary {
    let mut violations = Vec::new();
    let rows: Vec<TrialRow> = outcomes
        .iter()
        .enumerate()
        .map(|(t, o)| {
            violations.extend(
                check_invariants(config, o)
                    .into_iter()
                    .map(|m| format!("trial {t}: {m}")),
            );
            TrialRow::from_outcome(t, &config.with_trial(t as u64), o)
        })
        .collect();
    RunSummary {
        aggregate: Aggregate::from_rows(&rows),
        rows,
        violations,
    }
}

pub fn write_rows<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| SenseError::io("<csv>", e))?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(trace: &[VerificationRecord], out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        slot: usize,
        measurements: usize,
        rho_over_v: f64,
        two_delta_sq: f64,
        band_low: f64,
        band_high: f64,
        oracle_error: f64,
        relative_error: f64,
        solver_converged: bool,
        halted: bool,
    }
    let rows: Vec<Row> = trace
        .iter()
        .map(|r| Row {
            slot: r.slot,
            measurements: r.measurements,
            rho_over_v: r.normalized,
            two_delta_sq: r.two_delta_sq,
            band_low: r.two_delta_sq - r.accuracy,
            band_high: r.two_delta_sq + r.accuracy,
            oracle_error: r.oracle_error,
            relative_error: r.relative_oracle_error,
            solver_converged: r.solver_converged,
            halted: r.halted,
        })
        .collect();
    write_rows(&rows, out)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| SenseError::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| SenseError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SenseError::io(dir, e))
}

fn plot_file(csv_path: &Path, svg_path: &Path, spec: &PlotSpec) -> Result<()> {
    let text = std::fs::read_to_string(csv_path).map_err(|e| SenseError::io(csv_path, e))?;
    let svg = render_svg(&Table::from_csv_str(&text)?, spec)?;
    write_file(svg_path, &svg)
}

/// Sparsity bound k_max assumed from the subband plan: DFT bins covered by
/// the widest subbands, counting both mirror halves.
pub fn assumed_max_sparsity(config: &ScenarioConfig) -> usize {
    let per_bin = config.nyquist_rate_hz / config.nyquist_len() as f64;
    let widths: Vec<f64> = match &config.subbands {
        SubbandPlan::Explicit { list } => list.iter().map(|s| s.bandwidth_hz).collect(),
        SubbandPlan::Random { count, bandwidth_hz, .. } => vec![bandwidth_hz[1]; *count],
    };
    widths.iter().map(|w| 2 * (w / per_bin).ceil() as usize).sum::<usize>().max(1)
}

/// C₀ implied by M_L = C₀·k_max·ln(N/k_max).
pub fn implied_c0(config: &ScenarioConfig, k_max: usize) -> f64 {
    let n = config.nyquist_len() as f64;
    let k = k_max as f64;
    config.total_measurements() as f64 / (k * (n / k).ln())
}

/// A plain-text record of what was run.
#[derive(Clone, Debug, Default)]
pub struct Manifest {
    pub command: String,
    pub entries: Vec<(String, String)>,
    pub config: Option<String>,
    pub trial_lines: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &ScenarioConfig) -> Result<Self> {
        let k = assumed_max_sparsity(config);
        let mut m = Self {
            command: command.into(),
            config: Some(config.to_toml_string()?),
            ..Self::default()
        };
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("nyquist_samples", config.nyquist_len());
        m.push("total_measurements", config.total_measurements());
        m.push("mini_slots", config.mini_slots);
        m.push("seed.noise", config.seeds.noise);
        m.push("seed.matrix", config.seeds.matrix);
        m.push("seed.signal", config.seeds.signal);
        m.push("assumed_k_max", k);
        m.push("implied_c0", implied_c0(config, k));
        Ok(m)
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "wbsense run manifest");
        let _ = writeln!(s, "command = {}", self.command);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        if !self.trial_lines.is_empty() {
            let _ = writeln!(s, "\n[trials]");
            for line in &self.trial_lines {
                let _ = writeln!(s, "{line}");
            }
        }
        if let Some(cfg) = &self.config {
            let _ = writeln!(s, "\n[config]");
            s.push_str(cfg);
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.render())
    }
}

fn trial_line(row: &TrialRow) -> String {
    format!(
        "trial {} seeds=({},{},{}) l*={} halted={} occupied=[{}] detected=[{}]",
        row.trial,
        row.noise_seed,
        row.matrix_seed,
        row.signal_seed,
        row.terminated_slot,
        row.halted,
        row.occupied,
        row.detected
    )
}

fn push_aggregate(m: &mut Manifest, a: &Aggregate) {
    m.push("mean_terminated_slot", a.mean_terminated_slot);
    m.push("halted_fraction", a.halted_fraction);
    m.push("accurate_halt_fraction", a.accurate_halt_fraction);
    m.push("mean_throughput_ratio", a.mean_throughput_ratio);
    m.push("mean_false_alarm_rate", a.mean_false_alarm_rate);
    m.push("mean_detection_rate", a.mean_detection_rate);
}

/// Executes the plan: `trials.csv`, `summary.csv` and `manifest.txt`, plus
/// `sweep.csv` and `sweep.svg` when the plan has a sweep.
pub fn run(plan: &ExperimentPlan) -> Result<RunSummary> {
    plan.validate()?;
    ensure_dir(&plan.output_dir)?;
    let config = &plan.scenario;
    let outcomes = run_trials(config, plan.trials, plan.execution)?;
    let summary = summarize(config, &outcomes);
    write_rows(&summary.rows, create(&plan.output_dir.join("trials.csv"))?)?;
    write_rows(
        std::slice::from_ref(&summary.aggregate),
        create(&plan.output_dir.join("summary.csv"))?,
    )?;
    let mut manifest = Manifest::new("run", config)?;
    manifest.push("trials", plan.trials);
    push_aggregate(&mut manifest, &summary.aggregate);
    manifest.push("violations", summary.violations.len());
    if let Some(sweep) = &plan.sweep {
        let points = sweep_from(config, sweep, plan.trials, plan.execution, &outcomes)?;
        let path = plan.output_dir.join("sweep.csv");
        write_rows(&points, create(&path)?)?;
        let spec = PlotSpec::new(
            &format!("throughput vs {}", sweep.parameter.name()),
            "value",
            &["mean_throughput_adaptive", "mean_throughput_baseline"],
        )
        .labels(sweep.parameter.name(), "bits/s");
        plot_file(&path, &plan.output_dir.join("sweep.svg"), &spec)?;
        manifest.push("sweep_parameter", sweep.parameter.name());
        manifest.push(
            "sweep_values",
            sweep.values.iter().map(f64::to_string).collect::<Vec<_>>().join(" "),
        );
    }
    manifest.trial_lines = summary.rows.iter().map(trial_line).collect();
    manifest.write(&plan.output_dir.join("manifest.txt"))?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub parameter: &'static str,
    pub value: f64,
    pub trials: usize,
    pub mean_terminated_slot: f64,
    pub mean_relative_error: f64,
    pub mean_throughput_adaptive: f64,
    pub mean_throughput_baseline: f64,
    pub mean_throughput_ratio: f64,
    pub min_throughput_ratio: f64,
}

fn sweep_point(parameter: SweepParameter, value: f64, a: &Aggregate) -> SweepPoint {
    SweepPoint {
        parameter: parameter.name(),
        value,
        trials: a.trials,
        mean_terminated_slot: a.mean_terminated_slot,
        mean_relative_error: a.mean_relative_error,
        mean_throughput_adaptive: a.mean_throughput_adaptive,
        mean_throughput_baseline: a.mean_throughput_baseline,
        mean_throughput_ratio: a.mean_throughput_ratio,
        min_throughput_ratio: a.min_throughput_ratio,
    }
}

/// Re-evaluates the throughputs of finished runs under another link.
pub fn with_link(outcome: &SensingOutcome, link: &LinkConfig, config: &ScenarioConfig) -> Result<SensingOutcome> {
    let mut o = outcome.clone();
    o.throughput_adaptive = adaptive_throughput(
        o.terminated_slot,
        &o.detection.decisions,
        &o.occupied,
        link,
        config,
    )?;
    o.throughput_baseline = baseline_throughput(&o.detection.decisions, &o.occupied, link, config)?;
    Ok(o)
}

fn sweep_from(
    config: &ScenarioConfig,
    sweep: &Sweep,
    trials: usize,
    exec: Execution,
    base: &[SensingOutcome],
) -> Result<Vec<SweepPoint>> {
    sweep
        .values
        .iter()
        .map(|&value| {
            let c = sweep.parameter.apply(config, value);
            let outcomes = if sweep.parameter.link_only() {
                base.iter().map(|o| with_link(o, &c.link, &c)).collect::<Result<Vec<_>>>()?
            } else {
                run_trials(&c, trials, exec)?
            };
            Ok(sweep_point(sweep.parameter, value, &summarize(&c, &outcomes).aggregate))
        })
        .collect()
}

/// Parameter sweep without writing files.
pub fn sweep(config: &ScenarioConfig, sweep: &Sweep, trials: usize, exec: Execution) -> Result<Vec<SweepPoint>> {
    let base = if sweep.parameter.link_only() {
        run_trials(config, trials, exec)?
    } else {
        Vec::new()
    };
    sweep_from(config, sweep, trials, exec, &base)
}

/// Fig. 2 shape: ρ_l/v_l against 2δ² and the true recovery error for
/// every slot of one run. Writes `fig2_trace.csv`, `fig2_trace.svg`,
/// `fig2_error.svg` and `manifest.txt`.
pub fn fig2(config: &ScenarioConfig, out: &Path) -> Result<Vec<VerificationRecord>> {
    ensure_dir(out)?;
    let trace = full_trace(config)?;
    let csv_path = out.join("fig2_trace.csv");
    write_trace_csv(&trace, create(&csv_path)?)?;
    let spec = PlotSpec::new(
        "verification parameter vs predicted value",
        "slot",
        &["rho_over_v", "two_delta_sq", "band_low", "band_high"],
    )
    .labels("mini time slot l", "rho_l / v_l")
    .log_y();
    plot_file(&csv_path, &out.join("fig2_trace.svg"), &spec)?;
    let spec = PlotSpec::new("actual recovery error", "slot", &["relative_error"])
        .labels("mini time slot l", "||X - X_l|| / ||X||")
        .log_y();
    plot_file(&csv_path, &out.join("fig2_error.svg"), &spec)?;
    let mut manifest = Manifest::new("fig2", config)?;
    let first_halt = trace.iter().find(|r| r.halted).map(|r| r.slot);
    manifest.push("first_halting_slot", first_halt.map_or("none".to_string(), |s| s.to_string()));
    manifest.write(&out.join("manifest.txt"))?;
    Ok(trace)
}

/// Fig. 3 shape: original and reconstructed magnitude spectra over [0, W].
pub fn fig3(config: &ScenarioConfig, out: &Path) -> Result<SensingOutcome> {
    ensure_dir(out)?;
    let signal = crate::signal::synthesize(config)?;
    let outcome = adaptive_sense(config)?;
    #[derive(Serialize)]
    struct Row {
        bin: usize,
        frequency_hz: f64,
        original: f64,
        reconstructed: f64,
    }
    let n = config.nyquist_len();
    let rows: Vec<Row> = (0..=n / 2)
        .map(|k| Row {
            bin: k,
            frequency_hz: k as f64 * config.nyquist_rate_hz / n as f64,
            original: signal.spectrum[k].norm(),
            reconstructed: outcome.estimate.spectrum[k].norm(),
        })
        .filter(|r| r.frequency_hz <= config.total_bandwidth_hz * (1.0 + 1e-12))
        .collect();
    let csv_path = out.join("fig3_spectrum.csv");
    write_rows(&rows, create(&csv_path)?)?;
    let spec = PlotSpec::new(
        &format!("spectrum, acquisition stopped at slot {}", outcome.terminated_slot),
        "frequency_hz",
        &["original", "reconstructed"],
    )
    .labels("frequency (Hz)", "|X|");
    plot_file(&csv_path, &out.join("fig3_spectrum.svg"), &spec)?;
    outcome
        .detection
        .write_csv(create(&out.join("fig3_detection.csv"))?)?;
    let mut manifest = Manifest::new("fig3", config)?;
    manifest.push("terminated_slot", outcome.terminated_slot);
    manifest.push("relative_error", outcome.relative_error());
    manifest.push("occupied", index_list(&outcome.occupied));
    manifest.push("detected", index_list(&outcome.detection.detected()));
    manifest.write(&out.join("manifest.txt"))?;
    Ok(outcome)
}

/// Fig. 4 shape: mean throughput of both systems against transmit power at
/// D = 50 m.
pub fn fig4(config: &ScenarioConfig, trials: usize, exec: Execution, out: &Path) -> Result<Vec<SweepPoint>> {
    ensure_dir(out)?;
    let mut c = config.clone();
    c.link.distance_km = FIG4_DISTANCE_KM;
    let sw = Sweep {
        parameter: SweepParameter::TransmitPower,
        values: FIG4_POWERS_DBM.to_vec(),
    };
    let base = run_trials(&c, trials, exec)?;
    let points = sweep_from(&c, &sw, trials, exec, &base)?;
    let csv_path = out.join("fig4_throughput.csv");
    write_rows(&points, create(&csv_path)?)?;
    let spec = PlotSpec::new(
        "opportunistic throughput, D = 50 m",
        "value",
        &["mean_throughput_adaptive", "mean_throughput_baseline"],
    )
    .labels("transmit power (dBm)", "throughput (bits/s)");
    plot_file(&csv_path, &out.join("fig4_throughput.svg"), &spec)?;
    let mut manifest = Manifest::new("fig4", &c)?;
    manifest.push("trials", trials);
    push_aggregate(&mut manifest, &summarize(&c, &base).aggregate);
    manifest.write(&out.join("manifest.txt"))?;
    Ok(points)
}

/// One run with its trace, detection table and manifest.
pub fn sense(config: &ScenarioConfig, out: &Path) -> Result<(SensingOutcome, Vec<String>)> {
    ensure_dir(out)?;
    let outcome = adaptive_sense(config)?;
    let violations = check_invariants(config, &outcome);
    write_trace_csv(&outcome.verification_trace, create(&out.join("trace.csv"))?)?;
    outcome.detection.write_csv(create(&out.join("detection.csv"))?)?;
    outcome
        .estimate
        .write_diagnostics_csv(create(&out.join("solver.csv"))?)?;
    let row = TrialRow::from_outcome(0, config, &outcome);
    let mut manifest = Manifest::new("sense", config)?;
    manifest.push("terminated_slot", outcome.terminated_slot);
    manifest.push("halted", outcome.halted());
    manifest.push("relative_error", outcome.relative_error());
    manifest.push("throughput_adaptive", outcome.throughput_adaptive);
    manifest.push("throughput_baseline", outcome.throughput_baseline);
    manifest.push("violations", violations.len());
    manifest.trial_lines.push(trial_line(&row));
    manifest.write(&out.join("manifest.txt"))?;
    Ok((outcome, violations))
}
