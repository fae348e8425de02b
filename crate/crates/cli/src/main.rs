//! `wbsense`: run the adaptive sensing simulator from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use wbsense::harness::{self, ExperimentPlan, Sweep, SweepParameter};
use wbsense::{Execution, Preset, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "wbsense", version, about = "Adaptive compressive wideband spectrum sensing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One sensing run: trace, detection table, solver diagnostics, manifest.
    Sense(Common),
    /// Monte Carlo sweep of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trials: Trials,
        /// transmit_power_dbm, distance_km, test_fraction or accuracy_ratio.
        #[arg(long)]
        param: SweepParameter,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Verification parameter and recovery error against the slot index.
    Fig2(Common),
    /// Original and reconstructed spectrum of one run.
    Fig3(Common),
    /// Throughput of both systems against transmit power.
    Fig4 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trials: Trials,
    },
    /// Structural invariant suite; exits non-zero if any check fails.
    Validate(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (TOML); the desk preset when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shifts every base seed of the scenario by this amount.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Use the full-scale preset (N = 20000; slow).
    #[arg(long, conflicts_with = "config")]
    paper_scale: bool,
    /// Run trials one after another instead of on the thread pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct Trials {
    #[arg(long, default_value_t = 50)]
    trials: usize,
}

impl Common {
    fn scenario(&self) -> Result<ScenarioConfig> {
        let base = match (&self.config, self.paper_scale) {
            (Some(path), _) => ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            (None, true) => Preset::PaperScale.config(),
            (None, false) => Preset::Desk.config(),
        };
        Ok(base.with_trial(self.seed))
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn report(out: &Path) {
    println!("wrote {}", out.join("manifest.txt").display());
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sense(common) => {
            let config = common.scenario()?;
            let (outcome, violations) = harness::sense(&config, &common.out)?;
            println!(
                "l* = {} of {} (halted: {}), relative error {:.4}, C* = {:.4e} b/s, C = {:.4e} b/s",
                outcome.terminated_slot,
                config.mini_slots,
                outcome.halted(),
                outcome.relative_error(),
                outcome.throughput_adaptive,
                outcome.throughput_baseline
            );
            for v in &violations {
                eprintln!("invariant violated: {v}");
            }
            report(&common.out);
            Ok(violations.is_empty())
        }
        Command::Sweep {
            common,
            trials,
            param,
            values,
        } => {
            let mut plan = ExperimentPlan::new(common.scenario()?, trials.trials, &common.out);
            plan.execution = common.execution();
            plan.sweep = Some(Sweep {
                parameter: param,
                values,
            });
            let summary = harness::run(&plan)?;
            println!(
                "{} trials, mean l* = {:.2}, accurate halts {:.0}%, mean C*/C = {:.4}",
                summary.aggregate.trials,
                summary.aggregate.mean_terminated_slot,
                100.0 * summary.aggregate.accurate_halt_fraction,
                summary.aggregate.mean_throughput_ratio
            );
            for v in &summary.violations {
                eprintln!("invariant violated: {v}");
            }
            report(&common.out);
            Ok(summary.violations.is_empty())
        }
        Command::Fig2(common) => {
            let trace = harness::fig2(&common.scenario()?, &common.out)?;
            let halt = trace.iter().find(|r| r.halted).map(|r| r.slot);
            match halt {
                Some(l) => println!("criterion first holds at slot {l} of {}", trace.len()),
                None => println!("criterion never holds in {} slots", trace.len()),
            }
            report(&common.out);
            Ok(true)
        }
        Command::Fig3(common) => {
            let outcome = harness::fig3(&common.scenario()?, &common.out)?;
            println!(
                "l* = {}, occupied {:?}, detected {:?}",
                outcome.terminated_slot,
                outcome.occupied,
                outcome.detection.detected()
            );
            report(&common.out);
            Ok(true)
        }
        Command::Fig4 { common, trials } => {
            let points = harness::fig4(&common.scenario()?, trials.trials, common.execution(), &common.out)?;
            for p in &points {
                println!(
                    "P = {:>4} dBm: C* = {:.4e}, C = {:.4e}, ratio {:.4}",
                    p.value, p.mean_throughput_adaptive, p.mean_throughput_baseline, p.mean_throughput_ratio
                );
            }
            report(&common.out);
            Ok(true)
        }
        Command::Validate(common) => {
            let results = harness::run_suite(&common.scenario()?, common.execution());
            let mut ok = true;
            for r in &results {
                ok &= r.passed;
                println!(
                    "{} {:<28} {:>7.2}s  {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.seconds,
                    r.detail
                );
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
