//! ℓ1 spectral recovery.
//!
//! Solves min ‖X‖₁ s.t. ‖R − A·X‖₂ ≤ ϵ through its penalised form
//! ½‖R − A·X‖₂² + λ‖X‖₁, using monotone FISTA inside each stage and a
//! geometric λ-continuation that stops once the training residual lands in
//! the band ϵ·(1 ± slack). If a stage overshoots below the band, λ is
//! bisected between the last two stages.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::operator::{SensingOperator, Workspace};
use crate::error::{check_len, Result, SenseError};
use crate::linalg::RowBlock;

const POWER_ITERATION_SEED: u64 = 0x5eed;
const MAX_BACKTRACKS: usize = 60;
/// λ ratio between successive stages of a warm-started search.
const WARM_STEP: f64 = 2.0;
const WARM_STAGES: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Iteration cap per continuation stage.
    pub max_iterations: usize,
    /// A stage ends once ‖z − y‖ ≤ stop_tolerance·‖z‖ for the proximal step.
    pub stop_tolerance: f64,
    pub continuation_steps: usize,
    pub tol_slack: f64,
    /// Smallest λ as a fraction of λ_max = ‖Aᴴ R‖∞.
    pub lambda_floor_ratio: f64,
    /// Extra bisection stages after overshooting the residual band.
    pub refinement_steps: usize,
    pub power_iterations: usize,
    /// Step size is `step_safety / ‖A‖²`, with ‖A‖² from power iteration.
    pub step_safety: f64,
    /// Start each slot's λ search from the previous slot's solution.
    pub warm_start: bool,
    /// Keep the per-iteration objective of every stage.
    #[serde(skip)]
    pub record_objective: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            stop_tolerance: 1e-5,
            continuation_steps: 8,
            tol_slack: 0.05,
            lambda_floor_ratio: 1e-7,
            refinement_steps: 4,
            power_iterations: 20,
            step_safety: 0.99,
            warm_start: true,
            record_objective: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.stop_tolerance > 0.0
            && self.stop_tolerance < 1.0
            && self.continuation_steps > 0
            && self.tol_slack > 0.0
            && self.tol_slack < 1.0
            && self.lambda_floor_ratio > 0.0
            && self.lambda_floor_ratio < 1.0
            && self.power_iterations > 0
            && self.step_safety > 0.0
            && self.step_safety <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(SenseError::config(format!("invalid solver settings: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageDiagnostics {
    pub lambda: f64,
    pub iterations: usize,
    pub backtracks: usize,
    pub residual_norm: f64,
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct SpectralEstimate {
    /// X̂, length N.
    pub spectrum: Vec<Complex64>,
    /// ‖R − A·X̂‖₂.
    pub residual_norm: f64,
    /// Total iterations over all stages.
    pub iterations: usize,
    pub converged: bool,
    /// The λ of the returned iterate (0 for the trivial solution).
    pub lambda: f64,
    pub threshold: f64,
    pub stages: Vec<StageDiagnostics>,
    /// Per-stage objective sequences when `record_objective` is set.
    pub objective_trace: Vec<Vec<f64>>,
}

impl SpectralEstimate {
    pub fn write_diagnostics_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["stage", "lambda", "iterations", "backtracks", "residual_norm", "objective"])?;
        for (i, s) in self.stages.iter().enumerate() {
            writer.write_record([
                (i + 1).to_string(),
                s.lambda.to_string(),
                s.iterations.to_string(),
                s.backtracks.to_string(),
                s.residual_norm.to_string(),
                s.objective.to_string(),
            ])?;
        }
        writer.flush().map_err(|e| SenseError::io("<csv>", e))?;
        Ok(())
    }
}

/// Recovers X̂ from training samples `training = Φ·F⁻¹·X + n`.
pub fn recover(
    training: &[Complex64],
    phi: RowBlock<'_>,
    epsilon: f64,
    settings: &SolverSettings,
) -> Result<SpectralEstimate> {
    let op = SensingOperator::new(phi)?;
    recover_with(&op, training, epsilon, settings)
}

pub fn recover_with(
    op: &SensingOperator<'_>,
    training: &[Complex64],
    epsilon: f64,
    settings: &SolverSettings,
) -> Result<SpectralEstimate> {
    recover_warm(op, training, epsilon, settings, None)
}

/// A previous solution used to start the λ search.
#[derive(Clone, Copy, Debug)]
pub struct WarmStart<'w> {
    pub spectrum: &'w [Complex64],
    pub lambda: f64,
}

impl<'w> WarmStart<'w> {
    pub fn from_estimate(estimate: &'w SpectralEstimate) -> Option<Self> {
        (estimate.lambda > 0.0).then_some(Self {
            spectrum: &estimate.spectrum,
            lambda: estimate.lambda,
        })
    }
}

/// Like [`recover_with`], but starting from `warm` when given: the first
/// stage runs at the previous λ from the previous spectrum, and λ then moves
/// by factors of two until the residual band is bracketed.
pub fn recover_warm(
    op: &SensingOperator<'_>,
    training: &[Complex64],
    epsilon: f64,
    settings: &SolverSettings,
    warm: Option<WarmStart<'_>>,
) -> Result<SpectralEstimate> {
    check_len("training samples", op.rows(), training.len())?;
    if let Some(w) = &warm {
        check_len("warm start", op.cols(), w.spectrum.len())?;
    }
    if op.rows() == 0 {
        return Err(SenseError::arg("recovery needs at least one training sample"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(SenseError::arg(format!("recovery threshold {epsilon} must be finite and >= 0")));
    }
    settings.validate()?;
    Solver::new(op, training, epsilon, settings).run(warm)
}

/// ‖X − X̂‖₂, for evaluation only.
pub fn oracle_recovery_error(truth: &[Complex64], estimate: &[Complex64]) -> Result<f64> {
    check_len("oracle error", truth.len(), estimate.len())?;
    Ok(truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Largest eigenvalue of AᴴA by power iteration from a fixed start vector.
pub fn operator_norm_squared(op: &SensingOperator<'_>, iterations: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v: Vec<Complex64> = (0..op.cols())
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let mut ws = Workspace::new(op.cols());
    let mut av = vec![Complex64::default(); op.rows()];
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let n = norm(&v);
        if n == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|c| *c /= n);
        op.apply_into(&v, &mut ws, &mut av);
        op.adjoint_into(&av, &mut ws, &mut v);
        estimate = norm(&v);
    }
    estimate
}

fn norm(v: &[Complex64]) -> f64 {
    norm_sqr(v).sqrt()
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

fn l1(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).sum()
}

fn residual_sqr(ax: &[Complex64], data: &[Complex64]) -> f64 {
    ax.iter().zip(data).map(|(a, d)| (a - d).norm_sqr()).sum()
}

/// Shrinks magnitudes by `threshold`, keeping the phase.
fn soft_threshold(v: Complex64, threshold: f64) -> Complex64 {
    let mag = v.norm();
    if mag <= threshold {
        Complex64::default()
    } else {
        v * (1.0 - threshold / mag)
    }
}

struct Solver<'s, 'a> {
    op: &'s SensingOperator<'a>,
    data: &'s [Complex64],
    epsilon: f64,
    settings: &'s SolverSettings,
    lipschitz: f64,
    /// Aᴴ·R, so that the gradient Aᴴ(A·Y − R) follows from Aᴴ·A·Y.
    correlation: Vec<Complex64>,
    ws: Workspace,
    iterations: usize,
    stages: Vec<StageDiagnostics>,
    objective_trace: Vec<Vec<f64>>,
}

/// Current iterate X together with A·X and Aᴴ·A·X.
#[derive(Clone)]
struct Iterate {
    x: Vec<Complex64>,
    ax: Vec<Complex64>,
    gx: Vec<Complex64>,
}

impl<'s, 'a> Solver<'s, 'a> {
    fn new(
        op: &'s SensingOperator<'a>,
        data: &'s [Complex64],
        epsilon: f64,
        settings: &'s SolverSettings,
    ) -> Self {
        Self {
            op,
            data,
            epsilon,
            settings,
            lipschitz: 0.0,
            correlation: Vec::new(),
            ws: Workspace::new(op.cols()),
            iterations: 0,
            stages: Vec::new(),
            objective_trace: Vec::new(),
        }
    }

    fn residual(&self, it: &Iterate) -> f64 {
        residual_sqr(&it.ax, self.data).sqrt()
    }

    fn finish(self, it: Iterate, lambda: f64) -> SpectralEstimate {
        let residual_norm = self.residual(&it);
        SpectralEstimate {
            converged: residual_norm <= self.epsilon * (1.0 + self.settings.tol_slack),
            spectrum: it.x,
            residual_norm,
            iterations: self.iterations,
            lambda,
            threshold: self.epsilon,
            stages: self.stages,
            objective_trace: self.objective_trace,
        }
    }

    fn run(mut self, warm: Option<WarmStart<'_>>) -> Result<SpectralEstimate> {
        let (n, m) = (self.op.cols(), self.op.rows());
        let zero = Iterate {
            x: vec![Complex64::default(); n],
            ax: vec![Complex64::default(); m],
            gx: vec![Complex64::default(); n],
        };
        let band_lo = self.epsilon * (1.0 - self.settings.tol_slack);
        let band_hi = self.epsilon * (1.0 + self.settings.tol_slack);
        if norm(self.data) <= band_hi {
            // X̂ = 0 is feasible and has the smallest possible ℓ1 norm.
            return Ok(self.finish(zero, 0.0));
        }
        let mut correlation = vec![Complex64::default(); n];
        self.op.adjoint_into(self.data, &mut self.ws, &mut correlation);
        let lambda_max = correlation.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if lambda_max == 0.0 {
            return Ok(self.finish(zero, 0.0));
        }
        self.correlation = correlation;
        let norm_sq = operator_norm_squared(self.op, self.settings.power_iterations);
        self.lipschitz = norm_sq / self.settings.step_safety;
        match warm {
            Some(w) if w.lambda > 0.0 => Ok(self.run_warm(w, lambda_max, band_lo, band_hi)),
            _ => Ok(self.run_cold(zero, lambda_max, band_lo, band_hi)),
        }
    }

    fn run_cold(mut self, mut current: Iterate, lambda_max: f64, band_lo: f64, band_hi: f64) -> SpectralEstimate {
        let steps = self.settings.continuation_steps;
        let mut previous_lambda = lambda_max;
        let mut lambda = lambda_max;
        for s in 1..=steps {
            lambda = lambda_max * self.settings.lambda_floor_ratio.powf(s as f64 / steps as f64);
            self.solve_stage(&mut current, lambda);
            let residual = self.residual(&current);
            if residual >= band_lo && residual <= band_hi {
                return self.finish(current, lambda);
            }
            if residual < band_lo {
                return self.bisect(current.clone(), current, lambda, previous_lambda, band_lo, band_hi);
            }
            previous_lambda = lambda;
        }
        self.finish(current, lambda)
    }

    fn run_warm(mut self, warm: WarmStart<'_>, lambda_max: f64, band_lo: f64, band_hi: f64) -> SpectralEstimate {
        let mut ax = vec![Complex64::default(); self.op.rows()];
        let mut gx = vec![Complex64::default(); self.op.cols()];
        self.op.gram_into(warm.spectrum, &mut self.ws, &mut ax, &mut gx);
        let mut current = Iterate {
            x: warm.spectrum.to_vec(),
            ax,
            gx,
        };
        let floor = lambda_max * self.settings.lambda_floor_ratio;
        let mut lambda = warm.lambda.clamp(floor, lambda_max);
        self.solve_stage(&mut current, lambda);
        let residual = self.residual(&current);
        if residual >= band_lo && residual <= band_hi {
            return self.finish(current, lambda);
        }
        let above = residual > band_hi;
        let mut feasible = (!above).then(|| (current.clone(), lambda));
        for _ in 0..WARM_STAGES {
            let previous = lambda;
            lambda = if above { lambda / WARM_STEP } else { lambda * WARM_STEP };
            if lambda < floor || lambda > lambda_max {
                break;
            }
            self.solve_stage(&mut current, lambda);
            let residual = self.residual(&current);
            if residual >= band_lo && residual <= band_hi {
                return self.finish(current, lambda);
            }
            match (above, residual > band_hi) {
                // crossed from above the band to below it
                (true, false) => return self.bisect(current.clone(), current, lambda, previous, band_lo, band_hi),
                // crossed from below the band to above it
                (false, true) => {
                    let (fx, flam) = feasible.take().expect("feasible iterate recorded");
                    return self.bisect(current, fx, flam, lambda, band_lo, band_hi);
                }
                (false, false) => feasible = Some((current.clone(), lambda)),
                (true, true) => {}
            }
        }
        match feasible {
            Some((x, lam)) => self.finish(x, lam),
            None => self.finish(current, lambda),
        }
    }

    /// λ = `lo` gave the residual-feasible iterate `feasible` (under the
    /// band); λ = `hi` lies above it. Bisects in log λ starting from `current`.
    fn bisect(
        mut self,
        mut current: Iterate,
        feasible: Iterate,
        lo: f64,
        hi: f64,
        band_lo: f64,
        band_hi: f64,
    ) -> SpectralEstimate {
        let (mut lo, mut hi) = (lo, hi);
        let mut feasible = (feasible, lo);
        for _ in 0..self.settings.refinement_steps {
            let mid = (lo * hi).sqrt();
            self.solve_stage(&mut current, mid);
            let residual = self.residual(&current);
            if residual >= band_lo && residual <= band_hi {
                return self.finish(current, mid);
            }
            if residual < band_lo {
                lo = mid;
                feasible = (current.clone(), mid);
            } else {
                hi = mid;
            }
        }
        self.finish(feasible.0, feasible.1)
    }

    /// Monotone FISTA on ½‖A·X − R‖² + λ‖X‖₁, warm-started from `it`.
    fn solve_stage(&mut self, it: &mut Iterate, lambda: f64) {
        let (n, m) = (self.op.cols(), self.op.rows());
        let data = self.data;
        let objective = |ax: &[Complex64], x: &[Complex64]| 0.5 * residual_sqr(ax, data) + lambda * l1(x);

        let mut best = objective(&it.ax, &it.x);
        let mut prev = it.clone();
        let mut y = it.x.clone();
        let mut ay = it.ax.clone();
        let mut gy = it.gx.clone();
        let mut z = vec![Complex64::default(); n];
        let mut az = vec![Complex64::default(); m];
        let mut gz = vec![Complex64::default(); n];
        let mut grad = vec![Complex64::default(); n];
        let mut resid = vec![Complex64::default(); m];
        let mut t = 1.0f64;
        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut backtracks = 0;

        while iterations < self.settings.max_iterations {
            iterations += 1;
            for ((r, a), d) in resid.iter_mut().zip(&ay).zip(data) {
                *r = a - d;
            }
            let f_y = 0.5 * norm_sqr(&resid);
            for ((g, a), c) in grad.iter_mut().zip(&gy).zip(&self.correlation) {
                *g = a - c;
            }

            let mut f_z;
            loop {
                let step = 1.0 / self.lipschitz;
                for ((zk, yk), gk) in z.iter_mut().zip(&y).zip(&grad) {
                    *zk = soft_threshold(yk - gk * step, lambda * step);
                }
                self.op.gram_into(&z, &mut self.ws, &mut az, &mut gz);
                f_z = 0.5 * residual_sqr(&az, data);
                let mut linear = 0.0;
                let mut dist = 0.0;
                for ((zk, yk), gk) in z.iter().zip(&y).zip(&grad) {
                    let d = zk - yk;
                    linear += (gk.conj() * d).re;
                    dist += d.norm_sqr();
                }
                let model = f_y + linear + 0.5 * self.lipschitz * dist;
                if f_z <= model + 1e-12 * f_y.abs() || backtracks >= MAX_BACKTRACKS {
                    break;
                }
                self.lipschitz *= 2.0;
                backtracks += 1;
            }

            let gap = z.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let z_norm = norm(&z);
            let f_total = f_z + lambda * l1(&z);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let accepted = f_total <= best;
            if accepted {
                best = f_total;
                // prev ← it, it ← z
                std::mem::swap(&mut prev.x, &mut it.x);
                std::mem::swap(&mut prev.ax, &mut it.ax);
                std::mem::swap(&mut prev.gx, &mut it.gx);
                it.x.copy_from_slice(&z);
                it.ax.copy_from_slice(&az);
                it.gx.copy_from_slice(&gz);
            } else {
                prev.x.copy_from_slice(&it.x);
                prev.ax.copy_from_slice(&it.ax);
                prev.gx.copy_from_slice(&it.gx);
            }
            // y = x_k + (t/t')(z − x_k) + ((t − 1)/t')(x_k − x_{k−1})
            let c_z = t / t_next;
            let c_m = (t - 1.0) / t_next;
            for k in 0..n {
                y[k] = it.x[k] + (z[k] - it.x[k]) * c_z + (it.x[k] - prev.x[k]) * c_m;
                gy[k] = it.gx[k] + (gz[k] - it.gx[k]) * c_z + (it.gx[k] - prev.gx[k]) * c_m;
            }
            for i in 0..m {
                ay[i] = it.ax[i] + (az[i] - it.ax[i]) * c_z + (it.ax[i] - prev.ax[i]) * c_m;
            }
            // momentum restart once the objective stops decreasing
            t = if accepted { t_next } else { 1.0 };
            if self.settings.record_objective {
                trace.push(best);
            }
            if gap <= self.settings.stop_tolerance * z_norm.max(f64::MIN_POSITIVE) {
                break;
            }
        }

        self.iterations += iterations;
        self.stages.push(StageDiagnostics {
            lambda,
            iterations,
            backtracks,
            residual_norm: residual_sqr(&it.ax, data).sqrt(),
            objective: best,
        });
        if self.settings.record_objective {
            self.objective_trace.push(trace);
        }
    }
}
