//! Per-subchannel energy detection on a reconstructed spectrum.
//!
//! The statistic of subchannel j is T_j = Σ |X̂[k]|² over its bins. Both
//! mirror halves of a real signal's spectrum belong to the same subchannel,
//! so a noise-only subchannel with n_j bins and per-bin energy η behaves as
//! η·χ²(n_j). η is estimated from the quietest quarter of subchannels and
//! corrected for the downward bias of picking the smallest ones.

use std::collections::BTreeSet;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;
use statrs::distribution::{Binomial, ChiSquared, Continuous, ContinuousCDF, Discrete};

use crate::config::ScenarioConfig;
use crate::error::{check_len, Result, SenseError};
use crate::signal::SubchannelMap;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionResult {
    /// true = primary user present.
    pub decisions: Vec<bool>,
    pub test_statistics: Vec<f64>,
    /// γ_j.
    pub thresholds: Vec<f64>,
    /// Estimated per-bin noise energy η.
    pub noise_floor: f64,
    pub target_pfa: f64,
    /// Filled in by the harness over many trials.
    pub empirical_pfa: Option<f64>,
    pub empirical_pd: Option<f64>,
}

impl DetectionResult {
    pub fn detected(&self) -> BTreeSet<usize> {
        self.decisions
            .iter()
            .enumerate()
            .filter_map(|(j, &d)| d.then_some(j))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["subchannel", "statistic", "threshold", "occupied"])?;
        for j in 0..self.decisions.len() {
            w.write_record([
                j.to_string(),
                format!("{:e}", self.test_statistics[j]),
                format!("{:e}", self.thresholds[j]),
                self.decisions[j].to_string(),
            ])?;
        }
        w.flush().map_err(|e| SenseError::io("<csv>", e))?;
        Ok(())
    }
}

/// Energy of every subchannel.
pub fn subchannel_energies(spectrum: &[Complex64], map: &SubchannelMap) -> Vec<f64> {
    map.iter()
        .map(|bins| bins.iter().map(|&k| spectrum[k].norm_sqr()).sum())
        .collect()
}

/// E[mean of the q smallest of J iid χ²(d)/d], by integrating the survival
/// functions of the order statistics.
pub fn quartile_bias(subchannels: usize, quiet: usize, dof: f64) -> f64 {
    let chi = ChiSquared::new(dof).expect("positive dof");
    let binom = |p: f64| Binomial::new(p.clamp(0.0, 1.0), subchannels as u64).expect("valid binomial");
    let upper = chi.inverse_cdf(1.0 - 1e-12) / dof;
    const STEPS: usize = 4000;
    let h = upper / STEPS as f64;
    // Σ_{i≤q} P(X_(i) > x) = Σ_{m<q} (q − m)·P(#{X ≤ x} = m)
    let integrand = |x: f64| {
        let b = binom(chi.cdf(x * dof));
        (0..quiet).map(|m| (quiet - m) as f64 * b.pmf(m as u64)).sum::<f64>()
    };
    let mut total = 0.5 * (integrand(0.0) + integrand(upper));
    for i in 1..STEPS {
        total += integrand(i as f64 * h);
    }
    total * h / quiet as f64
}

/// Noise-floor estimate η from the quietest ⌊J/4⌋ subchannels.
pub fn noise_floor(statistics: &[f64], dofs: &[usize]) -> Result<f64> {
    let j = statistics.len();
    if j < 4 {
        return Err(SenseError::arg(format!(
            "{j} subchannels; at least 4 are needed for the quartile floor"
        )));
    }
    check_len("degrees of freedom", j, dofs.len())?;
    let quiet = j / 4;
    let mut order: Vec<usize> = (0..j).filter(|&k| dofs[k] > 0).collect();
    if order.len() < quiet {
        return Err(SenseError::arg("too many empty subchannels"));
    }
    order.sort_by(|&a, &b| {
        let (ea, eb) = (statistics[a] / dofs[a] as f64, statistics[b] / dofs[b] as f64);
        ea.total_cmp(&eb)
    });
    let chosen = &order[..quiet];
    let energy: f64 = chosen.iter().map(|&k| statistics[k]).sum();
    let bins: usize = chosen.iter().map(|&k| dofs[k]).sum();
    let mut sorted: Vec<usize> = dofs.iter().copied().filter(|&d| d > 0).collect();
    sorted.sort_unstable();
    let typical = sorted[sorted.len() / 2] as f64;
    Ok(energy / bins as f64 / quartile_bias(order.len(), quiet, typical))
}

/// γ such that η·χ²(dof) exceeds it with probability `pfa`.
pub fn chi_square_threshold(noise_floor: f64, dof: usize, pfa: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pfa) {
        return Err(SenseError::arg(format!("target_pfa {pfa} outside [0, 1]")));
    }
    if dof == 0 || pfa >= 1.0 {
        return Ok(0.0);
    }
    if pfa <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(noise_floor * upper_quantile(dof as f64, pfa))
}

/// x with P(χ²(dof) > x) = `tail`, polished by Newton steps on the survival
/// function.
pub fn upper_quantile(dof: f64, tail: f64) -> f64 {
    let chi = ChiSquared::new(dof).expect("positive dof");
    let mut x = chi.inverse_cdf(1.0 - tail);
    for _ in 0..8 {
        let density = chi.pdf(x);
        if !(density > 0.0) {
            break;
        }
        let step = (chi.sf(x) - tail) / density;
        x += step;
        if step.abs() <= 1e-14 * x {
            break;
        }
    }
    x
}

/// Decisions from explicit thresholds: occupied ⇔ T_j > γ_j.
pub fn detect_with_thresholds(statistics: &[f64], thresholds: &[f64]) -> Result<Vec<bool>> {
    check_len("thresholds", statistics.len(), thresholds.len())?;
    Ok(statistics.iter().zip(thresholds).map(|(t, g)| t > g).collect())
}

/// Energy detector on an explicit subchannel map.
pub fn energy_detect_map(spectrum: &[Complex64], map: &SubchannelMap, target_pfa: f64) -> Result<DetectionResult> {
    if map.num_subchannels() < 4 {
        return Err(SenseError::arg(format!(
            "{} subchannels; at least 4 are needed for the quartile floor",
            map.num_subchannels()
        )));
    }
    if !(0.0..=1.0).contains(&target_pfa) {
        return Err(SenseError::arg(format!("target_pfa {target_pfa} outside [0, 1]")));
    }
    let statistics = subchannel_energies(spectrum, map);
    let dofs: Vec<usize> = map.iter().map(<[usize]>::len).collect();
    let eta = noise_floor(&statistics, &dofs)?;
    let thresholds = dofs
        .iter()
        .map(|&d| chi_square_threshold(eta, d, target_pfa))
        .collect::<Result<Vec<_>>>()?;
    let decisions = detect_with_thresholds(&statistics, &thresholds)?;
    Ok(DetectionResult {
        decisions,
        test_statistics: statistics,
        thresholds,
        noise_floor: eta,
        target_pfa,
        empirical_pfa: None,
        empirical_pd: None,
    })
}

pub fn energy_detect(spectrum: &[Complex64], config: &ScenarioConfig, target_pfa: f64) -> Result<DetectionResult> {
    check_len("spectrum length", config.nyquist_len(), spectrum.len())?;
    energy_detect_map(spectrum, &SubchannelMap::for_config(config), target_pfa)
}

/// Rates against the ground truth: (false alarms over idle subchannels,
/// detections over occupied ones). An empty class gives rate 0.
pub fn confusion(decisions: &[bool], occupied: &BTreeSet<usize>) -> (f64, f64) {
    let (mut fa, mut idle, mut hit, mut busy) = (0usize, 0usize, 0usize, 0usize);
    for (j, &d) in decisions.iter().enumerate() {
        if occupied.contains(&j) {
            busy += 1;
            hit += d as usize;
        } else {
            idle += 1;
            fa += d as usize;
        }
    }
    let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (rate(fa, idle), rate(hit, busy))
}
