//! Opportunistic throughput of the secondary link.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Result, SenseError};

fn default_noise_density() -> f64 {
    -174.0
}

/// Which subchannels contribute to the throughput sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdleSet {
    /// Subchannels with no primary user, j ∉ Ω.
    #[default]
    TrulyIdle,
    /// Subchannels the detector declared idle.
    DecidedIdle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub transmit_power_dbm: f64,
    pub distance_km: f64,
    #[serde(default = "default_noise_density")]
    pub noise_density_dbm_per_hz: f64,
    #[serde(default)]
    pub idle_set: IdleSet,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            transmit_power_dbm: 40.0,
            distance_km: 0.05,
            noise_density_dbm_per_hz: default_noise_density(),
            idle_set: IdleSet::TrulyIdle,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.transmit_power_dbm.is_finite() {
            return Err(SenseError::config("transmit power must be finite"));
        }
        if !(self.distance_km > 0.0 && self.distance_km.is_finite()) {
            return Err(SenseError::config("link distance must be positive"));
        }
        if !self.noise_density_dbm_per_hz.is_finite() {
            return Err(SenseError::config("noise density must be finite"));
        }
        Ok(())
    }

    pub fn transmit_power_w(&self) -> f64 {
        dbm_to_watts(self.transmit_power_dbm)
    }

    pub fn noise_density_w_per_hz(&self) -> f64 {
        dbm_to_watts(self.noise_density_dbm_per_hz)
    }

    /// |H|² from the path loss at the configured distance.
    pub fn channel_gain(&self) -> Result<f64> {
        Ok(10f64.powf(-path_loss_db(self.distance_km)? / 10.0))
    }

    /// Shannon rate B·log2(1 + P|H|²/(N₀B)) of one subchannel of width `bandwidth_hz`.
    pub fn subchannel_rate(&self, bandwidth_hz: f64) -> Result<f64> {
        let snr = self.transmit_power_w() * self.channel_gain()? / (self.noise_density_w_per_hz() * bandwidth_hz);
        Ok(bandwidth_hz * (1.0 + snr).log2())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// 127 + 30·log10(D) dB with D in km.
pub fn path_loss_db(distance_km: f64) -> Result<f64> {
    if !(distance_km > 0.0 && distance_km.is_finite()) {
        return Err(SenseError::arg(format!("distance {distance_km} km must be positive")));
    }
    Ok(127.0 + 30.0 * distance_km.log10())
}

/// One term of the throughput sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelTerm {
    pub false_alarm: f64,
    pub bandwidth_hz: f64,
    /// Linear P|H|²/(N₀B).
    pub snr: f64,
}

impl ChannelTerm {
    pub fn rate(&self) -> f64 {
        (1.0 - self.false_alarm) * self.bandwidth_hz * (1.0 + self.snr).log2()
    }
}

/// time_factor · Σ (1 − P_f)·B·log2(1 + snr).
pub fn aggregate(time_factor: f64, terms: &[ChannelTerm]) -> f64 {
    time_factor * terms.iter().map(ChannelTerm::rate).sum::<f64>()
}

/// (T − τ·l⋆/L)/T.
pub fn adaptive_time_factor(terminated_slot: usize, config: &ScenarioConfig) -> Result<f64> {
    let slots = config.mini_slots;
    if terminated_slot == 0 || terminated_slot > slots {
        return Err(SenseError::arg(format!(
            "termination slot {terminated_slot} outside 1..={slots}"
        )));
    }
    let t = config.frame_length_s;
    Ok((t - config.sensing_interval_s * terminated_slot as f64 / slots as f64) / t)
}

/// (T − τ)/T.
pub fn baseline_time_factor(config: &ScenarioConfig) -> f64 {
    (config.frame_length_s - config.sensing_interval_s) / config.frame_length_s
}

fn idle_sum(decisions: &[bool], occupied: &BTreeSet<usize>, link: &LinkConfig, config: &ScenarioConfig) -> Result<f64> {
    let j = config.num_subchannels;
    if decisions.len() != j {
        return Err(SenseError::DimensionMismatch {
            context: "decision vector".into(),
            expected: j,
            actual: decisions.len(),
        });
    }
    let bandwidth = config.subchannel_bandwidth_hz();
    let term = ChannelTerm {
        false_alarm: config.target_pfa,
        bandwidth_hz: bandwidth,
        snr: link.transmit_power_w() * link.channel_gain()? / (link.noise_density_w_per_hz() * bandwidth),
    };
    let idle = (0..j)
        .filter(|k| match link.idle_set {
            IdleSet::TrulyIdle => !occupied.contains(k),
            IdleSet::DecidedIdle => !decisions[*k],
        })
        .count();
    Ok(idle as f64 * term.rate())
}

/// C⋆ for termination at slot `terminated_slot` (1-based).
pub fn adaptive_throughput(
    terminated_slot: usize,
    decisions: &[bool],
    occupied: &BTreeSet<usize>,
    link: &LinkConfig,
    config: &ScenarioConfig,
) -> Result<f64> {
    let factor = adaptive_time_factor(terminated_slot, config)?;
    Ok(factor * idle_sum(decisions, occupied, link, config)?)
}

/// C, the same sum with the full sensing interval spent.
pub fn baseline_throughput(
    decisions: &[bool],
    occupied: &BTreeSet<usize>,
    link: &LinkConfig,
    config: &ScenarioConfig,
) -> Result<f64> {
    Ok(baseline_time_factor(config) * idle_sum(decisions, occupied, link, config)?)
}
