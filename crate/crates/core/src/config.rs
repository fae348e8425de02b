//! Scenario configuration.
//!
//! A scenario is stored as TOML with a versioned schema. Presets shipped with
//! the crate live in `presets/` and are embedded at compile time.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SenseError};
use crate::recovery::SolverSettings;
use crate::throughput::LinkConfig;

pub const SCHEMA_VERSION: u32 = 1;

const DESK_PRESET: &str = include_str!("../presets/desk.toml");
const PAPER_PRESET: &str = include_str!("../presets/paper.toml");
const TINY_PRESET: &str = include_str!("../presets/tiny.toml");

/// Max attempts when placing one random subband without overlap.
const PLACEMENT_ATTEMPTS: usize = 10_000;

/// One primary-user subband of the multiband test signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubbandSpec {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    /// Received SNR in dB; `-inf` switches the subband off.
    pub snr_db: f64,
}

impl SubbandSpec {
    pub fn new(center_hz: f64, bandwidth_hz: f64, snr_db: f64) -> Self {
        Self {
            center_hz,
            bandwidth_hz,
            snr_db,
        }
    }

    /// Linear received power relative to the unit receiver-noise variance.
    pub fn power(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn low_edge(&self) -> f64 {
        self.center_hz - self.bandwidth_hz / 2.0
    }

    pub fn high_edge(&self) -> f64 {
        self.center_hz + self.bandwidth_hz / 2.0
    }

    fn overlaps(&self, other: &SubbandSpec) -> bool {
        self.low_edge() < other.high_edge() && other.low_edge() < self.high_edge()
    }
}

/// How the subband list of a scenario is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubbandPlan {
    Explicit {
        #[serde(default)]
        list: Vec<SubbandSpec>,
    },
    /// Draw `count` non-overlapping subbands from `signal_seed`; SNRs are
    /// integers in the inclusive dB range.
    Random {
        count: usize,
        bandwidth_hz: [f64; 2],
        snr_db: [i32; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeOffset {
    Fixed { seconds: f64 },
    /// Uniform over `[range[0]·τ, range[1]·τ]`.
    Uniform { range: [f64; 2] },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub noise: u64,
    pub matrix: u64,
    pub signal: u64,
}

impl Seeds {
    pub fn offset(self, by: u64) -> Self {
        Self {
            noise: self.noise.wrapping_add(by),
            matrix: self.matrix.wrapping_add(by),
            signal: self.signal.wrapping_add(by),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_noise_bound_sigmas() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub total_bandwidth_hz: f64,
    pub num_subchannels: usize,
    pub frame_length_s: f64,
    pub sensing_interval_s: f64,
    pub mini_slots: usize,
    pub nyquist_rate_hz: f64,
    pub subnyquist_rate_hz: f64,
    pub smnr_db: f64,
    /// Per-component measurement-noise variance δ². When absent it is
    /// derived from `smnr_db` and the slot-1 training measurements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,
    /// Noise amplitude bound U in units of δ, used only by the tail bound.
    #[serde(default = "default_noise_bound_sigmas")]
    pub noise_bound_sigmas: f64,
    pub test_fraction: f64,
    /// Halting accuracy ε expressed as a multiple of 2δ².
    pub accuracy_ratio: f64,
    /// Fixed recovery residual threshold ϵ; when absent it follows the
    /// training-noise quantile δ·√(2r)·(1 + 2/√r).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_threshold: Option<f64>,
    pub target_pfa: f64,
    /// Adds the unit-variance receiver noise z(t) to the Nyquist signal.
    #[serde(default = "default_true")]
    pub receiver_noise: bool,
    pub seeds: Seeds,
    pub subbands: SubbandPlan,
    pub time_offset: TimeOffset,
    pub link: LinkConfig,
    #[serde(default)]
    pub solver: SolverSettings,
}

/// Subband list and time offset drawn for one concrete run.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub subbands: Vec<SubbandSpec>,
    pub time_offset_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Desk,
    PaperScale,
    /// N = 512, for smoke tests.
    Tiny,
}

impl Preset {
    pub fn config(self) -> ScenarioConfig {
        let text = match self {
            Preset::Desk => DESK_PRESET,
            Preset::PaperScale => PAPER_PRESET,
            Preset::Tiny => TINY_PRESET,
        };
        ScenarioConfig::from_toml_str(text).expect("bundled preset is valid")
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Preset::Desk.config()
    }
}

fn is_integral(value: f64) -> bool {
    value > 0.5 && (value - value.round()).abs() <= 1e-6 * value.max(1.0)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text)?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(SenseError::SchemaVersion {
                found: config.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SenseError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Number of Nyquist samples N = τ·f_N.
    pub fn nyquist_len(&self) -> usize {
        (self.sensing_interval_s * self.nyquist_rate_hz).round() as usize
    }

    /// Total compressed measurements M_L = τ·f_S.
    pub fn total_measurements(&self) -> usize {
        (self.sensing_interval_s * self.subnyquist_rate_hz).round() as usize
    }

    pub fn rows_per_slot(&self) -> usize {
        self.total_measurements() / self.mini_slots
    }

    /// Bandwidth of one OFDM subchannel, W/J.
    pub fn subchannel_bandwidth_hz(&self) -> f64 {
        self.total_bandwidth_hz / self.num_subchannels as f64
    }

    /// The same scenario with every seed shifted by `trial`.
    pub fn with_trial(&self, trial: u64) -> Self {
        let mut config = self.clone();
        config.seeds = self.seeds.offset(trial);
        config
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.total_bandwidth_hz;
        if !(w > 0.0 && w.is_finite()) {
            return Err(SenseError::config("total bandwidth must be positive"));
        }
        if self.nyquist_rate_hz < 2.0 * w {
            return Err(SenseError::config(format!(
                "Nyquist rate {} Hz is below 2W = {} Hz",
                self.nyquist_rate_hz,
                2.0 * w
            )));
        }
        if !(self.subnyquist_rate_hz > 0.0 && self.subnyquist_rate_hz < 2.0 * w) {
            return Err(SenseError::config("sub-Nyquist rate must lie in (0, 2W)"));
        }
        if !(self.sensing_interval_s > 0.0 && self.sensing_interval_s < self.frame_length_s) {
            return Err(SenseError::config(
                "sensing interval must be positive and shorter than the frame",
            ));
        }
        let n = self.sensing_interval_s * self.nyquist_rate_hz;
        let m = self.sensing_interval_s * self.subnyquist_rate_hz;
        if !is_integral(n) {
            return Err(SenseError::config(format!("N = τ·f_N = {n} is not a natural number")));
        }
        if !is_integral(m) {
            return Err(SenseError::config(format!("M_L = τ·f_S = {m} is not a natural number")));
        }
        let (n, m) = (self.nyquist_len(), self.total_measurements());
        if m >= n {
            return Err(SenseError::config(format!("M_L = {m} must be below N = {n}")));
        }
        if self.mini_slots == 0 {
            return Err(SenseError::config("at least one mini slot is required"));
        }
        if m % self.mini_slots != 0 {
            return Err(SenseError::config(format!(
                "L = {} does not divide M_L = {m}",
                self.mini_slots
            )));
        }
        if self.num_subchannels == 0 || n % self.num_subchannels != 0 {
            return Err(SenseError::config(format!(
                "J = {} does not divide N = {n}",
                self.num_subchannels
            )));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(SenseError::config("test_fraction must lie in (0, 1)"));
        }
        if !(self.accuracy_ratio > 0.0) {
            return Err(SenseError::config("accuracy_ratio must be positive"));
        }
        if !(0.0..=1.0).contains(&self.target_pfa) {
            return Err(SenseError::config("target_pfa must lie in [0, 1]"));
        }
        if let Some(var) = self.noise_variance {
            if !(var >= 0.0 && var.is_finite()) {
                return Err(SenseError::config("noise_variance must be finite and non-negative"));
            }
        }
        if let Some(eps) = self.recovery_threshold {
            if !(eps >= 0.0) {
                return Err(SenseError::config("recovery_threshold must be non-negative"));
            }
        }
        if !(self.noise_bound_sigmas > 0.0) {
            return Err(SenseError::config("noise_bound_sigmas must be positive"));
        }
        match &self.subbands {
            SubbandPlan::Explicit { list } => validate_subbands(list, w)?,
            SubbandPlan::Random {
                bandwidth_hz,
                snr_db,
                ..
            } => {
                if !(bandwidth_hz[0] > 0.0 && bandwidth_hz[0] <= bandwidth_hz[1]) {
                    return Err(SenseError::config("random bandwidth range must be positive"));
                }
                if bandwidth_hz[1] > w {
                    return Err(SenseError::config("random bandwidth exceeds W"));
                }
                if snr_db[0] > snr_db[1] {
                    return Err(SenseError::config("SNR range is reversed"));
                }
            }
        }
        match self.time_offset {
            TimeOffset::Fixed { seconds } if !seconds.is_finite() => {
                return Err(SenseError::config("time offset must be finite"));
            }
            TimeOffset::Uniform { range } if !(range[0] <= range[1]) => {
                return Err(SenseError::config("time offset range is reversed"));
            }
            _ => {}
        }
        self.link.validate()?;
        self.solver.validate()?;
        Ok(())
    }

    /// Draws the concrete subbands and time offset from `seeds.signal`.
    pub fn realize(&self) -> Result<Scenario> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seeds.signal);
        let w = self.total_bandwidth_hz;
        let subbands = match &self.subbands {
            SubbandPlan::Explicit { list } => list.clone(),
            SubbandPlan::Random {
                count,
                bandwidth_hz,
                snr_db,
            } => {
                let mut placed: Vec<SubbandSpec> = Vec::with_capacity(*count);
                while placed.len() < *count {
                    let bandwidth = if bandwidth_hz[0] < bandwidth_hz[1] {
                        rng.gen_range(bandwidth_hz[0]..bandwidth_hz[1])
                    } else {
                        bandwidth_hz[0]
                    };
                    let snr = rng.gen_range(snr_db[0]..=snr_db[1]) as f64;
                    let mut candidate = None;
                    for _ in 0..PLACEMENT_ATTEMPTS {
                        let center = if bandwidth < w {
                            rng.gen_range(bandwidth / 2.0..w - bandwidth / 2.0)
                        } else {
                            w / 2.0
                        };
                        let spec = SubbandSpec::new(center, bandwidth, snr);
                        if placed.iter().all(|p| !p.overlaps(&spec)) {
                            candidate = Some(spec);
                            break;
                        }
                    }
                    match candidate {
                        Some(spec) => placed.push(spec),
                        None => {
                            return Err(SenseError::config(format!(
                                "could not place {count} non-overlapping subbands in W"
                            )))
                        }
                    }
                }
                placed.shuffle(&mut rng);
                placed
            }
        };
        validate_subbands(&subbands, w)?;
        let time_offset_s = match self.time_offset {
            TimeOffset::Fixed { seconds } => seconds,
            TimeOffset::Uniform { range } => {
                let tau = self.sensing_interval_s;
                if range[0] < range[1] {
                    rng.gen_range(range[0] * tau..range[1] * tau)
                } else {
                    range[0] * tau
                }
            }
        };
        Ok(Scenario {
            subbands,
            time_offset_s,
        })
    }
}

pub fn validate_subbands(subbands: &[SubbandSpec], total_bandwidth_hz: f64) -> Result<()> {
    let slack = 1e-9 * total_bandwidth_hz;
    for (i, s) in subbands.iter().enumerate() {
        if !(s.bandwidth_hz > 0.0) {
            return Err(SenseError::config(format!("subband {i}: bandwidth must be positive")));
        }
        if s.snr_db.is_nan() {
            return Err(SenseError::config(format!("subband {i}: SNR is NaN")));
        }
        if s.low_edge() < -slack || s.high_edge() > total_bandwidth_hz + slack {
            return Err(SenseError::config(format!(
                "subband {i} [{}, {}] Hz extends outside [0, W]",
                s.low_edge(),
                s.high_edge()
            )));
        }
        for (k, other) in subbands.iter().enumerate().skip(i + 1) {
            if s.overlaps(other) {
                return Err(SenseError::config(format!("subbands {i} and {k} overlap")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        let desk = Preset::Desk.config();
        assert_eq!(desk.nyquist_len(), 4000);
        assert_eq!(desk.total_measurements(), 1000);
        assert_eq!(desk.mini_slots, 20);
        assert_eq!(desk.rows_per_slot(), 50);
        let paper = Preset::PaperScale.config();
        assert_eq!(paper.nyquist_len(), 20_000);
        assert_eq!(paper.total_measurements(), 5000);
        assert_eq!(paper.rows_per_slot(), 250);
    }

    #[test]
    fn toml_round_trip() {
        let desk = Preset::Desk.config();
        let text = desk.to_toml_string().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), desk);
    }

    #[test]
    fn rejects_wrong_schema_version() {
        let text = Preset::Desk
            .config()
            .to_toml_string()
            .unwrap()
            .replace("schema_version = 1", "schema_version = 7");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&text),
            Err(SenseError::SchemaVersion { found: 7, .. })
        ));
    }

    #[test]
    fn rejects_overlapping_subbands() {
        let mut config = Preset::Desk.config();
        config.subbands = SubbandPlan::Explicit {
            list: vec![
                SubbandSpec::new(5e6, 1e6, 10.0),
                SubbandSpec::new(5.4e6, 1e6, 10.0),
            ],
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn rejects_subband_outside_band() {
        let mut config = Preset::Desk.config();
        let w = config.total_bandwidth_hz;
        config.subbands = SubbandPlan::Explicit {
            list: vec![SubbandSpec::new(w - 1e5, 1e6, 10.0)],
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn rejects_bad_structure() {
        let mut config = Preset::Desk.config();
        config.mini_slots = 7;
        assert!(config.validate().is_err());

        let mut config = Preset::Desk.config();
        config.num_subchannels = 64;
        assert!(config.validate().is_err(), "64 does not divide 4000");

        let mut config = Preset::Desk.config();
        config.test_fraction = 0.0;
        assert!(config.validate().is_err());

        let mut config = Preset::Desk.config();
        config.sensing_interval_s = config.frame_length_s;
        assert!(config.validate().is_err());
    }

    #[test]
    fn random_plan_is_deterministic_and_valid() {
        let config = Preset::Desk.config();
        let a = config.realize().unwrap();
        let b = config.realize().unwrap();
        assert_eq!(a, b);
        let SubbandPlan::Random { count, snr_db, .. } = config.subbands.clone() else {
            panic!("desk preset draws random subbands");
        };
        assert_eq!(a.subbands.len(), count);
        for s in &a.subbands {
            assert_eq!(s.snr_db.fract(), 0.0);
            assert!(s.snr_db >= snr_db[0] as f64 && s.snr_db <= snr_db[1] as f64);
        }
        validate_subbands(&a.subbands, config.total_bandwidth_hz).unwrap();
        let c = config.with_trial(1).realize().unwrap();
        assert_ne!(a, c);
    }
}
