//! Multiband wideband test signal sampled on the Nyquist grid.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{Scenario, ScenarioConfig, SubbandSpec};
use crate::dft::unitary_dft;
use crate::error::{Result, SenseError};

/// Stream of the signal-seed generator reserved for receiver noise z[n].
const RECEIVER_NOISE_STREAM: u64 = 1;

#[derive(Clone, Debug)]
pub struct NyquistSignal {
    /// x[n], n = 0..N.
    pub samples: Vec<Complex64>,
    /// X = F·x (unitary DFT).
    pub spectrum: Vec<Complex64>,
    /// Ground-truth occupied subchannels Ω, zero-based.
    pub occupied: BTreeSet<usize>,
    pub scenario: Scenario,
}

impl NyquistSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Writes `index,re,im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_complex_csv(&self.samples, out)
    }
}

pub fn write_complex_csv<W: Write>(values: &[Complex64], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["index", "re", "im"])?;
    for (i, v) in values.iter().enumerate() {
        writer.write_record([i.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    writer.flush().map_err(|e| SenseError::io("<csv>", e))?;
    Ok(())
}

pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Noiseless multiband waveform evaluated at t = n/f_N:
/// Σ_j √(E_j B_j)·sinc(B_j(t − α))·cos(2π f_j (t − α)).
pub fn multiband_samples(scenario: &Scenario, len: usize, sample_rate_hz: f64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for band in scenario.subbands.iter().filter(|b| b.power() > 0.0) {
        let amplitude = (band.power() * band.bandwidth_hz).sqrt();
        for (n, slot) in out.iter_mut().enumerate() {
            let t = n as f64 / sample_rate_hz - scenario.time_offset_s;
            *slot += amplitude * sinc(band.bandwidth_hz * t) * (2.0 * PI * band.center_hz * t).cos();
        }
    }
    out
}

/// Synthesizes the scenario's signal and its spectrum.
pub fn synthesize(config: &ScenarioConfig) -> Result<NyquistSignal> {
    config.validate()?;
    let scenario = config.realize()?;
    synthesize_scenario(config, scenario)
}

/// Synthesizes a signal for an already realized subband set.
pub fn synthesize_scenario(config: &ScenarioConfig, scenario: Scenario) -> Result<NyquistSignal> {
    crate::config::validate_subbands(&scenario.subbands, config.total_bandwidth_hz)?;
    let len = config.nyquist_len();
    let clean = multiband_samples(&scenario, len, config.nyquist_rate_hz);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.signal);
    rng.set_stream(RECEIVER_NOISE_STREAM);
    let samples: Vec<Complex64> = clean
        .into_iter()
        .map(|v| {
            let z: f64 = if config.receiver_noise {
                StandardNormal.sample(&mut rng)
            } else {
                0.0
            };
            Complex64::new(v + z, 0.0)
        })
        .collect();
    let spectrum = unitary_dft(&samples)?;
    let occupied = occupancy(
        &scenario.subbands,
        config.total_bandwidth_hz,
        config.num_subchannels,
    );
    Ok(NyquistSignal {
        samples,
        spectrum,
        occupied,
        scenario,
    })
}

/// Ω for the scenario the config realizes.
pub fn ground_truth_occupancy(config: &ScenarioConfig) -> Result<BTreeSet<usize>> {
    config.validate()?;
    let scenario = config.realize()?;
    Ok(occupancy(
        &scenario.subbands,
        config.total_bandwidth_hz,
        config.num_subchannels,
    ))
}

/// Zero-based indices j whose interval [jW/J, (j+1)W/J) meets an active
/// subband [f − B/2, f + B/2).
pub fn occupancy(
    subbands: &[SubbandSpec],
    total_bandwidth_hz: f64,
    num_subchannels: usize,
) -> BTreeSet<usize> {
    let width = total_bandwidth_hz / num_subchannels as f64;
    let mut occupied = BTreeSet::new();
    for band in subbands.iter().filter(|b| b.power() > 0.0) {
        let first = ((band.low_edge() / width).floor().max(0.0)) as usize;
        let last = ((band.high_edge() / width).ceil() as usize).min(num_subchannels);
        for j in first..last {
            let (lo, hi) = (j as f64 * width, (j + 1) as f64 * width);
            if band.low_edge() < hi && lo < band.high_edge() {
                occupied.insert(j);
            }
        }
    }
    occupied
}

/// DFT bins owned by each subchannel. Bin k carries the frequency magnitude
/// min(k, N − k)·f_N/N; both mirror halves of a subchannel belong to it, and
/// bins above W are left unassigned.
#[derive(Clone, Debug, PartialEq)]
pub struct SubchannelMap {
    bins: Vec<Vec<usize>>,
}

impl SubchannelMap {
    pub fn new(len: usize, sample_rate_hz: f64, total_bandwidth_hz: f64, num_subchannels: usize) -> Self {
        let mut bins = vec![Vec::new(); num_subchannels];
        let width = total_bandwidth_hz / num_subchannels as f64;
        for k in 0..len {
            let freq = k.min(len - k) as f64 * sample_rate_hz / len as f64;
            if freq > total_bandwidth_hz * (1.0 + 1e-12) {
                continue;
            }
            let j = ((freq / width).floor() as usize).min(num_subchannels - 1);
            bins[j].push(k);
        }
        Self { bins }
    }

    pub fn for_config(config: &ScenarioConfig) -> Self {
        Self::new(
            config.nyquist_len(),
            config.nyquist_rate_hz,
            config.total_bandwidth_hz,
            config.num_subchannels,
        )
    }

    pub fn num_subchannels(&self) -> usize {
        self.bins.len()
    }

    pub fn bins(&self, subchannel: usize) -> &[usize] {
        &self.bins[subchannel]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.bins.iter().map(Vec::as_slice)
    }
}
