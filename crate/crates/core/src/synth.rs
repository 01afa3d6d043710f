//! Synthetic measurement series generated from a modeled profile.
//!
//! Samples are taken on a regular grid of the measurement clock. Each value
//! is the modeled power at the corresponding trace time, plus relative
//! Gaussian noise, injected anomalies and an optional sync spike.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::measurement::{Alignment, MeasurementSeries, Sample, Unit, DEFAULT_RATE_HZ};
use crate::simulate::PowerProfile;

pub const DEFAULT_NOISE_REL_SIGMA: f64 = 0.01;
pub const DEFAULT_SPIKE_MAGNITUDE_W: f64 = 3.0;
pub const DEFAULT_SPIKE_WIDTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    /// Trace-clock time of the sync event.
    pub time: f64,
    pub magnitude: f64,
    /// Number of samples carrying the spike.
    pub width: usize,
}

impl Spike {
    pub fn at(time: f64) -> Self {
        Self {
            time,
            magnitude: DEFAULT_SPIKE_MAGNITUDE_W,
            width: DEFAULT_SPIKE_WIDTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Excess {
    Watts(f64),
    /// Fraction of the modeled power.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anomaly {
    pub start: f64,
    pub end: f64,
    pub excess: Excess,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub rate: f64,
    pub noise_rel_sigma: f64,
    pub seed: u64,
    pub spike: Option<Spike>,
    /// Measurement clock minus trace clock.
    pub offset: f64,
    /// Delay of the first sample after the profile start, in seconds.
    pub phase: f64,
    pub anomalies: Vec<Anomaly>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            rate: DEFAULT_RATE_HZ,
            noise_rel_sigma: DEFAULT_NOISE_REL_SIGMA,
            seed: 0,
            spike: None,
            offset: 0.0,
            phase: 0.0,
            anomalies: Vec::new(),
        }
    }
}

impl SynthConfig {
    /// Noise-free, spike-free sampling at the default rate.
    pub fn exact() -> Self {
        Self {
            noise_rel_sigma: 0.0,
            ..Self::default()
        }
    }
}

pub fn generate(profile: &PowerProfile, cfg: &SynthConfig) -> Result<MeasurementSeries> {
    if !(cfg.rate > 0.0 && cfg.rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate must be positive, got {}", cfg.rate)));
    }
    if !(cfg.noise_rel_sigma >= 0.0) {
        return Err(Error::InvalidArgument("noise sigma must be non-negative".into()));
    }
    if cfg.spike.is_some_and(|s| s.width == 0) {
        return Err(Error::InvalidArgument("spike width must be at least 1 sample".into()));
    }

    let alignment = Alignment::new(cfg.offset);
    let start = alignment.to_measurement_time(profile.t0() + cfg.phase);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::new();
    let mut spike_left = cfg.spike.map_or(0, |s| s.width);

    for k in 0.. {
        let m = start + k as f64 / cfg.rate;
        // The trace time is derived exactly as the comparison will derive it.
        let t = alignment.to_trace_time(m);
        if t > profile.t1() {
            break;
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        let Ok(modeled) = profile.power_at(t) else {
            continue;
        };
        let mut value = modeled + z * cfg.noise_rel_sigma * modeled;
        for a in &cfg.anomalies {
            if t >= a.start && t <= a.end {
                value += match a.excess {
                    Excess::Watts(w) => w,
                    Excess::Relative(f) => f * modeled,
                };
            }
        }
        if let Some(spike) = cfg.spike {
            if spike_left > 0 && t >= spike.time {
                value += spike.magnitude;
                spike_left -= 1;
            }
        }
        samples.push(Sample::new(m, value));
    }
    MeasurementSeries::new(samples, Unit::Watts, None, cfg.rate)
}
