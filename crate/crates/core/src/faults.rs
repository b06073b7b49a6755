//! Fault injection with ground-truth labels.
//!
//! Four corruption modes are applied from the onset time on:
//!
//! | mode         | corrupted sample                 |
//! |--------------|----------------------------------|
//! | catastrophic | `x · g`, `g ~ N(0, σ_c²)`        |
//! | oscillation  | `x + a sin(2π f (t − onset))`    |
//! | noise        | `x + N(0, σ_n²)`                 |
//! | drift        | `x + c (t − onset)`              |
//!
//! White measurement noise `N(0, post_noise_std²)` is then added to every
//! sample of the channel, before and after onset.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::RecordedSeries;

pub const DEFAULT_POST_NOISE_STD: f64 = 5e-3;
pub const DEFAULT_CATASTROPHIC_STD: f64 = 1.0;
pub const DEFAULT_OSCILLATION_AMPLITUDE: f64 = 0.1;
pub const DEFAULT_OSCILLATION_FREQUENCY_HZ: f64 = 0.01;
pub const DEFAULT_NOISE_STD: f64 = 0.1;
pub const DEFAULT_DRIFT_RATE: f64 = 0.001;

/// Fault family without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    None,
    Catastrophic,
    Oscillation,
    Noise,
    Drift,
}

impl FaultKind {
    pub const FAULTS: [FaultKind; 4] =
        [FaultKind::Catastrophic, FaultKind::Oscillation, FaultKind::Noise, FaultKind::Drift];

    pub fn as_str(&self) -> &'static str {
        match self {
            FaultKind::None => "none",
            FaultKind::Catastrophic => "catastrophic",
            FaultKind::Oscillation => "oscillation",
            FaultKind::Noise => "noise",
            FaultKind::Drift => "drift",
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FaultKind::None),
            "catastrophic" => Ok(FaultKind::Catastrophic),
            "oscillation" => Ok(FaultKind::Oscillation),
            "noise" => Ok(FaultKind::Noise),
            "drift" => Ok(FaultKind::Drift),
            other => Err(Error::Parameter(format!("unknown fault mode `{other}`"))),
        }
    }
}

/// Fault mode with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FaultMode {
    None,
    /// Multiplicative random gain.
    Catastrophic { gain_std: f64 },
    /// Additive slow sinusoid.
    SlowOscillation { amplitude: f64, frequency_hz: f64 },
    /// Additive white noise.
    IncreasedNoise { noise_std: f64 },
    /// Additive linear ramp, units per second.
    SlowDrift { rate: f64 },
}

impl FaultMode {
    /// Default parameters for a unit-order signal, additive terms multiplied by `scale`.
    pub fn with_defaults(kind: FaultKind, scale: f64) -> Self {
        match kind {
            FaultKind::None => FaultMode::None,
            FaultKind::Catastrophic => FaultMode::Catastrophic { gain_std: DEFAULT_CATASTROPHIC_STD },
            FaultKind::Oscillation => FaultMode::SlowOscillation {
                amplitude: DEFAULT_OSCILLATION_AMPLITUDE * scale,
                frequency_hz: DEFAULT_OSCILLATION_FREQUENCY_HZ,
            },
            FaultKind::Noise => FaultMode::IncreasedNoise { noise_std: DEFAULT_NOISE_STD * scale },
            FaultKind::Drift => FaultMode::SlowDrift { rate: DEFAULT_DRIFT_RATE * scale },
        }
    }

    pub fn kind(&self) -> FaultKind {
        match self {
            FaultMode::None => FaultKind::None,
            FaultMode::Catastrophic { .. } => FaultKind::Catastrophic,
            FaultMode::SlowOscillation { .. } => FaultKind::Oscillation,
            FaultMode::IncreasedNoise { .. } => FaultKind::Noise,
            FaultMode::SlowDrift { .. } => FaultKind::Drift,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    #[serde(flatten)]
    pub mode: FaultMode,
    pub onset_s: f64,
    pub post_noise_std: f64,
}

impl FaultSpec {
    pub fn new(mode: FaultMode, onset_s: f64) -> Self {
        Self { mode, onset_s, post_noise_std: DEFAULT_POST_NOISE_STD }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be finite and nonnegative, got {v}")))
            }
        };
        check("post_noise_std", self.post_noise_std)?;
        if !self.onset_s.is_finite() {
            return Err(Error::Parameter(format!("onset must be finite, got {}", self.onset_s)));
        }
        match self.mode {
            FaultMode::None => Ok(()),
            FaultMode::Catastrophic { gain_std } => check("gain_std", gain_std),
            FaultMode::SlowOscillation { amplitude, frequency_hz } => {
                if !(amplitude.is_finite() && frequency_hz.is_finite()) {
                    return Err(Error::Parameter("oscillation parameters must be finite".into()));
                }
                Ok(())
            }
            FaultMode::IncreasedNoise { noise_std } => check("noise_std", noise_std),
            FaultMode::SlowDrift { rate } => {
                if rate.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("drift rate must be finite, got {rate}")))
                }
            }
        }
    }
}

const FAULT_STREAM: u64 = 0;
const MEASUREMENT_STREAM: u64 = 1;

fn normal(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::Parameter(format!("normal({std}): {e}")))
}

/// Corrupts `channel` according to `spec` and returns the series with labels.
///
/// Fault draws and measurement noise come from separate ChaCha streams of
/// `seed`, so the measurement noise realization does not depend on the mode.
pub fn inject_fault(
    series: &RecordedSeries,
    channel: &str,
    spec: &FaultSpec,
    seed: u64,
) -> Result<(RecordedSeries, Vec<u8>)> {
    spec.validate()?;
    let clean = series.channel(channel)?;
    if spec.onset_s < series.t0() {
        return Err(Error::Parameter(format!(
            "onset {} precedes the series start {}",
            spec.onset_s,
            series.t0()
        )));
    }
    let mut fault_rng = ChaCha8Rng::seed_from_u64(seed);
    fault_rng.set_stream(FAULT_STREAM);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(MEASUREMENT_STREAM);
    let post = normal(spec.post_noise_std)?;
    let faulty = spec.mode != FaultMode::None;

    let mut values = Vec::with_capacity(clean.len());
    let mut labels = Vec::with_capacity(clean.len());
    for (k, &x) in clean.iter().enumerate() {
        let t = series.time(k);
        let active = faulty && t >= spec.onset_s;
        let elapsed = t - spec.onset_s;
        let corrupted = if !active {
            x
        } else {
            match spec.mode {
                FaultMode::None => x,
                FaultMode::Catastrophic { gain_std } => x * normal(gain_std)?.sample(&mut fault_rng),
                FaultMode::SlowOscillation { amplitude, frequency_hz } => {
                    x + amplitude * (2.0 * std::f64::consts::PI * frequency_hz * elapsed).sin()
                }
                FaultMode::IncreasedNoise { noise_std } => x + normal(noise_std)?.sample(&mut fault_rng),
                FaultMode::SlowDrift { rate } => x + rate * elapsed,
            }
        };
        values.push(corrupted + post.sample(&mut noise_rng));
        labels.push(u8::from(active));
    }
    Ok((series.with_channel(channel, values)?, labels))
}
