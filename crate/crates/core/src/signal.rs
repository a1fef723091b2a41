//! Drive waveform synthesis, endogenous background noise and superposition.
//!
//! Everything here is a pure function of its arguments. Noise generation is
//! seeded with ChaCha so the same seed yields bit-identical output on every
//! platform.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of sinusoids summed by the endogenous noise model.
pub const NOISE_COMPONENTS: usize = 64;

/// Uniformly sampled voltage record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt_s: f64,
    pub t0_s: f64,
    pub samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dt_s: f64, t0_s: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt_s.is_finite() && dt_s > 0.0) {
            return Err(Error::invalid(format!("dt_s must be positive, got {dt_s}")));
        }
        if samples.len() < 2 {
            return Err(Error::invalid(format!(
                "a time series needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !t0_s.is_finite() {
            return Err(Error::invalid("t0_s must be finite"));
        }
        Ok(Self {
            dt_s,
            t0_s,
            samples,
        })
    }

    /// All-zero series of `len` samples.
    pub fn zeros(dt_s: f64, len: usize) -> Result<Self> {
        Self::new(dt_s, 0.0, vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.t0_s + index as f64 * self.dt_s
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 * self.dt_s
    }

    pub fn sample_rate_hz(&self) -> f64 {
        1.0 / self.dt_s
    }

    pub fn nyquist_hz(&self) -> f64 {
        0.5 / self.dt_s
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dt_s: self.dt_s,
            t0_s: self.t0_s,
            samples: self.samples.iter().map(|x| x * factor).collect(),
        }
    }

    /// Drops the first `count` samples, shifting `t0_s` accordingly.
    pub fn skip(&self, count: usize) -> Result<Self> {
        Self::new(
            self.dt_s,
            self.time_at(count),
            self.samples.get(count..).unwrap_or_default().to_vec(),
        )
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.samples.len() == other.samples.len()
            && (self.dt_s - other.dt_s).abs() <= 1e-12 * self.dt_s.max(other.dt_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    Sine,
    Square,
    Triangle,
}

impl std::str::FromStr for WaveformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sine" => Ok(Self::Sine),
            "square" => Ok(Self::Square),
            "triangle" => Ok(Self::Triangle),
            other => Err(Error::invalid(format!("unknown waveform kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformSpec {
    pub kind: WaveformKind,
    pub frequency_hz: f64,
    /// Peak-to-peak amplitude in volts.
    pub amplitude_vpp: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub dc_offset_v: f64,
}

impl WaveformSpec {
    pub fn sine(frequency_hz: f64, amplitude_vpp: f64) -> Self {
        Self {
            kind: WaveformKind::Sine,
            frequency_hz,
            amplitude_vpp,
            phase_rad: 0.0,
            dc_offset_v: 0.0,
        }
    }

    pub fn with_kind(mut self, kind: WaveformKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(Error::invalid(format!(
                "frequency must be positive, got {}",
                self.frequency_hz
            )));
        }
        if !(self.amplitude_vpp.is_finite() && self.amplitude_vpp >= 0.0) {
            return Err(Error::invalid(format!(
                "amplitude_vpp must be nonnegative, got {}",
                self.amplitude_vpp
            )));
        }
        if !self.phase_rad.is_finite() || !self.dc_offset_v.is_finite() {
            return Err(Error::invalid("phase and dc offset must be finite"));
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.frequency_hz
    }

    /// Waveform value at time `t_s`.
    pub fn value_at(&self, t_s: f64) -> f64 {
        let amp = 0.5 * self.amplitude_vpp;
        let shape = match self.kind {
            WaveformKind::Sine => (2.0 * PI * self.frequency_hz * t_s + self.phase_rad).sin(),
            WaveformKind::Square => {
                if cycle_position(self.frequency_hz, t_s, self.phase_rad) < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            WaveformKind::Triangle => {
                let p = cycle_position(self.frequency_hz, t_s, self.phase_rad);
                if p < 0.25 {
                    4.0 * p
                } else if p < 0.75 {
                    2.0 - 4.0 * p
                } else {
                    4.0 * p - 4.0
                }
            }
        };
        self.dc_offset_v + amp * shape
    }
}

/// Fraction of the current cycle in [0, 1), aligned so that all kinds cross
/// zero upwards at the same instant as the sine.
fn cycle_position(frequency_hz: f64, t_s: f64, phase_rad: f64) -> f64 {
    let x = frequency_hz * t_s + phase_rad / (2.0 * PI);
    let p = x - x.floor();
    // floor() of values like 2.9999999999999996 leaves p just below 1.0
    if p >= 1.0 - 1e-12 {
        0.0
    } else {
        p
    }
}

/// Samples `spec` on a uniform grid starting at t = 0.
pub fn synthesize(spec: &WaveformSpec, dt_s: f64, duration_s: f64) -> Result<TimeSeries> {
    spec.validate()?;
    if !(dt_s.is_finite() && dt_s > 0.0) {
        return Err(Error::invalid(format!("dt_s must be positive, got {dt_s}")));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    if dt_s >= 0.5 / spec.frequency_hz {
        return Err(Error::Nyquist {
            frequency_hz: spec.frequency_hz,
            dt_s,
        });
    }
    if duration_s < spec.period_s() * (1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "duration {duration_s} s is shorter than one period ({} s)",
            spec.period_s()
        )));
    }
    let n = (duration_s / dt_s).round() as usize;
    let samples = (0..n).map(|i| spec.value_at(i as f64 * dt_s)).collect();
    TimeSeries::new(dt_s, 0.0, samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndogenousNoiseSpec {
    #[serde(default = "default_band_low")]
    pub band_low_hz: f64,
    #[serde(default = "default_band_high")]
    pub band_high_hz: f64,
    pub rms_v: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_band_low() -> f64 {
    0.05
}

fn default_band_high() -> f64 {
    0.2
}

impl Default for EndogenousNoiseSpec {
    fn default() -> Self {
        Self {
            band_low_hz: default_band_low(),
            band_high_hz: default_band_high(),
            rms_v: 0.0,
            seed: 0,
        }
    }
}

impl EndogenousNoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.band_low_hz > 0.0 && self.band_low_hz < self.band_high_hz) {
            return Err(Error::invalid(format!(
                "noise band must satisfy 0 < low < high, got [{}, {}]",
                self.band_low_hz, self.band_high_hz
            )));
        }
        if !(self.rms_v.is_finite() && self.rms_v >= 0.0) {
            return Err(Error::invalid(format!(
                "noise rms must be nonnegative, got {}",
                self.rms_v
            )));
        }
        Ok(())
    }
}

/// Adds band-limited background activity to a copy of `ts`.
///
/// The noise is a sum of [`NOISE_COMPONENTS`] equal-amplitude sinusoids on a
/// uniform grid spanning the band, each with a seeded random phase, scaled so
/// the ensemble RMS is `rms_v`.
pub fn add_endogenous_noise(ts: &TimeSeries, spec: &EndogenousNoiseSpec) -> Result<TimeSeries> {
    spec.validate()?;
    if spec.band_high_hz >= ts.nyquist_hz() {
        return Err(Error::Nyquist {
            frequency_hz: spec.band_high_hz,
            dt_s: ts.dt_s,
        });
    }
    if spec.rms_v == 0.0 {
        return Ok(ts.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = NOISE_COMPONENTS;
    let step = (spec.band_high_hz - spec.band_low_hz) / (k - 1) as f64;
    let components: Vec<(f64, f64)> = (0..k)
        .map(|j| {
            let f = spec.band_low_hz + step * j as f64;
            (2.0 * PI * f, rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let amp = spec.rms_v * (2.0 / k as f64).sqrt();

    let mut out = ts.clone();
    for (i, s) in out.samples.iter_mut().enumerate() {
        let t = ts.time_at(i);
        *s += amp
            * components
                .iter()
                .map(|(w, phi)| (w * t + phi).sin())
                .sum::<f64>();
    }
    Ok(out)
}

/// Pointwise sum of two series on the same grid. The result keeps `a.t0_s`.
pub fn superpose(a: &TimeSeries, b: &TimeSeries) -> Result<TimeSeries> {
    if !a.same_grid(b) {
        return Err(Error::invalid(format!(
            "cannot superpose series with different grids (dt {} vs {}, len {} vs {})",
            a.dt_s,
            b.dt_s,
            a.len(),
            b.len()
        )));
    }
    let samples = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| x + y)
        .collect();
    TimeSeries::new(a.dt_s, a.t0_s, samples)
}
