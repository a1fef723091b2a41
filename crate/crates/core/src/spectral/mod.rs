//! Single-sided amplitude spectra and the harmonic measures built on them.
//!
//! The record is mean-subtracted, windowed, zero-padded to the next power of
//! two and transformed. Amplitudes are corrected for the window's coherent
//! gain, so a tone of amplitude `A` volts reads `A` at its bin.

mod harmonics;
mod peaks;

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

pub use harmonics::{
    analyze, harmonic_amplitudes, normalized_ratio_series, same_frequency, thd, thd_r_from_f,
    AnalysisOptions, HarmonicReport, RatioPoint,
};
pub use peaks::{detect_peaks, Peak, PeakList};

/// Shortest record accepted by [`amplitude_spectrum`].
pub const MIN_SPECTRUM_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    #[default]
    Blackman,
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rectangular" | "rect" | "none" => Ok(Self::Rectangular),
            "blackman" => Ok(Self::Blackman),
            other => Err(Error::invalid(format!("unknown window '{other}'"))),
        }
    }
}

impl Window {
    pub fn weights(self, n: usize) -> Result<Vec<f64>> {
        match self {
            Window::Rectangular if n >= 1 => Ok(vec![1.0; n]),
            Window::Rectangular => Err(Error::invalid("window length must be positive")),
            Window::Blackman => blackman_window(n),
        }
    }
}

/// Symmetric three-term Blackman window (0.42, 0.5, 0.08).
pub fn blackman_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "Blackman window needs n >= 2, got {n}"
        )));
    }
    let m = (n - 1) as f64;
    let half = n / 2;
    let mut w: Vec<f64> = (0..n - half)
        .map(|j| {
            let x = 2.0 * PI * j as f64 / m;
            0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
        })
        .collect();
    w.resize(n, 0.0);
    // mirror so the result is exactly symmetric
    for j in n - half..n {
        w[j] = w[n - 1 - j];
    }
    Ok(w)
}

/// Single-sided amplitude spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub df_hz: f64,
    /// `n_samples/2 + 1` window-corrected amplitudes, volts.
    pub amplitudes_v: Vec<f64>,
    /// Transform length after zero padding.
    pub n_samples: usize,
    /// Number of recorded samples that entered the transform.
    pub record_len: usize,
    pub window: Window,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.amplitudes_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes_v.is_empty()
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.df_hz
    }

    pub fn nyquist_hz(&self) -> f64 {
        (self.n_samples / 2) as f64 * self.df_hz
    }

    pub fn nearest_bin(&self, freq_hz: f64) -> usize {
        ((freq_hz / self.df_hz).round().max(0.0) as usize).min(self.len() - 1)
    }

    pub fn peak_bin(&self) -> usize {
        self.amplitudes_v
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &a)| {
                if a > best.1 {
                    (i, a)
                } else {
                    best
                }
            })
            .0
    }

    pub fn max_amplitude(&self) -> f64 {
        self.amplitudes_v.iter().copied().fold(0.0, f64::max)
    }

    /// Median amplitude over bins whose frequency lies in `[lo_hz, hi_hz]`.
    pub fn band_median(&self, lo_hz: f64, hi_hz: f64) -> Option<f64> {
        let mut band: Vec<f64> = self
            .amplitudes_v
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let f = self.frequency(*i);
                f >= lo_hz && f <= hi_hz
            })
            .map(|(_, &a)| a)
            .collect();
        if band.is_empty() {
            return None;
        }
        band.sort_by(f64::total_cmp);
        let mid = band.len() / 2;
        Some(if band.len() % 2 == 1 {
            band[mid]
        } else {
            0.5 * (band[mid - 1] + band[mid])
        })
    }
}

/// Window-corrected single-sided amplitude spectrum of `ts`.
///
/// Interior bins are `2·|X_k| / Σw`; the DC and Nyquist bins are `|X_k| / Σw`.
/// The mean is removed before windowing and the windowed record is
/// zero-padded to the next power of two, so `df_hz = 1/(n_samples·dt_s)`.
pub fn amplitude_spectrum(ts: &TimeSeries, window: Window) -> Result<Spectrum> {
    let len = ts.len();
    if len < MIN_SPECTRUM_LEN {
        return Err(Error::invalid(format!(
            "spectrum needs at least {MIN_SPECTRUM_LEN} samples, got {len}"
        )));
    }
    let weights = window.weights(len)?;
    let gain: f64 = weights.iter().sum();
    let mean = ts.mean();
    let n_fft = len.next_power_of_two();

    let mut buf: Vec<Complex<f64>> = ts
        .samples
        .iter()
        .zip(&weights)
        .map(|(x, w)| Complex::new((x - mean) * w, 0.0))
        .collect();
    buf.resize(n_fft, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);

    let half = n_fft / 2;
    let amplitudes_v = buf[..=half]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let edge = k == 0 || k == half;
            c.norm() * if edge { 1.0 } else { 2.0 } / gain
        })
        .collect();

    Ok(Spectrum {
        df_hz: 1.0 / (n_fft as f64 * ts.dt_s),
        amplitudes_v,
        n_samples: n_fft,
        record_len: len,
        window,
    })
}
