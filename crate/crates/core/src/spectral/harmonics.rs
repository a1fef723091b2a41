use serde::{Deserialize, Serialize};

use super::{amplitude_spectrum, Spectrum, Window};
use crate::error::{Error, Result};
use crate::signal::TimeSeries;

/// Knobs for reading harmonics off a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub window: Window,
    pub k_max: usize,
    pub tol_bins: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            window: Window::Blackman,
            k_max: 10,
            tol_bins: 2,
        }
    }
}

/// Harmonic amplitudes of one record at one drive frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicReport {
    pub f0_hz: f64,
    /// `V₁..V_k`, volts; `V₁` is the fundamental.
    pub harmonics_v: Vec<f64>,
    pub thd_f: f64,
    pub thd_r: f64,
    /// `V₂/V₃`, absent when `V₃` is zero or was not measured.
    pub ratio_2_3: Option<f64>,
}

impl HarmonicReport {
    pub fn from_harmonics(f0_hz: f64, harmonics_v: Vec<f64>) -> Result<Self> {
        let (thd_f, thd_r) = thd(&harmonics_v)?;
        let ratio_2_3 = match harmonics_v.get(2) {
            Some(&v3) if v3 > 0.0 => Some(harmonics_v[1] / v3),
            _ => None,
        };
        Ok(Self {
            f0_hz,
            harmonics_v,
            thd_f,
            thd_r,
            ratio_2_3,
        })
    }

    pub fn k(&self) -> usize {
        self.harmonics_v.len()
    }

    pub fn thd_percent(&self) -> f64 {
        100.0 * self.thd_f
    }
}

/// Amplitude of each harmonic `n·f0_hz`, `n = 1..=k_max`, read as the largest
/// bin within `±tol_bins` of the bin nearest the harmonic.
///
/// Harmonics at or above Nyquist are dropped; the length of the result is
/// the number actually measured.
pub fn harmonic_amplitudes(
    sp: &Spectrum,
    f0_hz: f64,
    k_max: usize,
    tol_bins: usize,
) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    if !(f0_hz.is_finite() && f0_hz >= sp.df_hz * (1.0 - 1e-9)) {
        return Err(Error::invalid(format!(
            "fundamental {f0_hz} Hz is below the spectral resolution {} Hz",
            sp.df_hz
        )));
    }
    let nyquist = sp.nyquist_hz();
    let last = sp.len() - 1;
    let out: Vec<f64> = (1..=k_max)
        .map(|n| n as f64 * f0_hz)
        .take_while(|f| *f < nyquist)
        .map(|f| {
            let centre = sp.nearest_bin(f);
            let lo = centre.saturating_sub(tol_bins);
            let hi = (centre + tol_bins).min(last);
            sp.amplitudes_v[lo..=hi].iter().copied().fold(0.0, f64::max)
        })
        .collect();
    if out.is_empty() {
        return Err(Error::invalid(format!(
            "fundamental {f0_hz} Hz is at or above Nyquist ({nyquist} Hz)"
        )));
    }
    Ok(out)
}

/// `THD_R` from `THD_F`: `thd_f/√(1 + thd_f²)`.
pub fn thd_r_from_f(thd_f: f64) -> f64 {
    thd_f / (1.0 + thd_f * thd_f).sqrt()
}

/// Returns `(THD_F, THD_R)` for harmonic amplitudes `V₁..V_k`.
pub fn thd(harmonics: &[f64]) -> Result<(f64, f64)> {
    if harmonics.len() < 2 {
        return Err(Error::invalid(format!(
            "THD needs at least 2 harmonics, got {}",
            harmonics.len()
        )));
    }
    if harmonics.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("harmonic amplitudes must be finite"));
    }
    let v1 = harmonics[0];
    if v1 <= 0.0 {
        return Err(Error::invalid(
            "fundamental amplitude is zero; THD is undefined",
        ));
    }
    let thd_f = harmonics[1..].iter().map(|v| v * v).sum::<f64>().sqrt() / v1;
    Ok((thd_f, thd_r_from_f(thd_f)))
}

/// Spectrum plus harmonic report for a record driven at `f0_hz`.
pub fn analyze(ts: &TimeSeries, f0_hz: f64, opts: &AnalysisOptions) -> Result<HarmonicReport> {
    let sp = amplitude_spectrum(ts, opts.window)?;
    let v = harmonic_amplitudes(&sp, f0_hz, opts.k_max, opts.tol_bins)?;
    HarmonicReport::from_harmonics(f0_hz, v)
}

/// Frequencies compare equal within one part in 10⁹.
pub fn same_frequency(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub freq_hz: f64,
    pub value: f64,
}

/// `ratio_2_3(f) / ratio_2_3(ref_freq_hz)` for every report whose frequency
/// is not in `exclusions`, in input order.
pub fn normalized_ratio_series(
    reports: &[HarmonicReport],
    ref_freq_hz: f64,
    exclusions: &[f64],
) -> Result<Vec<RatioPoint>> {
    let reference = reports
        .iter()
        .find(|r| same_frequency(r.f0_hz, ref_freq_hz))
        .ok_or_else(|| {
            Error::invalid(format!(
                "reference frequency {ref_freq_hz} Hz is not among the reports"
            ))
        })?;
    let ref_ratio = match reference.ratio_2_3 {
        Some(r) if r > 0.0 => r,
        _ => {
            return Err(Error::invalid(format!(
                "2nd/3rd ratio at the reference {ref_freq_hz} Hz is zero or undefined"
            )))
        }
    };
    reports
        .iter()
        .filter(|r| !exclusions.iter().any(|&x| same_frequency(x, r.f0_hz)))
        .map(|r| {
            let ratio = r
                .ratio_2_3
                .ok_or_else(|| Error::invalid(format!("3rd harmonic is zero at {} Hz", r.f0_hz)))?;
            Ok(RatioPoint {
                freq_hz: r.f0_hz,
                value: ratio / ref_ratio,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize, WaveformKind, WaveformSpec};

    fn report(f: f64, v: &[f64]) -> HarmonicReport {
        HarmonicReport::from_harmonics(f, v.to_vec()).unwrap()
    }

    #[test]
    fn thd_trivial_cases() {
        assert_eq!(thd(&[1.0, 0.0, 0.0]).unwrap(), (0.0, 0.0));
        let (f, r) = thd(&[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(f, 1.0);
        assert!((r - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn thd_errors() {
        assert!(thd(&[1.0]).is_err());
        assert!(thd(&[0.0, 1.0]).is_err());
        assert!(thd(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn ideal_square_series_thd() {
        // Fourier series: odd harmonics with 1/n amplitude
        let v: Vec<f64> = (1..=50)
            .map(|n| if n % 2 == 1 { 1.0 / n as f64 } else { 0.0 })
            .collect();
        let (f, _) = thd(&v).unwrap();
        // infinite series gives √(π²/8 − 1) = 0.4834; truncation at 50 costs ~1%
        assert!((f - 0.483).abs() < 0.012, "{f}");
    }

    #[test]
    fn ideal_triangle_series_thd() {
        let v: Vec<f64> = (1..=50)
            .map(|n| {
                if n % 2 == 1 {
                    1.0 / (n * n) as f64
                } else {
                    0.0
                }
            })
            .collect();
        let (f, _) = thd(&v).unwrap();
        assert!((f - 0.121).abs() < 0.001, "{f}");
    }

    #[test]
    fn pure_tone_harmonics() {
        let f0 = 16.0 / 4096.0;
        let ts = synthesize(&WaveformSpec::sine(f0, 2.0), 1.0, 4096.0).unwrap();
        let sp = amplitude_spectrum(&ts, Window::Blackman).unwrap();
        let v = harmonic_amplitudes(&sp, f0, 10, 2).unwrap();
        assert_eq!(v.len(), 10);
        assert!((v[0] - 1.0).abs() < 1e-3);
        assert!(v[1..].iter().all(|&x| x < 1e-3));
    }

    #[test]
    fn square_third_over_first() {
        let f0 = 1.0 / 128.0;
        let spec = WaveformSpec::sine(f0, 2.0).with_kind(WaveformKind::Square);
        let ts = synthesize(&spec, 1.0, 1024.0).unwrap();
        let sp = amplitude_spectrum(&ts, Window::Blackman).unwrap();
        let v = harmonic_amplitudes(&sp, f0, 5, 2).unwrap();
        assert!((v[2] / v[0] - 1.0 / 3.0).abs() / (1.0 / 3.0) < 0.01);
        assert!(v[1] / v[0] < 1e-3 && v[3] / v[0] < 1e-3);
    }

    #[test]
    fn zero_tolerance_reads_exact_bins() {
        let sp = Spectrum {
            df_hz: 1.0,
            amplitudes_v: vec![0.0, 5.0, 9.0, 1.0, 7.0, 3.0, 0.5, 0.2, 0.1],
            n_samples: 16,
            record_len: 16,
            window: Window::Rectangular,
        };
        assert_eq!(
            harmonic_amplitudes(&sp, 1.0, 3, 0).unwrap(),
            vec![5.0, 9.0, 1.0]
        );
        assert_eq!(
            harmonic_amplitudes(&sp, 1.0, 3, 1).unwrap(),
            vec![9.0, 9.0, 9.0]
        );
    }

    #[test]
    fn harmonics_truncate_at_nyquist() {
        let sp = Spectrum {
            df_hz: 1.0,
            amplitudes_v: vec![1.0; 9],
            n_samples: 16,
            record_len: 16,
            window: Window::Rectangular,
        };
        // Nyquist is 8 Hz: 3, 6 pass, 9 does not
        assert_eq!(harmonic_amplitudes(&sp, 3.0, 10, 0).unwrap().len(), 2);
        assert!(harmonic_amplitudes(&sp, 9.0, 10, 0).is_err());
        assert!(harmonic_amplitudes(&sp, 0.5, 10, 0).is_err());
        assert!(harmonic_amplitudes(&sp, 1.0, 0, 0).is_err());
    }

    #[test]
    fn ratio_series_self_normalizes() {
        let reps = vec![
            report(0.01, &[1.0, 0.2, 0.4]),
            report(0.02, &[1.0, 0.3, 0.3]),
            report(0.03, &[1.0, 0.5, 0.1]),
        ];
        let s = normalized_ratio_series(&reps, 0.01, &[]).unwrap();
        assert_eq!(s[0].value, 1.0);
        assert!((s[1].value - 2.0).abs() < 1e-12);
        assert!((s[2].value - 10.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_series_identical_reports() {
        let reps: Vec<_> = (1..=5)
            .map(|i| report(0.001 * i as f64, &[2.0, 0.7, 0.3]))
            .collect();
        let s = normalized_ratio_series(&reps, 0.003, &[]).unwrap();
        assert!(s.iter().all(|p| p.value == 1.0));
    }

    #[test]
    fn ratio_series_exclusions() {
        let reps: Vec<_> = (1..=10)
            .map(|i| report(0.01 * i as f64, &[1.0, 0.1 * i as f64, 0.5]))
            .collect();
        let s = normalized_ratio_series(&reps, 0.01, &[0.03, 0.05]).unwrap();
        assert_eq!(s.len(), 8);
        assert!(!s.iter().any(|p| same_frequency(p.freq_hz, 0.03)));
        assert!(!s.iter().any(|p| same_frequency(p.freq_hz, 0.05)));
    }

    #[test]
    fn ratio_series_errors() {
        let reps = vec![
            report(0.01, &[1.0, 0.2, 0.4]),
            report(0.02, &[1.0, 0.2, 0.0]),
        ];
        assert!(normalized_ratio_series(&reps, 0.05, &[]).is_err());
        assert!(normalized_ratio_series(&reps, 0.01, &[]).is_err());
        // excluding the bad point makes it valid
        assert!(normalized_ratio_series(&reps, 0.01, &[0.02]).is_ok());
    }
}
