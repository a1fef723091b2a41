use serde::{Deserialize, Serialize};

use super::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub freq_hz: f64,
    pub amplitude_v: f64,
    pub prominence_v: f64,
}

/// Peaks sorted by ascending frequency.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakList {
    pub peaks: Vec<Peak>,
}

impl PeakList {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Peak> {
        self.peaks.iter()
    }
}

/// Local maxima of the spectrum with topographic prominence of at least
/// `min_prominence_v` and frequency above `exclude_below_hz`.
///
/// Flat tops count once, at their middle bin. The first and last bins are
/// never peaks.
pub fn detect_peaks(sp: &Spectrum, min_prominence_v: f64, exclude_below_hz: f64) -> PeakList {
    let a = &sp.amplitudes_v;
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < a.len() {
        if a[i] > a[i - 1] {
            let mut j = i;
            while j + 1 < a.len() && a[j + 1] == a[i] {
                j += 1;
            }
            if j + 1 < a.len() && a[j + 1] < a[i] {
                let at = (i + j) / 2;
                let prominence = prominence(a, at);
                let freq = sp.frequency(at);
                if prominence >= min_prominence_v && freq > exclude_below_hz {
                    peaks.push(Peak {
                        freq_hz: freq,
                        amplitude_v: a[at],
                        prominence_v: prominence,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    PeakList { peaks }
}

/// Height of `a[peak]` above the higher of the two lowest points reachable
/// on either side before climbing above the peak.
fn prominence(a: &[f64], peak: usize) -> f64 {
    let h = a[peak];
    let mut left_min = h;
    for &x in a[..peak].iter().rev() {
        if x > h {
            break;
        }
        left_min = left_min.min(x);
    }
    let mut right_min = h;
    for &x in &a[peak + 1..] {
        if x > h {
            break;
        }
        right_min = right_min.min(x);
    }
    h - left_min.max(right_min)
}

#[cfg(test)]
mod tests {
    use super::super::{amplitude_spectrum, Window};
    use super::*;
    use crate::signal::{synthesize, WaveformSpec};

    fn spectrum(a: Vec<f64>) -> Spectrum {
        let n = 2 * (a.len() - 1);
        Spectrum {
            df_hz: 1.0,
            amplitudes_v: a,
            n_samples: n,
            record_len: n,
            window: Window::Rectangular,
        }
    }

    #[test]
    fn prominence_of_nested_peaks() {
        let sp = spectrum(vec![0.0, 5.0, 1.0, 3.0, 2.0, 8.0, 0.0]);
        let p = detect_peaks(&sp, 0.0, 0.0);
        let got: Vec<_> = p.iter().map(|p| (p.freq_hz, p.prominence_v)).collect();
        assert_eq!(got, vec![(1.0, 4.0), (3.0, 1.0), (5.0, 8.0)]);
    }

    #[test]
    fn plateau_counts_once() {
        let sp = spectrum(vec![0.0, 2.0, 2.0, 2.0, 0.0]);
        let p = detect_peaks(&sp, 0.0, 0.0);
        assert_eq!(p.len(), 1);
        assert_eq!(p.peaks[0].freq_hz, 2.0);
    }

    #[test]
    fn single_tone_single_peak() {
        let f = 40.0 / 2048.0;
        let ts = synthesize(&WaveformSpec::sine(f, 2.0), 1.0, 2048.0).unwrap();
        let sp = amplitude_spectrum(&ts, Window::Blackman).unwrap();
        let p = detect_peaks(&sp, 0.01, 0.0);
        assert_eq!(p.len(), 1);
        assert!((p.peaks[0].freq_hz - f).abs() < 1e-12);
    }

    #[test]
    fn threshold_above_max_gives_nothing() {
        let f = 40.0 / 2048.0;
        let ts = synthesize(&WaveformSpec::sine(f, 2.0), 1.0, 2048.0).unwrap();
        let sp = amplitude_spectrum(&ts, Window::Blackman).unwrap();
        assert!(detect_peaks(&sp, sp.max_amplitude() * 1.01, 0.0).is_empty());
    }

    #[test]
    fn exclusion_below_frequency() {
        let sp = spectrum(vec![0.0, 5.0, 1.0, 3.0, 2.0, 8.0, 0.0]);
        let p = detect_peaks(&sp, 0.0, 3.0);
        assert_eq!(p.len(), 1);
        assert_eq!(p.peaks[0].freq_hz, 5.0);
    }
}
