use std::f64::consts::PI;

use proptest::prelude::*;

use mycofreq::signal::{superpose, synthesize, WaveformSpec};
use mycofreq::spectral::{
    amplitude_spectrum, analyze, detect_peaks, normalized_ratio_series, thd, AnalysisOptions,
    HarmonicReport, Window,
};
use mycofreq::TimeSeries;

fn window_strategy() -> impl Strategy<Value = Window> {
    prop_oneof![Just(Window::Rectangular), Just(Window::Blackman)]
}

fn dft_power(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..=n / 2)
        .map(|k| {
            let (re, im) = y.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, v)| {
                let a = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                (re + v * a.cos(), im - v * a.sin())
            });
            re * re + im * im
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_direct_dft(x in prop::collection::vec(-10.0f64..10.0, 8..300), window in window_strategy()) {
        let n = x.len();
        let ts = TimeSeries::new(0.5, 0.0, x.clone()).unwrap();
        let sp = amplitude_spectrum(&ts, window).unwrap();
        let w = window.weights(n).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let mut y: Vec<f64> = x.iter().zip(&w).map(|(a, b)| (a - mean) * b).collect();
        y.resize(n.next_power_of_two(), 0.0);
        let gain: f64 = w.iter().sum();
        let m = y.len();
        let power = dft_power(&y);
        let scale = sp.max_amplitude().max(1e-300);
        prop_assert_eq!(sp.n_samples, m);
        prop_assert!((sp.df_hz - 1.0 / (m as f64 * 0.5)).abs() < 1e-15);
        for (k, p) in power.iter().enumerate() {
            let edge = k == 0 || k == m / 2;
            let expect = p.sqrt() * if edge { 1.0 } else { 2.0 } / gain;
            prop_assert!((sp.amplitudes_v[k] - expect).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn parseval_without_padding(exp in 3u32..11, seed in any::<u64>()) {
        let n = 1usize << exp;
        let x: Vec<f64> = (0..n)
            .map(|i| ((seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11) as f64 / (1u64 << 53) as f64) - 0.5)
            .collect();
        let ts = TimeSeries::new(1.0, 0.0, x.clone()).unwrap();
        let sp = amplitude_spectrum(&ts, Window::Rectangular).unwrap();
        let mean = ts.mean();
        let variance = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let a = &sp.amplitudes_v;
        let half = a.len() - 1;
        let from_spectrum = a[0] * a[0] + a[half] * a[half]
            + a[1..half].iter().map(|v| 0.5 * v * v).sum::<f64>();
        prop_assert!((from_spectrum - variance).abs() <= 1e-10 * variance.max(1e-300));
    }

    #[test]
    fn thd_r_identity(v in prop::collection::vec(0.0f64..5.0, 2..40), v1 in 0.01f64..5.0) {
        let mut h = vec![v1];
        h.extend(v);
        let (f, r) = thd(&h).unwrap();
        prop_assert!((r - f / (1.0 + f * f).sqrt()).abs() <= 1e-12);
        prop_assert!((0.0..1.0).contains(&r));
    }

    #[test]
    fn normalized_ratio_ignores_scale(
        ratios in prop::collection::vec((0.01f64..2.0, 0.01f64..2.0), 3..10),
        scale in 0.001f64..1000.0,
    ) {
        let reports: Vec<HarmonicReport> = ratios
            .iter()
            .enumerate()
            .map(|(i, (v2, v3))| HarmonicReport::from_harmonics((i + 1) as f64 * 0.001, vec![1.0, *v2, *v3]).unwrap())
            .collect();
        let scaled: Vec<HarmonicReport> = ratios
            .iter()
            .enumerate()
            .map(|(i, (v2, v3))| {
                HarmonicReport::from_harmonics((i + 1) as f64 * 0.001, vec![scale, v2 * scale, v3 * scale]).unwrap()
            })
            .collect();
        let a = normalized_ratio_series(&reports, 0.002, &[]).unwrap();
        let b = normalized_ratio_series(&scaled, 0.002, &[]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.value - y.value).abs() <= 1e-12 * x.value.abs().max(1.0));
        }
        prop_assert_eq!(a[1].value, 1.0);
    }
}

#[test]
fn two_tones_give_two_peaks() {
    let dt = 1.0;
    let a = synthesize(&WaveformSpec::sine(100.0 / 4096.0, 2.0), dt, 4096.0).unwrap();
    let b = synthesize(&WaveformSpec::sine(300.0 / 4096.0, 1.0), dt, 4096.0).unwrap();
    let sp = amplitude_spectrum(&superpose(&a, &b).unwrap(), Window::Blackman).unwrap();
    let peaks = detect_peaks(&sp, 0.01 * sp.max_amplitude(), 0.0);
    let freqs: Vec<f64> = peaks.iter().map(|p| p.freq_hz).collect();
    assert_eq!(freqs, vec![100.0 / 4096.0, 300.0 / 4096.0]);
    assert!((peaks.peaks[0].amplitude_v - 1.0).abs() < 1e-3);
    assert!((peaks.peaks[1].amplitude_v - 0.5).abs() < 1e-3);
}

#[test]
fn pure_sine_has_negligible_thd() {
    let f0 = 40.0 / 4096.0;
    let ts = synthesize(&WaveformSpec::sine(f0, 10.0), 1.0, 4096.0).unwrap();
    let r = analyze(&ts, f0, &AnalysisOptions::default()).unwrap();
    assert!((r.harmonics_v[0] - 5.0).abs() < 1e-6);
    assert!(r.thd_f < 1e-6);
}
