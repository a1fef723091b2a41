//! Two-tone intermodulation: predicted products `|m·f1 ± n·f2|`, matching
//! against spectral peaks, and dual-path drive experiments.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::{simulate, NetworkTopology, SimConfig, Terminal};
use crate::signal::{synthesize, WaveformSpec};
use crate::spectral::{amplitude_spectrum, detect_peaks, Peak, PeakList, Spectrum, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    /// Base tone on path 1.
    pub f1_hz: f64,
    /// Tone on path 2.
    pub f2_hz: f64,
    pub vpp1_v: f64,
    pub vpp2_v: f64,
}

impl MixSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.f1_hz > 0.0 && self.f2_hz > 0.0) {
            return Err(Error::invalid("mixing frequencies must be positive"));
        }
        if !(self.vpp1_v >= 0.0 && self.vpp2_v >= 0.0) {
            return Err(Error::invalid("mixing amplitudes must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntermodProduct {
    pub m: u32,
    pub n: u32,
    pub sign: Sign,
    pub freq_hz: f64,
    pub order: u32,
}

impl IntermodProduct {
    fn new(m: u32, n: u32, sign: Sign, f1_hz: f64, f2_hz: f64) -> Self {
        Self {
            m,
            n,
            sign,
            freq_hz: product_frequency(m, n, sign, f1_hz, f2_hz),
            order: m + n,
        }
    }
}

/// `|m·f1 ± n·f2|`.
pub fn product_frequency(m: u32, n: u32, sign: Sign, f1_hz: f64, f2_hz: f64) -> f64 {
    let (a, b) = (m as f64 * f1_hz, n as f64 * f2_hz);
    match sign {
        Sign::Plus => a + b,
        Sign::Minus => (a - b).abs(),
    }
}

/// All nonzero products with `1 ≤ m + n ≤ max_order`, one per distinct
/// frequency (lowest order kept), sorted by frequency.
pub fn predict_products(f1_hz: f64, f2_hz: f64, max_order: u32) -> Result<Vec<IntermodProduct>> {
    if max_order == 0 {
        return Err(Error::invalid("max_order must be at least 1"));
    }
    if !(f1_hz > 0.0 && f2_hz > 0.0 && f1_hz.is_finite() && f2_hz.is_finite()) {
        return Err(Error::invalid("product frequencies need f1, f2 > 0"));
    }
    let eps = 1e-9 * f1_hz.max(f2_hz);
    let mut all = Vec::new();
    for m in 0..=max_order {
        for n in 0..=(max_order - m) {
            if m + n == 0 {
                continue;
            }
            all.push(IntermodProduct::new(m, n, Sign::Plus, f1_hz, f2_hz));
            if m > 0 && n > 0 {
                all.push(IntermodProduct::new(m, n, Sign::Minus, f1_hz, f2_hz));
            }
        }
    }
    // priority: lowest order, then sum before difference, then base-heavy
    all.sort_by(|a, b| {
        (a.order, a.sign, std::cmp::Reverse(a.m)).cmp(&(b.order, b.sign, std::cmp::Reverse(b.m)))
    });
    let mut kept: Vec<IntermodProduct> = Vec::new();
    for p in all {
        if p.freq_hz <= eps {
            continue;
        }
        if !kept.iter().any(|k| (k.freq_hz - p.freq_hz).abs() <= eps) {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| a.freq_hz.total_cmp(&b.freq_hz));
    Ok(kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedProduct {
    pub product: IntermodProduct,
    pub observed_freq_hz: f64,
    pub amplitude_v: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MixReport {
    pub predicted: Vec<IntermodProduct>,
    pub matched: Vec<MatchedProduct>,
    pub unmatched_peaks: PeakList,
}

impl MixReport {
    /// Matched entry whose product frequency is `freq_hz` (within `tol_hz`).
    pub fn matched_near(&self, freq_hz: f64, tol_hz: f64) -> Option<&MatchedProduct> {
        self.matched
            .iter()
            .find(|m| (m.product.freq_hz - freq_hz).abs() <= tol_hz)
    }
}

/// Assigns each peak to the nearest product within `tol_hz`; equidistant
/// products resolve to the lower order.
pub fn match_products(
    peaks: &PeakList,
    products: &[IntermodProduct],
    tol_hz: f64,
) -> Result<MixReport> {
    if !(tol_hz > 0.0) {
        return Err(Error::invalid("match tolerance must be positive"));
    }
    let mut report = MixReport {
        predicted: products.to_vec(),
        ..Default::default()
    };
    for peak in peaks.iter() {
        let best = products
            .iter()
            .map(|p| ((p.freq_hz - peak.freq_hz).abs(), p))
            .filter(|(d, _)| *d <= tol_hz)
            .min_by(|(da, pa), (db, pb)| da.total_cmp(db).then(pa.order.cmp(&pb.order)));
        match best {
            Some((_, p)) => report.matched.push(MatchedProduct {
                product: *p,
                observed_freq_hz: peak.freq_hz,
                amplitude_v: peak.amplitude_v,
            }),
            None => report.unmatched_peaks.peaks.push(Peak { ..*peak }),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixOptions {
    pub max_order: u32,
    /// Match tolerance in units of the spectral bin width.
    pub tol_bins: f64,
    /// Peaks must rise this fraction of the largest amplitude above their
    /// surroundings.
    pub rel_prominence: f64,
    /// Record length in periods of the slower tone.
    pub periods: f64,
    /// Simulated lead-in discarded before analysis.
    pub settle_s: f64,
    pub window: Window,
}

impl Default for MixOptions {
    fn default() -> Self {
        Self {
            max_order: 4,
            tol_bins: 1.5,
            rel_prominence: 1e-3,
            periods: 8.0,
            settle_s: 300.0,
            window: Window::Blackman,
        }
    }
}

impl MixOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_order == 0 {
            return Err(Error::invalid("max_order must be at least 1"));
        }
        if !(self.tol_bins > 0.0 && self.rel_prominence >= 0.0 && self.periods >= 1.0) {
            return Err(Error::invalid(
                "mixing needs tol_bins > 0, rel_prominence >= 0 and periods >= 1",
            ));
        }
        if !(self.settle_s >= 0.0) {
            return Err(Error::invalid("settle_s must be nonnegative"));
        }
        Ok(())
    }
}

/// One dual-path run: a report and spectrum per differential channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixRun {
    pub spec: MixSpec,
    pub channels: Vec<MixReport>,
    #[serde(skip)]
    pub spectra: Vec<Spectrum>,
}

/// Drives both paths at once and analyzes every channel.
pub fn run_mix(
    top: &NetworkTopology,
    spec: &MixSpec,
    cfg: &SimConfig,
    opts: &MixOptions,
) -> Result<MixRun> {
    spec.validate()?;
    opts.validate()?;
    let slow = spec.f1_hz.min(spec.f2_hz);
    let settle = (opts.settle_s / cfg.dt_s).round() as usize;
    let duration = opts.periods / slow + settle as f64 * cfg.dt_s;
    let drive1 = synthesize(
        &WaveformSpec::sine(spec.f1_hz, spec.vpp1_v),
        cfg.dt_s,
        duration,
    )?;
    let drive2 = synthesize(
        &WaveformSpec::sine(spec.f2_hz, spec.vpp2_v),
        cfg.dt_s,
        duration,
    )?;
    let drives = BTreeMap::from([(Terminal::Input1, drive1), (Terminal::Input2, drive2)]);
    let channels = simulate(top, &drives, cfg)?;

    let products = predict_products(spec.f1_hz, spec.f2_hz, opts.max_order)?;
    let mut run = MixRun {
        spec: *spec,
        channels: Vec::new(),
        spectra: Vec::new(),
    };
    for ts in channels {
        let sp = amplitude_spectrum(&ts.skip(settle)?, opts.window)?;
        let peaks = detect_peaks(&sp, opts.rel_prominence * sp.max_amplitude(), 0.5 * slow);
        run.channels
            .push(match_products(&peaks, &products, opts.tol_bins * sp.df_hz)?);
        run.spectra.push(sp);
    }
    Ok(run)
}

/// Runs [`run_mix`] for each path-2 frequency against a fixed base tone.
/// Runs execute in parallel; output follows `f2_list` order.
pub fn run_mixing_experiment(
    top: &NetworkTopology,
    f2_list: &[f64],
    base_f1_hz: f64,
    vpp_v: f64,
    cfg: &SimConfig,
    opts: &MixOptions,
) -> Result<Vec<MixRun>> {
    f2_list
        .par_iter()
        .map(|&f2| {
            let spec = MixSpec {
                f1_hz: base_f1_hz,
                f2_hz: f2,
                vpp1_v: vpp_v,
                vpp2_v: vpp_v,
            };
            run_mix(top, &spec, cfg, opts)
                .map_err(|e| e.context(format!("mixing run f2 = {f2} Hz")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn freqs(p: &[IntermodProduct]) -> Vec<f64> {
        p.iter().map(|p| p.freq_hz).collect()
    }

    fn has(p: &[IntermodProduct], f: f64) -> bool {
        p.iter().any(|p| (p.freq_hz - f).abs() < 1e-12)
    }

    #[test]
    fn satellites_of_one_and_five() {
        let p = predict_products(0.001, 0.005, 3).unwrap();
        assert!(has(&p, 0.009) && has(&p, 0.011));
        let nine = p
            .iter()
            .find(|p| (p.freq_hz - 0.009).abs() < 1e-12)
            .unwrap();
        assert_eq!(
            (nine.m, nine.n, nine.sign, nine.order),
            (1, 2, Sign::Minus, 3)
        );
    }

    #[test]
    fn satellites_of_one_and_seven() {
        let p = predict_products(0.001, 0.007, 3).unwrap();
        assert!(has(&p, 0.013) && has(&p, 0.015));
    }

    #[test]
    fn equal_tones_collapse_to_harmonics() {
        let f = 0.002;
        let p = predict_products(f, f, 4).unwrap();
        let got = freqs(&p);
        let want: Vec<f64> = (1..=4).map(|k| k as f64 * f).collect();
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-15);
        }
        assert!(p.iter().all(|p| p.freq_hz > 0.0));
    }

    #[test]
    fn dedup_keeps_lowest_order() {
        // 2·f1 = f2: the order-1 f2 wins over order-2 2·f1
        let p = predict_products(0.001, 0.002, 2).unwrap();
        let two = p
            .iter()
            .find(|p| (p.freq_hz - 0.002).abs() < 1e-12)
            .unwrap();
        assert_eq!(two.order, 1);
        let sorted = freqs(&p);
        assert!(sorted.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn every_product_recomputes() {
        let (f1, f2) = (0.0013, 0.0071);
        for p in predict_products(f1, f2, 5).unwrap() {
            assert_eq!(p.freq_hz, product_frequency(p.m, p.n, p.sign, f1, f2));
            assert_eq!(p.order, p.m + p.n);
            assert!(p.order >= 1);
        }
    }

    #[test]
    fn predict_rejects_bad_input() {
        assert!(predict_products(0.001, 0.002, 0).is_err());
        assert!(predict_products(0.0, 0.002, 2).is_err());
    }

    #[test]
    fn empty_peaks_match_nothing() {
        let products = predict_products(0.001, 0.005, 3).unwrap();
        let r = match_products(&PeakList::default(), &products, 1e-4).unwrap();
        assert!(r.matched.is_empty() && r.unmatched_peaks.is_empty());
        assert_eq!(r.predicted, products);
    }

    #[test]
    fn exact_peaks_all_match() {
        let products = predict_products(0.001, 0.005, 3).unwrap();
        let peaks = PeakList {
            peaks: products
                .iter()
                .map(|p| Peak {
                    freq_hz: p.freq_hz,
                    amplitude_v: 1.0,
                    prominence_v: 1.0,
                })
                .collect(),
        };
        let r = match_products(&peaks, &products, 1e-5).unwrap();
        assert_eq!(r.matched.len(), products.len());
        assert!(r.unmatched_peaks.is_empty());
        for m in &r.matched {
            assert_eq!(m.product.freq_hz, m.observed_freq_hz);
        }
    }

    #[test]
    fn far_peak_is_unmatched_and_ties_prefer_low_order() {
        let products = vec![
            IntermodProduct::new(1, 0, Sign::Plus, 1.0, 3.0),
            IntermodProduct::new(2, 0, Sign::Plus, 1.0, 3.0),
        ];
        let peaks = PeakList {
            peaks: vec![
                Peak {
                    freq_hz: 1.5,
                    amplitude_v: 1.0,
                    prominence_v: 1.0,
                },
                Peak {
                    freq_hz: 7.0,
                    amplitude_v: 1.0,
                    prominence_v: 1.0,
                },
            ],
        };
        let r = match_products(&peaks, &products, 0.5).unwrap();
        assert_eq!(r.matched.len(), 1);
        assert_eq!(r.matched[0].product.order, 1);
        assert_eq!(r.unmatched_peaks.len(), 1);
        assert!(match_products(&peaks, &products, 0.0).is_err());
    }
}
