use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fuzzy::{threshold_discriminate, Classification, Discrimination};
use crate::mixing::{run_mixing_experiment, MixRun};
use crate::netsim::{simulate, NetworkTopology, Terminal};
use crate::signal::{add_endogenous_noise, synthesize, WaveformSpec};
use crate::spectral::{
    analyze, normalized_ratio_series, same_frequency, HarmonicReport, RatioPoint,
};

/// Identifies the inputs of a run. Deliberately carries no timestamp so
/// repeated runs are byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Analysis of one channel at one drive frequency on one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub freq_hz: f64,
    pub path: Terminal,
    pub channel: usize,
    pub report: HarmonicReport,
    pub label: Classification,
    /// Present when a reference frequency is configured and the point is not
    /// excluded.
    pub normalized_ratio: Option<f64>,
    /// Normalized ratio against its value at the threshold frequency.
    pub discrimination: Option<Discrimination>,
}

/// THD and normalized-ratio curves for one (path, channel) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSeries {
    pub path: Terminal,
    pub channel: usize,
    pub thd: Vec<RatioPoint>,
    pub normalized_ratio: Vec<RatioPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub provenance: Provenance,
    pub k_max: usize,
    /// Ordered by frequency, then path, then channel.
    pub points: Vec<SweepPoint>,
    pub series: Vec<ChannelSeries>,
}

impl SweepResult {
    pub fn series_for(&self, path: Terminal, channel: usize) -> Option<&ChannelSeries> {
        self.series
            .iter()
            .find(|s| s.path == path && s.channel == channel)
    }

    pub fn point(&self, freq_hz: f64, path: Terminal, channel: usize) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.path == path && p.channel == channel && same_frequency(p.freq_hz, freq_hz))
    }
}

/// Mixes 64-bit words into a seed for one sweep point's noise stream.
fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x9E37_79B9_7F4A_7C15, |acc, &x| {
        let mut z = acc ^ x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    })
}

/// Simulates one drive point and analyzes every channel.
fn run_point(
    cfg: &ExperimentConfig,
    top: &NetworkTopology,
    freq_index: usize,
    f: f64,
    path: Terminal,
) -> Result<Vec<HarmonicReport>> {
    let dt = cfg.sim.dt_s;
    let settle = (cfg.settle_s / dt).round() as usize;
    let duration = cfg.periods / f + settle as f64 * dt;
    let drive = synthesize(&WaveformSpec::sine(f, cfg.drive_vpp_v), dt, duration)?;
    let drives = BTreeMap::from([(path, drive)]);
    let channels = simulate(top, &drives, &cfg.sim)?;
    let opts = cfg.analysis.options();
    channels
        .iter()
        .enumerate()
        .map(|(c, ts)| {
            let mut ts = ts.skip(settle)?;
            if let Some(noise) = &cfg.noise {
                let spec = crate::signal::EndogenousNoiseSpec {
                    seed: derive_seed(&[
                        cfg.seed,
                        noise.seed,
                        freq_index as u64,
                        path.path_number() as u64,
                        c as u64,
                    ]),
                    ..*noise
                };
                ts = add_endogenous_noise(&ts, &spec)?;
            }
            analyze(&ts, f, &opts)
        })
        .collect()
}

/// Runs the frequency sweep over the configured paths.
///
/// Points run in parallel but the result is ordered and independent of
/// thread count.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let top = cfg.topology();
    let paths = cfg.paths.terminals();
    let tasks: Vec<(usize, f64, Terminal)> = cfg
        .sweep_hz
        .iter()
        .enumerate()
        .flat_map(|(i, &f)| paths.iter().map(move |&p| (i, f, p)))
        .collect();
    let reports: Vec<Vec<HarmonicReport>> = tasks
        .par_iter()
        .map(|&(i, f, path)| {
            run_point(cfg, &top, i, f, path)
                .map_err(|e| e.context(format!("sweep point {f} Hz on {path}")))
        })
        .collect::<Result<_>>()?;

    let n_channels = top.channels.len();
    let mut series = Vec::new();
    let mut ratio_lookup: BTreeMap<(u8, usize), (Vec<RatioPoint>, Option<f64>)> = BTreeMap::new();
    for &path in &paths {
        for c in 0..n_channels {
            let chan_reports: Vec<HarmonicReport> = tasks
                .iter()
                .zip(&reports)
                .filter(|((_, _, p), _)| *p == path)
                .map(|(_, r)| r[c].clone())
                .collect();
            let normalized = match cfg.analysis.ref_freq_hz {
                Some(f_ref) => {
                    normalized_ratio_series(&chan_reports, f_ref, &cfg.analysis.exclusions)
                        .map_err(|e| e.context(format!("ratio series for {path} channel {c}")))?
                }
                None => Vec::new(),
            };
            let threshold = normalized
                .iter()
                .find(|r| same_frequency(r.freq_hz, cfg.analysis.threshold_hz))
                .map(|r| r.value);
            ratio_lookup.insert((path.path_number(), c), (normalized.clone(), threshold));
            series.push(ChannelSeries {
                path,
                channel: c,
                thd: chan_reports
                    .iter()
                    .map(|r| RatioPoint {
                        freq_hz: r.f0_hz,
                        value: r.thd_f,
                    })
                    .collect(),
                normalized_ratio: normalized,
            });
        }
    }

    let mut points = Vec::with_capacity(tasks.len() * n_channels);
    for (&(_, f, path), chan_reports) in tasks.iter().zip(reports) {
        for (c, report) in chan_reports.into_iter().enumerate() {
            let (normalized, threshold) = &ratio_lookup[&(path.path_number(), c)];
            let normalized_ratio = normalized
                .iter()
                .find(|r| same_frequency(r.freq_hz, f))
                .map(|r| r.value);
            let discrimination = match (normalized_ratio, threshold) {
                (Some(v), Some(t)) => Some(threshold_discriminate(v, *t)),
                _ => None,
            };
            points.push(SweepPoint {
                freq_hz: f,
                path,
                channel: c,
                label: cfg.fuzzy.classify(report.thd_percent()),
                report,
                normalized_ratio,
                discrimination,
            });
        }
    }

    Ok(SweepResult {
        provenance: Provenance::of(cfg),
        k_max: cfg.analysis.k_max,
        points,
        series,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingResult {
    pub provenance: Provenance,
    pub runs: Vec<MixRun>,
}

/// Runs the configured dual-path mixing experiment.
pub fn run_mixing(cfg: &ExperimentConfig) -> Result<MixingResult> {
    cfg.validate()?;
    let m = &cfg.mixing;
    if m.f2_hz.is_empty() {
        return Err(Error::Config("mixing.f2_hz is empty".into()));
    }
    let runs = run_mixing_experiment(
        &cfg.topology(),
        &m.f2_hz,
        m.base_f1_hz,
        m.vpp_v,
        &cfg.sim,
        &m.options,
    )?;
    Ok(MixingResult {
        provenance: Provenance::of(cfg),
        runs,
    })
}
