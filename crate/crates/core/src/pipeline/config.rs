use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fuzzy::{default_partition, FuzzyPartition};
use crate::mixing::MixOptions;
use crate::netsim::{default_topology, DualTransportParams, NetworkTopology, SimConfig, Terminal};
use crate::signal::EndogenousNoiseSpec;
use crate::spectral::{same_frequency, AnalysisOptions, Window};

/// THD range (percent) the fuzzy partition must cover.
pub const THD_SCALE_PERCENT: (f64, f64) = (0.0, 50.0);

/// Drive frequencies 1 to 10 mHz in 1 mHz steps, then 20 to 100 mHz in 10 mHz steps.
pub fn default_sweep() -> Vec<f64> {
    (1..=10)
        .map(|i| i as f64 / 1000.0)
        .chain((2..=10).map(|i| i as f64 / 100.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathSelection {
    Path1,
    Path2,
    #[default]
    Both,
}

impl PathSelection {
    pub fn terminals(self) -> Vec<Terminal> {
        match self {
            PathSelection::Path1 => vec![Terminal::Input1],
            PathSelection::Path2 => vec![Terminal::Input2],
            PathSelection::Both => vec![Terminal::Input1, Terminal::Input2],
        }
    }
}

impl std::str::FromStr for PathSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "path1" | "1" => Ok(Self::Path1),
            "path2" | "2" => Ok(Self::Path2),
            "both" => Ok(Self::Both),
            other => Err(Error::invalid(format!("unknown path selection '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub window: Window,
    pub k_max: usize,
    pub tol_bins: usize,
    /// Frequency whose 2nd/3rd ratio normalizes the ratio series.
    pub ref_freq_hz: Option<f64>,
    /// Frequencies left out of the normalized ratio series.
    pub exclusions: Vec<f64>,
    /// Frequency marking the discrimination threshold on the ratio series.
    pub threshold_hz: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window: Window::Blackman,
            k_max: 10,
            tol_bins: 2,
            ref_freq_hz: Some(0.01),
            exclusions: Vec::new(),
            threshold_hz: 0.01,
        }
    }
}

impl AnalysisConfig {
    pub fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            window: self.window,
            k_max: self.k_max,
            tol_bins: self.tol_bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingConfig {
    pub base_f1_hz: f64,
    pub f2_hz: Vec<f64>,
    pub vpp_v: f64,
    pub options: MixOptions,
}

impl Default for MixingConfig {
    fn default() -> Self {
        Self {
            base_f1_hz: 0.001,
            f2_hz: vec![0.002, 0.005, 0.007],
            vpp_v: 10.0,
            options: MixOptions::default(),
        }
    }
}

/// Everything a sweep or mixing run needs. Serialized as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub sweep_hz: Vec<f64>,
    pub drive_vpp_v: f64,
    pub paths: PathSelection,
    /// Analyzed record length in drive periods.
    pub periods: f64,
    /// Simulated lead-in discarded before analysis, seconds.
    pub settle_s: f64,
    /// Edge parameters of the default network.
    pub params: DualTransportParams,
    /// Explicit network; when absent the default network is built from
    /// `params`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<NetworkTopology>,
    pub sim: SimConfig,
    pub analysis: AnalysisConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<EndogenousNoiseSpec>,
    pub mixing: MixingConfig,
    pub fuzzy: FuzzyPartition,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sweep_hz: default_sweep(),
            drive_vpp_v: 10.0,
            paths: PathSelection::Both,
            periods: 8.0,
            settle_s: 300.0,
            params: DualTransportParams::default(),
            topology: None,
            sim: SimConfig::default(),
            analysis: AnalysisConfig::default(),
            noise: None,
            mixing: MixingConfig::default(),
            fuzzy: default_partition(),
        }
    }
}

impl ExperimentConfig {
    pub fn topology(&self) -> NetworkTopology {
        self.topology
            .clone()
            .unwrap_or_else(|| default_topology(&self.params))
    }

    /// Same experiment on a network with every edge made ohmic.
    pub fn linearized(&self) -> Self {
        Self {
            topology: Some(self.topology().linearized()),
            params: self.params.linearized(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        if self.sweep_hz.is_empty() {
            return cfg_err("sweep_hz is empty".into());
        }
        if self.sweep_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return cfg_err("sweep frequencies must be positive".into());
        }
        if self.sweep_hz.windows(2).any(|w| w[1] <= w[0]) {
            return cfg_err("sweep frequencies must be strictly increasing".into());
        }
        if !(self.drive_vpp_v.is_finite() && self.drive_vpp_v >= 0.0) {
            return cfg_err("drive_vpp_v must be nonnegative".into());
        }
        if !(self.periods >= 1.0) {
            return cfg_err("periods must be at least 1".into());
        }
        if !(self.settle_s >= 0.0) {
            return cfg_err("settle_s must be nonnegative".into());
        }
        if let Some(f_ref) = self.analysis.ref_freq_hz {
            if !self.sweep_hz.iter().any(|f| same_frequency(*f, f_ref)) {
                return cfg_err(format!("ref_freq_hz {f_ref} is not in the sweep"));
            }
        }
        if self.analysis.k_max < 2 {
            return cfg_err("analysis.k_max must be at least 2".into());
        }
        if !(self.analysis.threshold_hz > 0.0) {
            return cfg_err("analysis.threshold_hz must be positive".into());
        }
        let nyquist = 0.5 / self.sim.dt_s;
        if let Some(f) = self.sweep_hz.iter().find(|f| **f >= nyquist) {
            return cfg_err(format!(
                "sweep frequency {f} Hz is above Nyquist ({nyquist} Hz)"
            ));
        }
        self.sim.validate()?;
        self.params.validate()?;
        self.topology().validate()?;
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        self.mixing.options.validate()?;
        if !(self.mixing.base_f1_hz > 0.0) || self.mixing.f2_hz.iter().any(|f| !(*f > 0.0)) {
            return cfg_err("mixing frequencies must be positive".into());
        }
        let (lo, hi) = THD_SCALE_PERCENT;
        self.fuzzy.validate_scale(lo, hi)?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes to JSON");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sweep_has_nineteen_points() {
        let s = default_sweep();
        assert_eq!(s.len(), 19);
        assert_eq!(s[0], 0.001);
        assert_eq!(s[9], 0.01);
        assert_eq!(s[10], 0.02);
        assert_eq!(s[18], 0.1);
    }

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn optional_sections_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.topology = Some(cfg.topology());
        cfg.noise = Some(EndogenousNoiseSpec {
            rms_v: 0.01,
            seed: 9,
            ..Default::default()
        });
        cfg.analysis.exclusions = vec![0.03, 0.05];
        cfg.analysis.ref_freq_hz = None;
        cfg.paths = PathSelection::Path2;
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_ne!(back.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn rejects_bad_configs() {
        let cfg = ExperimentConfig {
            sweep_hz: vec![0.002, 0.001],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.analysis.ref_freq_hz = Some(0.015);
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.sweep_hz.push(0.7);
        assert!(cfg.validate().is_err());

        assert!(ExperimentConfig::from_toml("seed = 1\nbogus = 2").is_err());
    }
}
