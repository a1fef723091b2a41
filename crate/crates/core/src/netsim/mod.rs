//! Transient simulation of a nonlinear conductive network with a fast
//! conduction channel and a slowly relaxing, voltage-activated one.
//!
//! Each edge carries
//!
//! ```text
//! i = (g_fast + g_slow·w)·(v + α₂v² + α₃v³)
//! dw/dt = (σ(|v|/v_half) − w)/τ,   σ(x) = x²/(1 + x²)
//! ```
//!
//! For drive periods long compared with τ the activation `w` follows |v|
//! inside every cycle and modulates the conductance, which generates strong
//! odd harmonics. For fast drives `w` settles at its cycle mean and only the
//! weak polynomial term distorts.

mod solver;
mod topology;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use solver::{simulate, simulate_run, SimRun};
pub use topology::{default_topology, Channel, Edge, NetworkTopology, Terminal, Terminals};

/// Constitutive parameters of one network edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualTransportParams {
    /// Fast conduction, siemens.
    pub g_fast_s: f64,
    /// Conductance added at full slow-state activation, siemens.
    pub g_slow_s: f64,
    /// Slow-state time constant, seconds.
    pub tau_s: f64,
    /// Quadratic coefficient, V⁻¹.
    pub alpha2_per_v: f64,
    /// Cubic coefficient, V⁻².
    pub alpha3_per_v2: f64,
    /// Voltage at which the slow state reaches half activation.
    pub v_half_v: f64,
}

impl Default for DualTransportParams {
    fn default() -> Self {
        Self {
            g_fast_s: 20e-9,
            g_slow_s: 5e-6,
            tau_s: 15.0,
            alpha2_per_v: 0.02,
            alpha3_per_v2: 0.045,
            v_half_v: 8.0,
        }
    }
}

impl DualTransportParams {
    /// Plain resistor of conductance `g_s`.
    pub fn ohmic(g_s: f64) -> Self {
        Self {
            g_fast_s: g_s,
            g_slow_s: 0.0,
            tau_s: 1.0,
            alpha2_per_v: 0.0,
            alpha3_per_v2: 0.0,
            v_half_v: 1.0,
        }
    }

    /// Linear (ohmic) version of these parameters: no polynomial terms and
    /// no slow channel.
    pub fn linearized(&self) -> Self {
        Self {
            g_slow_s: 0.0,
            alpha2_per_v: 0.0,
            alpha3_per_v2: 0.0,
            ..*self
        }
    }

    /// Copy with both conductances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            g_fast_s: self.g_fast_s * factor,
            g_slow_s: self.g_slow_s * factor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.g_fast_s,
            self.g_slow_s,
            self.tau_s,
            self.alpha2_per_v,
            self.alpha3_per_v2,
            self.v_half_v,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("edge parameters must be finite"));
        }
        if self.g_fast_s < 0.0 || self.g_slow_s < 0.0 {
            return Err(Error::invalid("edge conductances must be nonnegative"));
        }
        if self.g_fast_s + self.g_slow_s <= 0.0 {
            return Err(Error::invalid("edge needs g_fast + g_slow > 0"));
        }
        if self.tau_s <= 0.0 {
            return Err(Error::invalid("tau_s must be positive"));
        }
        if self.v_half_v <= 0.0 {
            return Err(Error::invalid("v_half_v must be positive"));
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        self.g_slow_s == 0.0 && self.alpha2_per_v == 0.0 && self.alpha3_per_v2 == 0.0
    }

    /// State-modulated conductance `g_fast + g_slow·w`.
    pub fn conductance(&self, w: f64) -> f64 {
        self.g_fast_s + self.g_slow_s * w
    }
}

/// Slow-transport activation of one edge, kept in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeState {
    w: f64,
}

impl EdgeState {
    pub fn new(w: f64) -> Self {
        Self {
            w: if w.is_nan() { 0.0 } else { w.clamp(0.0, 1.0) },
        }
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// One implicit-Euler step of [`state_derivative`] under voltage `v_v`.
    ///
    /// The relaxation is linear in `w`, so the implicit step has the closed
    /// form `(w + h·σ)/(1 + h)` with `h = dt/τ`.
    pub fn advance(self, v_v: f64, dt_s: f64, p: &DualTransportParams) -> Self {
        let h = dt_s / p.tau_s;
        Self::new((self.w + h * activation(v_v.abs() / p.v_half_v)) / (1.0 + h))
    }
}

/// σ(x) = x²/(1 + x²).
pub fn activation(x: f64) -> f64 {
    let x2 = x * x;
    if x2.is_infinite() {
        return 1.0;
    }
    x2 / (1.0 + x2)
}

/// Current through an edge with voltage `v_v` across it, in amperes.
pub fn edge_current(v_v: f64, w: f64, p: &DualTransportParams) -> f64 {
    p.conductance(w) * v_v * (1.0 + v_v * (p.alpha2_per_v + p.alpha3_per_v2 * v_v))
}

/// Small-signal conductance di/dv of an edge at fixed `w`.
pub fn edge_conductance(v_v: f64, w: f64, p: &DualTransportParams) -> f64 {
    p.conductance(w) * (1.0 + v_v * (2.0 * p.alpha2_per_v + 3.0 * p.alpha3_per_v2 * v_v))
}

/// dw/dt of the slow state, in 1/s.
pub fn state_derivative(v_v: f64, w: f64, p: &DualTransportParams) -> f64 {
    (activation(v_v.abs() / p.v_half_v) - w) / p.tau_s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt_s: f64,
    /// Record length used when the simulator synthesizes its own drives.
    pub duration_s: f64,
    pub newton_tol_v: f64,
    pub newton_max_iter: usize,
    pub w_initial: f64,
    /// Hold every edge state at `w_initial` for the whole run.
    #[serde(default)]
    pub freeze_state: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_s: 1.0,
            duration_s: 8000.0,
            newton_tol_v: 1e-10,
            newton_max_iter: 50,
            w_initial: 0.0,
            freeze_state: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return Err(Error::invalid("sim dt_s must be positive"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid("sim duration_s must be positive"));
        }
        if !(self.newton_tol_v.is_finite() && self.newton_tol_v > 0.0) {
            return Err(Error::invalid("newton_tol_v must be positive"));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::invalid("newton_max_iter must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.w_initial) {
            return Err(Error::invalid("w_initial must lie in [0, 1]"));
        }
        Ok(())
    }
}
