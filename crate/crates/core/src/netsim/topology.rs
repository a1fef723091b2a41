use serde::{Deserialize, Serialize};

use super::DualTransportParams;
use crate::error::{Error, Result};

/// Conductance of the ohmic electrode returns in the default network.
pub const RETURN_CONDUCTANCE_S: f64 = 50e-6;

/// Drive terminals. Ground is always the 0 V reference and cannot be driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terminal {
    Input1,
    Input2,
}

impl Terminal {
    pub const ALL: [Terminal; 2] = [Terminal::Input1, Terminal::Input2];

    /// 1-based path number used in reports.
    pub fn path_number(self) -> u8 {
        match self {
            Terminal::Input1 => 1,
            Terminal::Input2 => 2,
        }
    }
}

impl std::fmt::Display for Terminal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "path{}", self.path_number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminals {
    pub input1: usize,
    pub input2: usize,
    pub ground: usize,
}

impl Terminals {
    pub fn node(&self, terminal: Terminal) -> usize {
        match terminal {
            Terminal::Input1 => self.input1,
            Terminal::Input2 => self.input2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub params: DualTransportParams,
}

/// Differential sense pair; the channel reads `v[positive] − v[negative]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub node_count: usize,
    pub edges: Vec<Edge>,
    pub terminals: Terminals,
    pub channels: Vec<Channel>,
}

/// The two-path, one-ground sample used by default.
///
/// ```text
///   input1 ──┐                  ┌── sense_a ──[R]── ground
///            ├── center ────────┤
///   input2 ──┘                  └── sense_b ──[R/2]── ground
/// ```
///
/// The four edges around `center` use `params`; the sense returns are ohmic.
/// Node order: ground 0, input1 1, input2 2, center 3, sense_a 4, sense_b 5.
/// Channel 1 reads sense_a against ground, channel 2 sense_b against ground,
/// so each channel follows the current leaving the sample through one
/// electrode.
pub fn default_topology(params: &DualTransportParams) -> NetworkTopology {
    let edge = |a, b, params| Edge { a, b, params };
    NetworkTopology {
        node_count: 6,
        edges: vec![
            edge(1, 3, *params),
            edge(2, 3, *params),
            edge(3, 4, *params),
            edge(3, 5, *params),
            edge(4, 0, DualTransportParams::ohmic(RETURN_CONDUCTANCE_S)),
            edge(5, 0, DualTransportParams::ohmic(0.5 * RETURN_CONDUCTANCE_S)),
        ],
        terminals: Terminals {
            input1: 1,
            input2: 2,
            ground: 0,
        },
        channels: vec![
            Channel {
                positive: 4,
                negative: 0,
            },
            Channel {
                positive: 5,
                negative: 0,
            },
        ],
    }
}

impl NetworkTopology {
    pub fn validate(&self) -> Result<()> {
        let n = self.node_count;
        if n < 2 {
            return Err(Error::invalid("topology needs at least 2 nodes"));
        }
        let t = &self.terminals;
        for (name, node) in [
            ("input1", t.input1),
            ("input2", t.input2),
            ("ground", t.ground),
        ] {
            if node >= n {
                return Err(Error::invalid(format!(
                    "terminal {name} refers to node {node}, but there are only {n} nodes"
                )));
            }
        }
        if t.input1 == t.input2 || t.input1 == t.ground || t.input2 == t.ground {
            return Err(Error::invalid("terminal nodes must be distinct"));
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.a >= n || e.b >= n {
                return Err(Error::invalid(format!("edge {i} refers to a missing node")));
            }
            if e.a == e.b {
                return Err(Error::invalid(format!("edge {i} is a self loop")));
            }
            e.params
                .validate()
                .map_err(|err| err.context(format!("edge {i}")))?;
        }
        if self.channels.is_empty() {
            return Err(Error::invalid("topology needs at least one channel"));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if c.positive >= n || c.negative >= n {
                return Err(Error::invalid(format!(
                    "channel {i} refers to a missing node"
                )));
            }
        }
        let reach = self.reachable_from(t.ground);
        for terminal in Terminal::ALL {
            if !reach[t.node(terminal)] {
                return Err(Error::invalid(format!(
                    "{terminal} has no conductive path to ground"
                )));
            }
        }
        Ok(())
    }

    /// Nodes connected to `start` through edges.
    pub(crate) fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(node) = stack.pop() {
            for e in &self.edges {
                let other = if e.a == node {
                    e.b
                } else if e.b == node {
                    e.a
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen
    }

    /// Same graph with every edge made ohmic.
    pub fn linearized(&self) -> Self {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.params = e.params.linearized();
        }
        out
    }

    /// Same graph with every conductance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.params = e.params.scaled(factor);
        }
        out
    }

    /// Applies `f` to the parameters of every edge.
    pub fn map_params(&self, f: impl Fn(&DualTransportParams) -> DualTransportParams) -> Self {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.params = f(&e.params);
        }
        out
    }
}
