use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{edge_conductance, edge_current, EdgeState, NetworkTopology, SimConfig, Terminal};
use crate::error::{Error, Result};
use crate::signal::TimeSeries;

/// Maximum number of step halvings per Newton update.
const MAX_HALVINGS: usize = 8;

/// Full record of one transient run.
#[derive(Debug, Clone)]
pub struct SimRun {
    /// Differential voltage per topology channel.
    pub channels: Vec<TimeSeries>,
    /// Node voltages at every accepted step, indexed `[step][node]`.
    pub node_voltages: Vec<Vec<f64>>,
    /// Edge activations after the state update of every step, `[step][edge]`.
    pub edge_states: Vec<Vec<f64>>,
    /// Largest accepted `|Σ i| / Σ g` over all free nodes and steps, in volts.
    pub max_balance_error_v: f64,
    pub newton_iterations: usize,
}

/// Runs the transient and returns one differential series per channel.
pub fn simulate(
    top: &NetworkTopology,
    drives: &BTreeMap<Terminal, TimeSeries>,
    cfg: &SimConfig,
) -> Result<Vec<TimeSeries>> {
    simulate_run(top, drives, cfg).map(|run| run.channels)
}

/// Like [`simulate`] but keeps node voltages, edge states and solver stats.
///
/// Each step solves Kirchhoff current balance at the free nodes by damped
/// Newton iteration with the edge states frozen, then advances every edge
/// state by one implicit-Euler step using the solved voltages. Terminals
/// without a drive float.
pub fn simulate_run(
    top: &NetworkTopology,
    drives: &BTreeMap<Terminal, TimeSeries>,
    cfg: &SimConfig,
) -> Result<SimRun> {
    top.validate()?;
    cfg.validate()?;
    let (len, t0_s) = check_drives(drives, cfg)?;

    let n = top.node_count;
    let mut fixed = vec![false; n];
    fixed[top.terminals.ground] = true;
    let driven: Vec<(usize, &TimeSeries)> = drives
        .iter()
        .map(|(t, ts)| (top.terminals.node(*t), ts))
        .collect();
    for &(node, _) in &driven {
        fixed[node] = true;
    }
    check_anchored(top, &fixed)?;

    let mut free_index = vec![None; n];
    let mut free_count = 0;
    for node in 0..n {
        if !fixed[node] {
            free_index[node] = Some(free_count);
            free_count += 1;
        }
    }

    let mut solver = NodalSolver {
        top,
        free_index,
        free_count,
        tol_v: cfg.newton_tol_v,
        max_iter: cfg.newton_max_iter,
    };

    let mut states = vec![EdgeState::new(cfg.w_initial); top.edges.len()];
    let mut v = vec![0.0; n];
    let mut run = SimRun {
        channels: Vec::new(),
        node_voltages: Vec::with_capacity(len),
        edge_states: Vec::with_capacity(len),
        max_balance_error_v: 0.0,
        newton_iterations: 0,
    };
    let mut channel_samples = vec![Vec::with_capacity(len); top.channels.len()];

    for step in 0..len {
        for &(node, ts) in &driven {
            v[node] = ts.samples[step];
        }
        let stats = solver.solve(&mut v, &states, step)?;
        run.newton_iterations += stats.iterations;
        run.max_balance_error_v = run.max_balance_error_v.max(stats.balance_error_v);

        for (samples, c) in channel_samples.iter_mut().zip(&top.channels) {
            samples.push(v[c.positive] - v[c.negative]);
        }
        if !cfg.freeze_state {
            for (state, e) in states.iter_mut().zip(&top.edges) {
                *state = state.advance(v[e.a] - v[e.b], cfg.dt_s, &e.params);
            }
        }
        run.node_voltages.push(v.clone());
        run.edge_states.push(states.iter().map(|s| s.w()).collect());
    }

    run.channels = channel_samples
        .into_iter()
        .map(|s| TimeSeries::new(cfg.dt_s, t0_s, s))
        .collect::<Result<_>>()?;
    Ok(run)
}

fn check_drives(drives: &BTreeMap<Terminal, TimeSeries>, cfg: &SimConfig) -> Result<(usize, f64)> {
    let mut iter = drives.values();
    let first = iter
        .next()
        .ok_or_else(|| Error::invalid("at least one terminal must be driven"))?;
    for ts in drives.values() {
        if (ts.dt_s - cfg.dt_s).abs() > 1e-9 * cfg.dt_s {
            return Err(Error::invalid(format!(
                "drive sampled at dt {} s but the simulation uses dt {} s",
                ts.dt_s, cfg.dt_s
            )));
        }
        if ts.len() != first.len() {
            return Err(Error::invalid("all drives must have the same length"));
        }
        if ts.samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("drive contains non-finite samples"));
        }
    }
    Ok((first.len(), first.t0_s))
}

/// Every free node must be tied to a fixed potential, otherwise the nodal
/// system is singular.
fn check_anchored(top: &NetworkTopology, fixed: &[bool]) -> Result<()> {
    let mut anchored = vec![false; top.node_count];
    for (node, _) in fixed.iter().enumerate().filter(|(_, f)| **f) {
        for (i, r) in top.reachable_from(node).into_iter().enumerate() {
            anchored[i] |= r;
        }
    }
    match anchored.iter().position(|a| !a) {
        Some(node) => Err(Error::Singular {
            step: 0,
            detail: format!("node {node} is not connected to any driven node or ground"),
        }),
        None => Ok(()),
    }
}

struct NodalSolver<'a> {
    top: &'a NetworkTopology,
    free_index: Vec<Option<usize>>,
    free_count: usize,
    tol_v: f64,
    max_iter: usize,
}

struct StepStats {
    iterations: usize,
    balance_error_v: f64,
}

/// Residual (net current leaving each free node) and the total conductance
/// attached to each free node.
struct Balance {
    current: DVector<f64>,
    conductance: DVector<f64>,
}

impl Balance {
    fn max_abs(&self) -> f64 {
        self.current.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Worst `|Σ i| / Σ g` over free nodes, in volts.
    fn error_v(&self) -> f64 {
        self.current
            .iter()
            .zip(self.conductance.iter())
            .fold(0.0_f64, |m, (i, g)| m.max(i.abs() / g))
    }
}

impl NodalSolver<'_> {
    fn balance(&self, v: &[f64], states: &[EdgeState]) -> Balance {
        let mut current = DVector::zeros(self.free_count);
        let mut conductance = DVector::zeros(self.free_count);
        for (e, s) in self.top.edges.iter().zip(states) {
            let i = edge_current(v[e.a] - v[e.b], s.w(), &e.params);
            let g = e.params.conductance(s.w());
            if let Some(a) = self.free_index[e.a] {
                current[a] += i;
                conductance[a] += g;
            }
            if let Some(b) = self.free_index[e.b] {
                current[b] -= i;
                conductance[b] += g;
            }
        }
        Balance {
            current,
            conductance,
        }
    }

    fn jacobian(&self, v: &[f64], states: &[EdgeState]) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.free_count, self.free_count);
        for (e, s) in self.top.edges.iter().zip(states) {
            let g = edge_conductance(v[e.a] - v[e.b], s.w(), &e.params);
            let (ia, ib) = (self.free_index[e.a], self.free_index[e.b]);
            if let Some(a) = ia {
                jac[(a, a)] += g;
            }
            if let Some(b) = ib {
                jac[(b, b)] += g;
            }
            if let (Some(a), Some(b)) = (ia, ib) {
                jac[(a, b)] -= g;
                jac[(b, a)] -= g;
            }
        }
        jac
    }

    fn apply(&self, v: &mut [f64], dx: &DVector<f64>, scale: f64) {
        for (node, idx) in self.free_index.iter().enumerate() {
            if let Some(i) = idx {
                v[node] += scale * dx[*i];
            }
        }
    }

    fn solve(&mut self, v: &mut [f64], states: &[EdgeState], step: usize) -> Result<StepStats> {
        if self.free_count == 0 {
            return Ok(StepStats {
                iterations: 0,
                balance_error_v: 0.0,
            });
        }
        let mut bal = self.balance(v, states);
        if let Some(i) = bal.conductance.iter().position(|g| *g <= 0.0) {
            return Err(Error::Singular {
                step,
                detail: format!("free node {i} has zero attached conductance"),
            });
        }
        let mut iterations = 0;
        loop {
            let err = bal.error_v();
            if !err.is_finite() {
                return Err(Error::NonConvergence {
                    step,
                    iterations,
                    residual: bal.max_abs(),
                });
            }
            if err <= self.tol_v {
                return Ok(StepStats {
                    iterations,
                    balance_error_v: err,
                });
            }
            if iterations == self.max_iter {
                return Err(Error::NonConvergence {
                    step,
                    iterations,
                    residual: bal.max_abs(),
                });
            }
            iterations += 1;

            let dx = self
                .jacobian(v, states)
                .lu()
                .solve(&(-&bal.current))
                .ok_or_else(|| Error::Singular {
                    step,
                    detail: "nodal Jacobian is singular".into(),
                })?;

            let r0 = bal.max_abs();
            let mut scale = 1.0;
            let base = v.to_vec();
            for halving in 0..=MAX_HALVINGS {
                v.copy_from_slice(&base);
                self.apply(v, &dx, scale);
                bal = self.balance(v, states);
                if bal.max_abs() <= r0 || halving == MAX_HALVINGS {
                    break;
                }
                scale *= 0.5;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Channel, DualTransportParams, Edge, Terminals};
    use super::*;

    fn divider(g1: f64, g2: f64) -> NetworkTopology {
        NetworkTopology {
            node_count: 4,
            edges: vec![
                Edge {
                    a: 1,
                    b: 3,
                    params: DualTransportParams::ohmic(g1),
                },
                Edge {
                    a: 3,
                    b: 0,
                    params: DualTransportParams::ohmic(g2),
                },
                Edge {
                    a: 2,
                    b: 3,
                    params: DualTransportParams::ohmic(g1),
                },
            ],
            terminals: Terminals {
                input1: 1,
                input2: 2,
                ground: 0,
            },
            channels: vec![Channel {
                positive: 3,
                negative: 0,
            }],
        }
    }

    fn dc(value: f64, len: usize) -> TimeSeries {
        TimeSeries::new(1.0, 0.0, vec![value; len]).unwrap()
    }

    #[test]
    fn resistive_divider_with_floating_input() {
        let (g1, g2) = (2e-6, 3e-6);
        let drives = BTreeMap::from([(Terminal::Input1, dc(1.0, 5))]);
        let run = simulate_run(&divider(g1, g2), &drives, &SimConfig::default()).unwrap();
        let expected = g1 / (g1 + g2);
        for (ch, v) in run.channels[0].samples.iter().zip(&run.node_voltages) {
            assert!((ch - expected).abs() <= 1e-12);
            // undriven input carries no current and sits at the mid node
            assert!((v[2] - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_floating_island() {
        let mut top = divider(1e-6, 1e-6);
        top.node_count = 5;
        let drives = BTreeMap::from([(Terminal::Input1, dc(1.0, 3))]);
        assert!(matches!(
            simulate(&top, &drives, &SimConfig::default()),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn reports_non_convergence_with_step() {
        let mut top = divider(1e-6, 1e-6);
        top.edges[1].params.alpha3_per_v2 = 0.5;
        let drives = BTreeMap::from([(
            Terminal::Input1,
            TimeSeries::new(1.0, 0.0, vec![0.0, 0.0, 50.0]).unwrap(),
        )]);
        let cfg = SimConfig {
            newton_max_iter: 1,
            ..Default::default()
        };
        match simulate(&top, &drives, &cfg) {
            Err(Error::NonConvergence { step, .. }) => assert_eq!(step, 2),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_mismatched_drives() {
        let top = divider(1e-6, 1e-6);
        let drives = BTreeMap::from([
            (Terminal::Input1, dc(1.0, 4)),
            (Terminal::Input2, dc(1.0, 5)),
        ]);
        assert!(simulate(&top, &drives, &SimConfig::default()).is_err());
        let drives = BTreeMap::from([(
            Terminal::Input1,
            TimeSeries::new(0.5, 0.0, vec![1.0; 4]).unwrap(),
        )]);
        assert!(simulate(&top, &drives, &SimConfig::default()).is_err());
        assert!(simulate(&top, &BTreeMap::new(), &SimConfig::default()).is_err());
    }

    #[test]
    fn zero_conductance_node_is_singular() {
        let mut top = divider(1e-6, 1e-6);
        for e in &mut top.edges {
            e.params = DualTransportParams {
                g_fast_s: 0.0,
                g_slow_s: 1e-6,
                ..DualTransportParams::default()
            };
        }
        let drives = BTreeMap::from([(Terminal::Input1, dc(1.0, 3))]);
        assert!(matches!(
            simulate(&top, &drives, &SimConfig::default()),
            Err(Error::Singular { .. })
        ));
    }
}
