//! Linearized three-phase branch flow: voltage sensitivities per line and
//! the sweep that maps per-phase injections to flows and squared voltages.
//!
//! Flows are positive in the downstream direction and injections are
//! positive demands, so every line carries the total demand of the subtree
//! below it. Voltages follow `v_child = v_parent + Mp p + Mq q`.

use thiserror::Error;

use crate::network::{Matrix3, Network, Phase, PhaseSet};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Sign of the `sqrt(3)` coupling term for each ordered phase pair.
/// `V_j / V_i` is `e^{-j2pi/3}` when j follows i cyclically and `e^{+j2pi/3}` otherwise.
fn coupling_sign(i: usize, j: usize) -> f64 {
    if (i + 1) % 3 == j {
        -1.0
    } else {
        1.0
    }
}

/// Voltage sensitivities of one line, in squared voltage per unit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityMatrices {
    pub mp: Matrix3,
    pub mq: Matrix3,
}

impl SensitivityMatrices {
    /// Change of squared voltage on `phase` for the given per-phase flow.
    pub fn drop(&self, phase: Phase, p: &[f64; 3], q: &[f64; 3]) -> f64 {
        let i = phase.index();
        (0..3).map(|j| self.mp[i][j] * p[j] + self.mq[i][j] * q[j]).sum()
    }
}

/// Sensitivity matrices of a line with series impedance `r + jx` carrying `phases`.
/// Units follow the impedance: ohms in gives ohms out, per-unit in gives per-unit out.
pub fn build_sensitivity(r: &Matrix3, x: &Matrix3, phases: PhaseSet) -> SensitivityMatrices {
    let mut mp = [[0.0; 3]; 3];
    let mut mq = [[0.0; 3]; 3];
    for pi in phases.iter() {
        let i = pi.index();
        for pj in phases.iter() {
            let j = pj.index();
            if i == j {
                mp[i][i] = -2.0 * r[i][i];
                mq[i][i] = -2.0 * x[i][i];
            } else {
                let s = coupling_sign(i, j);
                mp[i][j] = r[i][j] + s * SQRT3 * x[i][j];
                mq[i][j] = x[i][j] - s * SQRT3 * r[i][j];
            }
        }
    }
    SensitivityMatrices { mp, mq }
}

/// Per-unit sensitivities of line `line` of `net`.
pub fn line_sensitivity(net: &Network, line: usize) -> SensitivityMatrices {
    let (_, to) = net.line_ends(line);
    let l = &net.lines()[line];
    let zb = net.z_base();
    let r = l.r.map(|row| row.map(|v| v / zb));
    let x = l.x.map(|row| row.map(|v| v / zb));
    build_sensitivity(&r, &x, net.bus(to).phases)
}

/// Per-bus, per-phase demands in per-unit, indexed like `Network::buses`.
#[derive(Debug, Clone, PartialEq)]
pub struct Injections {
    pub p: Vec<[f64; 3]>,
    pub q: Vec<[f64; 3]>,
}

impl Injections {
    pub fn zeros(n: usize) -> Injections {
        Injections {
            p: vec![[0.0; 3]; n],
            q: vec![[0.0; 3]; n],
        }
    }

    /// The spot loads of the feeder.
    pub fn spot_loads(net: &Network) -> Injections {
        let (p, q) = (0..net.bus_count()).map(|b| net.load_pu(b)).unzip();
        Injections { p, q }
    }
}

/// Per-line, per-phase flows in per-unit, indexed like `Network::lines`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flows {
    pub p: Vec<[f64; 3]>,
    pub q: Vec<[f64; 3]>,
}

impl Flows {
    pub fn zeros(n: usize) -> Flows {
        Flows {
            p: vec![[0.0; 3]; n],
            q: vec![[0.0; 3]; n],
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Flows, b: f64) -> Flows {
        let mix = |u: &[[f64; 3]], w: &[[f64; 3]]| -> Vec<[f64; 3]> {
            u.iter()
                .zip(w)
                .map(|(u, w)| [a * u[0] + b * w[0], a * u[1] + b * w[1], a * u[2] + b * w[2]])
                .collect()
        };
        Flows {
            p: mix(&self.p, &other.p),
            q: mix(&self.q, &other.q),
        }
    }
}

/// Voltages and flows of a solved linearized power flow.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorState {
    /// Phase set of every bus.
    pub phases: Vec<PhaseSet>,
    /// Squared voltage magnitudes, pu^2; entries of absent phases are zero.
    pub v: Vec<[f64; 3]>,
    pub p_flow: Vec<[f64; 3]>,
    pub q_flow: Vec<[f64; 3]>,
}

impl PhasorState {
    pub fn v(&self, bus: usize, phase: Phase) -> Option<f64> {
        self.phases[bus].contains(phase).then(|| self.v[bus][phase.index()])
    }

    pub fn bus_count(&self) -> usize {
        self.v.len()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("bus `{bus}` has an injection on absent phase {phase}")]
    InjectionOnAbsentPhase { bus: String, phase: Phase },
    #[error("injection vectors cover {got} buses, feeder has {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

/// Line flows from one reverse sweep: each line carries its downstream subtree's demand.
pub fn downstream_flows(net: &Network, inj: &Injections) -> Result<Flows, FlowError> {
    let n = net.bus_count();
    if inj.p.len() != n || inj.q.len() != n {
        return Err(FlowError::SizeMismatch {
            expected: n,
            got: inj.p.len().min(inj.q.len()),
        });
    }
    for (b, bus) in net.buses().iter().enumerate() {
        for ph in Phase::ALL {
            let k = ph.index();
            if !bus.phases.contains(ph) && (inj.p[b][k] != 0.0 || inj.q[b][k] != 0.0) {
                return Err(FlowError::InjectionOnAbsentPhase {
                    bus: bus.id.clone(),
                    phase: ph,
                });
            }
        }
    }
    let mut subtree_p = inj.p.clone();
    let mut subtree_q = inj.q.clone();
    let mut flows = Flows::zeros(net.lines().len());
    for &b in net.topological_order().iter().rev() {
        let (Some(parent), Some(line)) = (net.parent(b), net.parent_line(b)) else {
            continue;
        };
        flows.p[line] = subtree_p[b];
        flows.q[line] = subtree_q[b];
        for k in 0..3 {
            subtree_p[parent][k] += subtree_p[b][k];
            subtree_q[parent][k] += subtree_q[b][k];
        }
    }
    Ok(flows)
}

/// Squared voltages from one forward sweep starting at `v_source`.
pub fn propagate_voltages(net: &Network, flows: &Flows, v_source: [f64; 3]) -> PhasorState {
    let n = net.bus_count();
    let phases: Vec<PhaseSet> = net.buses().iter().map(|b| b.phases).collect();
    let mut v = vec![[0.0; 3]; n];
    let src = net.source();
    for ph in phases[src].iter() {
        v[src][ph.index()] = v_source[ph.index()];
    }
    for &b in &net.topological_order()[1..] {
        let parent = net.parent(b).expect("non-source bus has a parent");
        let line = net.parent_line(b).expect("non-source bus has a line");
        let m = line_sensitivity(net, line);
        for ph in phases[b].iter() {
            v[b][ph.index()] = v[parent][ph.index()] + m.drop(ph, &flows.p[line], &flows.q[line]);
        }
    }
    PhasorState {
        phases,
        v,
        p_flow: flows.p.clone(),
        q_flow: flows.q.clone(),
    }
}

/// Flows and voltages for fixed injections.
pub fn power_flow(net: &Network, inj: &Injections, v_source: [f64; 3]) -> Result<PhasorState, FlowError> {
    let flows = downstream_flows(net, inj)?;
    Ok(propagate_voltages(net, &flows, v_source))
}
