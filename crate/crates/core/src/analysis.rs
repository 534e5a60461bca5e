//! Evaluation artifacts: voltage unbalance, load reassignment and a
//! post-solve audit of the physical constraints.

use std::fmt::Write as _;

use serde::Serialize;

use crate::formulation::Solution;
use crate::lin3distflow::PhasorState;
use crate::network::{Network, Phase};

/// Sum over buses and present phases of `|mean(v) - v_φ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnbalanceReport {
    pub total_metric: f64,
    /// Contribution of every bus, indexed like `Network::buses`.
    pub per_bus: Vec<f64>,
    /// Mean over present phases of every bus.
    pub v_mean: Vec<f64>,
}

fn deviation_report(state: &PhasorState, value: impl Fn(f64) -> f64) -> UnbalanceReport {
    let mut per_bus = Vec::with_capacity(state.bus_count());
    let mut v_mean = Vec::with_capacity(state.bus_count());
    for (b, phases) in state.phases.iter().enumerate() {
        let vals: Vec<f64> = phases.iter().map(|ph| value(state.v[b][ph.index()])).collect();
        // Offsets from the first phase keep equal voltages exactly balanced.
        let first = vals.first().copied().unwrap_or(0.0);
        let mean = first + vals.iter().map(|v| v - first).sum::<f64>() / vals.len().max(1) as f64;
        per_bus.push(vals.iter().map(|v| (mean - v).abs()).sum());
        v_mean.push(mean);
    }
    UnbalanceReport {
        total_metric: per_bus.iter().sum(),
        per_bus,
        v_mean,
    }
}

/// Unbalance of the squared voltage magnitudes (pu^2).
pub fn unbalance_metric(state: &PhasorState) -> UnbalanceReport {
    deviation_report(state, |v| v)
}

/// Unbalance of the voltage magnitudes `sqrt(v)` (pu).
pub fn magnitude_metric(state: &PhasorState) -> UnbalanceReport {
    deviation_report(state, |v| v.max(0.0).sqrt())
}

/// Kilowatt or kilovar change above which a phase counts as reassigned.
pub const CHANGE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReassignmentRow {
    pub bus: String,
    pub phase: char,
    pub original_kw: f64,
    pub original_kvar: f64,
    pub optimized_kw: f64,
    pub optimized_kvar: f64,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReassignmentTable {
    /// One row per present phase of every loaded bus, buses in id order.
    pub rows: Vec<ReassignmentRow>,
    pub original_total: ([f64; 3], [f64; 3]),
    pub optimized_total: ([f64; 3], [f64; 3]),
}

impl ReassignmentTable {
    pub fn changed_buses(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.rows.iter().filter(|r| r.changed).map(|r| r.bus.as_str()).collect();
        out.dedup();
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bus", "phase", "original_kw", "original_kvar", "optimized_kw", "optimized_kvar", "changed"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.bus.clone(),
                r.phase.to_string(),
                format!("{:.3}", r.original_kw),
                format!("{:.3}", r.original_kvar),
                format!("{:.3}", r.optimized_kw),
                format!("{:.3}", r.optimized_kvar),
                r.changed.to_string(),
            ])
            .expect("in-memory write");
        }
        for (k, ph) in Phase::ALL.iter().enumerate() {
            w.write_record([
                "TOTAL".to_string(),
                ph.letter().to_string(),
                format!("{:.3}", self.original_total.0[k]),
                format!("{:.3}", self.original_total.1[k]),
                format!("{:.3}", self.optimized_total.0[k]),
                format!("{:.3}", self.optimized_total.1[k]),
                String::new(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// Aligned text with one line per bus and kW / kVAr per phase; changed
    /// buses are marked with `*`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>21} {:>21} {:>21}   {:>21} {:>21} {:>21}",
            "bus", "orig a", "orig b", "orig c", "opt a", "opt b", "opt c"
        );
        let cell = |p: f64, q: f64| format!("{p:>9.1} /{q:>9.1}");
        let mut i = 0;
        while i < self.rows.len() {
            let bus = &self.rows[i].bus;
            let mut orig = [(0.0, 0.0); 3];
            let mut opt = [(0.0, 0.0); 3];
            let mut present = [false; 3];
            let mut changed = false;
            while i < self.rows.len() && &self.rows[i].bus == bus {
                let r = &self.rows[i];
                let k = Phase::from_letter(r.phase).expect("phase letter").index();
                orig[k] = (r.original_kw, r.original_kvar);
                opt[k] = (r.optimized_kw, r.optimized_kvar);
                present[k] = true;
                changed |= r.changed;
                i += 1;
            }
            let mark = if changed { "*" } else { " " };
            let _ = write!(out, "{:<8}", format!("{bus}{mark}"));
            for k in 0..3 {
                let text = if present[k] { cell(orig[k].0, orig[k].1) } else { "-".into() };
                let _ = write!(out, " {text:>21}");
            }
            out.push_str("  ");
            for k in 0..3 {
                let text = if present[k] { cell(opt[k].0, opt[k].1) } else { "-".into() };
                let _ = write!(out, " {text:>21}");
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<8}", "total");
        for k in 0..3 {
            let _ = write!(out, " {:>21}", cell(self.original_total.0[k], self.original_total.1[k]));
        }
        out.push_str("  ");
        for k in 0..3 {
            let _ = write!(out, " {:>21}", cell(self.optimized_total.0[k], self.optimized_total.1[k]));
        }
        out.push('\n');
        out
    }
}

/// Original and optimized per-phase loads of every loaded bus.
pub fn reassignment(net: &Network, sol: &Solution) -> ReassignmentTable {
    let base = net.data().base_kva;
    let mut order: Vec<usize> = (0..net.bus_count()).filter(|b| net.bus(*b).has_load()).collect();
    order.sort_by(|a, b| net.bus(*a).id.cmp(&net.bus(*b).id));
    let mut rows = Vec::new();
    let mut original_total = ([0.0; 3], [0.0; 3]);
    let mut optimized_total = ([0.0; 3], [0.0; 3]);
    for b in order {
        let bus = net.bus(b);
        for ph in bus.phases.iter() {
            let k = ph.index();
            let row = ReassignmentRow {
                bus: bus.id.clone(),
                phase: ph.letter(),
                original_kw: bus.load_p[k],
                original_kvar: bus.load_q[k],
                optimized_kw: sol.p_inj[b][k] * base,
                optimized_kvar: sol.q_inj[b][k] * base,
                changed: false,
            };
            let changed = (row.optimized_kw - row.original_kw).abs() > CHANGE_THRESHOLD
                || (row.optimized_kvar - row.original_kvar).abs() > CHANGE_THRESHOLD;
            original_total.0[k] += row.original_kw;
            original_total.1[k] += row.original_kvar;
            optimized_total.0[k] += row.optimized_kw;
            optimized_total.1[k] += row.optimized_kvar;
            rows.push(ReassignmentRow { changed, ..row });
        }
    }
    ReassignmentTable {
        rows,
        original_total,
        optimized_total,
    }
}

/// Residuals of a solution against the physical and logical constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Audit {
    /// Largest `|Σ_φ p_inj - Σ_φ p̂|` over buses, kW.
    pub total_p_error_kw: f64,
    /// Largest `|Σ_φ q_inj - Σ_φ q̂|` over buses, kVAr.
    pub total_q_error_kvar: f64,
    /// Largest flow balance residual over lines and phases, pu.
    pub balance_residual: f64,
    /// Largest `q - p` and most negative `q`, pu (both ≤ 0 when satisfied).
    pub power_factor_excess: f64,
    pub negative_q: f64,
    /// Largest gap between solution voltages and a power flow of its injections, pu^2.
    pub voltage_residual: f64,
    /// `(parent, child, phase)` triples where the child uses a phase its parent does not.
    pub consistency_violations: Vec<(String, String, char)>,
    /// Buses whose assignment is empty or exceeds their phase set.
    pub phase_count_violations: Vec<String>,
}

impl Audit {
    pub fn conservation_ok(&self) -> bool {
        self.total_p_error_kw <= 1e-6
            && self.total_q_error_kvar <= 1e-6
            && self.balance_residual < 1e-8
            && self.power_factor_excess <= 1e-9
            && self.negative_q <= 0.0
    }

    pub fn consistency_ok(&self) -> bool {
        self.consistency_violations.is_empty() && self.phase_count_violations.is_empty()
    }
}

/// Check a solution independently of the model rows that produced it.
pub fn audit(net: &Network, sol: &Solution) -> Audit {
    let base = net.data().base_kva;
    let mut a = Audit {
        total_p_error_kw: 0.0,
        total_q_error_kvar: 0.0,
        balance_residual: 0.0,
        power_factor_excess: f64::NEG_INFINITY,
        negative_q: 0.0,
        voltage_residual: 0.0,
        consistency_violations: Vec::new(),
        phase_count_violations: Vec::new(),
    };
    for (b, bus) in net.buses().iter().enumerate() {
        let p: f64 = sol.p_inj[b].iter().sum::<f64>() * base;
        let q: f64 = sol.q_inj[b].iter().sum::<f64>() * base;
        a.total_p_error_kw = a.total_p_error_kw.max((p - bus.load_p.iter().sum::<f64>()).abs());
        a.total_q_error_kvar = a.total_q_error_kvar.max((q - bus.load_q.iter().sum::<f64>()).abs());
        for ph in bus.phases.iter() {
            let k = ph.index();
            a.power_factor_excess = a.power_factor_excess.max(sol.q_inj[b][k] - sol.p_inj[b][k]);
            a.negative_q = a.negative_q.max(-sol.q_inj[b][k]);
        }
        let set = sol.assignment.sets[b];
        if set.is_empty() || !set.is_subset(bus.phases) {
            a.phase_count_violations.push(bus.id.clone());
        }
        if let Some(parent) = net.parent(b) {
            for ph in set.iter() {
                if !sol.assignment.sets[parent].contains(ph) {
                    a.consistency_violations.push((net.bus(parent).id.clone(), bus.id.clone(), ph.letter()));
                }
            }
        }
        if let Some(line) = net.parent_line(b) {
            for ph in bus.phases.iter() {
                let k = ph.index();
                for (flow, inj) in [(&sol.p_flow, &sol.p_inj), (&sol.q_flow, &sol.q_inj)] {
                    let mut r = flow[line][k] - inj[b][k];
                    for &c in net.child_indices(b) {
                        if net.bus(c).phases.contains(ph) {
                            r -= flow[net.parent_line(c).expect("child has a line")][k];
                        }
                    }
                    a.balance_residual = a.balance_residual.max(r.abs());
                }
            }
        }
    }
    if a.power_factor_excess == f64::NEG_INFINITY {
        a.power_factor_excess = 0.0;
    }
    let inj = crate::lin3distflow::Injections {
        p: sol.p_inj.clone(),
        q: sol.q_inj.clone(),
    };
    if let Ok(state) = crate::lin3distflow::power_flow(net, &inj, net.source_v()) {
        for (b, bus) in net.buses().iter().enumerate() {
            for ph in bus.phases.iter() {
                let k = ph.index();
                a.voltage_residual = a.voltage_residual.max((state.v[b][k] - sol.v[b][k]).abs());
            }
        }
    } else {
        a.voltage_residual = f64::INFINITY;
    }
    a
}

/// Per-bus voltage table: squared voltages, both unbalance contributions.
pub fn unbalance_csv(net: &Network, state: &PhasorState) -> String {
    let sq = unbalance_metric(state);
    let mag = magnitude_metric(state);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bus", "phases", "v_a", "v_b", "v_c", "v_mean", "deviation_sq", "deviation_mag"])
        .expect("in-memory write");
    let mut order: Vec<usize> = (0..net.bus_count()).collect();
    order.sort_by(|a, b| net.bus(*a).id.cmp(&net.bus(*b).id));
    for b in order {
        let bus = net.bus(b);
        let v = |ph: Phase| state.v(b, ph).map_or(String::new(), |v| format!("{v:.9}"));
        w.write_record([
            bus.id.clone(),
            bus.phases.to_string(),
            v(Phase::A),
            v(Phase::B),
            v(Phase::C),
            format!("{:.9}", sq.v_mean[b]),
            format!("{:.9}", sq.per_bus[b]),
            format!("{:.9}", mag.per_bus[b]),
        ])
        .expect("in-memory write");
    }
    w.write_record([
        "TOTAL".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format!("{:.9}", sq.total_metric),
        format!("{:.9}", mag.total_metric),
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
