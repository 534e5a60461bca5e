//! The phase allocation MILP.
//!
//! For every bus `n` and present phase `φ` the model has a binary `ξ`
//! (phase in use), injections `p`, `q`, a squared voltage `v` and an
//! absolute-deviation auxiliary `t`; every bus has a mean voltage `vm`, and
//! the line feeding every non-source bus has flows `pf`, `qf` per phase. The
//! objective is `Σ (α t + ξ)`.
//!
//! [`MilpModel`] itself is a generic sparse container; solvers and the LP
//! writer only see variables, rows and bounds.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::lin3distflow::{line_sensitivity, PhasorState};
use crate::network::{Network, Phase, PhaseSet};

pub const DEFAULT_ALPHA: f64 = 1e-2;
pub const DEFAULT_V_MIN: f64 = 0.95 * 0.95;
pub const DEFAULT_V_MAX: f64 = 1.05 * 1.05;
pub const DEFAULT_MIP_GAP: f64 = 1e-6;
pub const FEASIBILITY_TOL: f64 = 1e-8;
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    /// Weight of the unbalance term, `0 <= alpha <= 1`.
    pub alpha: f64,
    /// Per-phase hosting capacity as a multiple of the spot load.
    pub capacity_multiplier: f64,
    /// Squared-voltage band, pu^2.
    pub v_min: f64,
    pub v_max: f64,
    /// Relative optimality gap at which branch-and-bound stops.
    pub mip_gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Branch-and-bound node limit; reaching it reports a gap-limit status.
    pub node_limit: Option<usize>,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
}

impl Default for CaseConfig {
    fn default() -> Self {
        CaseConfig {
            alpha: DEFAULT_ALPHA,
            capacity_multiplier: 1.0,
            v_min: DEFAULT_V_MIN,
            v_max: DEFAULT_V_MAX,
            mip_gap: DEFAULT_MIP_GAP,
            time_limit: None,
            node_limit: None,
            feasibility_tol: FEASIBILITY_TOL,
            integrality_tol: INTEGRALITY_TOL,
        }
    }
}

impl CaseConfig {
    /// Case `k` uses capacity multiplier `k`.
    pub fn case(k: u32) -> CaseConfig {
        CaseConfig {
            capacity_multiplier: f64::from(k),
            ..CaseConfig::default()
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> CaseConfig {
        self.alpha = alpha;
        self
    }

    pub fn with_gap(mut self, gap: f64) -> CaseConfig {
        self.mip_gap = gap;
        self
    }

    /// Replace the voltage band when one is given.
    pub fn with_band(mut self, band: Option<(f64, f64)>) -> CaseConfig {
        if let Some((lo, hi)) = band {
            self.v_min = lo;
            self.v_max = hi;
        }
        self
    }

    pub fn validate(&self) -> Result<(), FormulationError> {
        let bad = |what: String| Err(FormulationError::InvalidConfig(what));
        if !(self.alpha.is_finite() && (0.0..=1.0).contains(&self.alpha)) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.capacity_multiplier.is_finite() && self.capacity_multiplier >= 1.0) {
            return bad(format!("capacity multiplier must be >= 1, got {}", self.capacity_multiplier));
        }
        if !(self.v_min.is_finite() && self.v_max.is_finite() && 0.0 < self.v_min && self.v_min < self.v_max) {
            return bad(format!("voltage band requires 0 < v_min < v_max, got [{}, {}]", self.v_min, self.v_max));
        }
        if !(self.mip_gap.is_finite() && self.mip_gap >= 0.0) {
            return bad(format!("mip gap must be >= 0, got {}", self.mip_gap));
        }
        if let Some(t) = self.time_limit {
            if t.is_nan() || t <= 0.0 {
                return bad(format!("time limit must be positive, got {t}"));
            }
        }
        if !(self.feasibility_tol > 0.0 && self.integrality_tol > 0.0 && self.integrality_tol < 0.5) {
            return bad("tolerances must be positive (integrality below 0.5)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FormulationError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bus `{bus}` cannot be served: {reason}")]
    InfeasibleBus { bus: String, reason: String },
    #[error("assignment covers {got} buses, feeder has {expected}")]
    AssignmentSize { expected: usize, got: usize },
    #[error("assignment gives bus `{bus}` phases {phases}, which it does not have")]
    AssignmentPhaseAbsent { bus: String, phases: PhaseSet },
    #[error("assignment gives bus `{child}` a phase its parent `{parent}` does not use")]
    AssignmentInconsistent { parent: String, child: String },
    #[error("assignment must keep every phase of the source bus `{bus}`")]
    AssignmentSource { bus: String },
    #[error("model has no feeder layout")]
    NoLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// Constraint families of the phase allocation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintTag {
    InjectionCapP,
    InjectionCapQ,
    PowerFactor,
    TotalP,
    TotalQ,
    PhaseCap,
    PhaseFloor,
    Consistency,
    BalanceP,
    BalanceQ,
    VoltageDrop,
    MeanVoltage,
    AbsAbove,
    AbsBelow,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub tag: ConstraintTag,
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(j, a)| a * x[*j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Xi,
    PInj,
    QInj,
    PFlow,
    QFlow,
    V,
    VMean,
    TAbs,
}

impl Role {
    pub fn prefix(self) -> &'static str {
        match self {
            Role::Xi => "xi",
            Role::PInj => "p",
            Role::QInj => "q",
            Role::PFlow => "pf",
            Role::QFlow => "qf",
            Role::V => "v",
            Role::VMean => "vm",
            Role::TAbs => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarMeta {
    pub bus: usize,
    pub phase: Option<Phase>,
    pub role: Role,
}

/// Variable indices of one bus. Flows belong to the line feeding the bus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BusVars {
    pub xi: [Option<usize>; 3],
    pub p: [Option<usize>; 3],
    pub q: [Option<usize>; 3],
    pub v: [Option<usize>; 3],
    pub t: [Option<usize>; 3],
    pub vm: usize,
    pub pf: [Option<usize>; 3],
    pub qf: [Option<usize>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub buses: Vec<BusVars>,
    /// Smallest feasible phase count of every bus.
    pub phase_floor: Vec<usize>,
}

/// A minimization MILP over bounded variables and sparse linear rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MilpModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Role of every variable when the model comes from a feeder.
    pub meta: Vec<Option<VarMeta>>,
    pub layout: Option<Layout>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> MilpModel {
        MilpModel {
            name: name.into(),
            ..MilpModel::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64, objective: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
            objective,
        });
        self.meta.push(None);
        self.variables.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        tag: ConstraintTag,
        terms: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        debug_assert!(terms.iter().all(|(j, _)| *j < self.variables.len()));
        self.constraints.push(Constraint {
            name: name.into(),
            tag,
            terms,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| j)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.variables.iter().zip(x).map(|(v, x)| v.objective * x).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, x)| (v.lower - x).max(x - v.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// The same model with every binary relaxed to a continuous `[lower, upper]`.
    pub fn relaxed(&self) -> MilpModel {
        let mut m = self.clone();
        for v in &mut m.variables {
            v.kind = VarKind::Continuous;
        }
        m
    }

    pub fn constraints_tagged(&self, tag: ConstraintTag) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(move |c| c.tag == tag)
    }

    pub fn census(&self) -> Census {
        let mut rows = BTreeMap::new();
        for c in &self.constraints {
            *rows.entry(c.tag).or_insert(0) += 1;
        }
        let mut roles = BTreeMap::new();
        for m in self.meta.iter().flatten() {
            *roles.entry(m.role.prefix()).or_insert(0) += 1;
        }
        Census {
            variables: self.variables.len(),
            binaries: self.binaries().count(),
            constraints: self.constraints.len(),
            nonzeros: self.constraints.iter().map(|c| c.terms.len()).sum(),
            rows_by_tag: rows,
            vars_by_role: roles,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Census {
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
    pub nonzeros: usize,
    pub rows_by_tag: BTreeMap<ConstraintTag, usize>,
    pub vars_by_role: BTreeMap<&'static str, usize>,
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

/// Can phases `set` host the bus demand under the per-phase caps?
fn subset_feasible(set: PhaseSet, p_cap: &[f64; 3], q_cap: &[f64; 3], p_total: f64, q_total: f64) -> bool {
    let slack = 1e-12 * (1.0 + p_total.max(q_total));
    let cap_p: f64 = set.iter().map(|ph| p_cap[ph.index()]).sum();
    let cap_q: f64 = set.iter().map(|ph| q_cap[ph.index()].min(p_cap[ph.index()])).sum();
    p_total <= cap_p + slack && q_total <= p_total.min(cap_q) + slack
}

/// Smallest feasible phase count of bus `b`, or why none exists.
fn phase_floor(net: &Network, b: usize, multiplier: f64) -> Result<usize, FormulationError> {
    let bus = net.bus(b);
    let (p_hat, q_hat) = net.load_pu(b);
    let p_cap = p_hat.map(|v| multiplier * v);
    let q_cap = q_hat.map(|v| multiplier * v);
    let p_total: f64 = p_hat.iter().sum();
    let q_total: f64 = q_hat.iter().sum();
    let fail = |reason: String| FormulationError::InfeasibleBus {
        bus: bus.id.clone(),
        reason,
    };
    if q_total > p_total * (1.0 + 1e-12) {
        return Err(fail(format!(
            "reactive demand {:.6} kVAr exceeds active demand {:.6} kW, but q <= p holds per phase",
            q_total * net.data().base_kva,
            p_total * net.data().base_kva
        )));
    }
    let candidates: Vec<PhaseSet> = if bus.is_source {
        vec![bus.phases]
    } else {
        bus.phases.nonempty_subsets().collect()
    };
    candidates
        .into_iter()
        .filter(|s| subset_feasible(*s, &p_cap, &q_cap, p_total, q_total))
        .map(PhaseSet::len)
        .min()
        .ok_or_else(|| fail("per-phase capacities cannot host the demand with q <= p on every phase".into()))
}

/// Assemble the phase allocation MILP.
pub fn build_model(net: &Network, cfg: &CaseConfig) -> Result<MilpModel, FormulationError> {
    cfg.validate()?;
    let floors = (0..net.bus_count())
        .map(|b| phase_floor(net, b, cfg.capacity_multiplier))
        .collect::<Result<Vec<_>, _>>()?;

    let mut m = MilpModel::new(net.name());
    let mut vars = vec![BusVars::default(); net.bus_count()];
    let v_src = net.source_v();

    let add = |m: &mut MilpModel, b: usize, ph: Option<Phase>, role: Role, kind, lo, hi, obj| {
        let name = match ph {
            Some(ph) => format!("{}_{}_{}", role.prefix(), sanitize(&net.bus(b).id), ph),
            None => format!("{}_{}", role.prefix(), sanitize(&net.bus(b).id)),
        };
        let j = m.add_var(name, kind, lo, hi, obj);
        m.meta[j] = Some(VarMeta { bus: b, phase: ph, role });
        j
    };

    use VarKind::{Binary, Continuous};
    let inf = f64::INFINITY;
    for &b in net.topological_order() {
        let bus = net.bus(b);
        let (p_hat, q_hat) = net.load_pu(b);
        for ph in bus.phases.iter() {
            let k = ph.index();
            let xi_lo = if bus.is_source { 1.0 } else { 0.0 };
            let (v_lo, v_hi) = if bus.is_source { (v_src[k], v_src[k]) } else { (cfg.v_min, cfg.v_max) };
            vars[b].xi[k] = Some(add(&mut m, b, Some(ph), Role::Xi, Binary, xi_lo, 1.0, 1.0));
            vars[b].p[k] = Some(add(&mut m, b, Some(ph), Role::PInj, Continuous, 0.0, cfg.capacity_multiplier * p_hat[k], 0.0));
            vars[b].q[k] = Some(add(&mut m, b, Some(ph), Role::QInj, Continuous, 0.0, cfg.capacity_multiplier * q_hat[k], 0.0));
            vars[b].v[k] = Some(add(&mut m, b, Some(ph), Role::V, Continuous, v_lo, v_hi, 0.0));
            vars[b].t[k] = Some(add(&mut m, b, Some(ph), Role::TAbs, Continuous, 0.0, inf, cfg.alpha));
        }
        vars[b].vm = add(&mut m, b, None, Role::VMean, Continuous, -inf, inf, 0.0);
        if net.parent(b).is_some() {
            for ph in bus.phases.iter() {
                let k = ph.index();
                vars[b].pf[k] = Some(add(&mut m, b, Some(ph), Role::PFlow, Continuous, -inf, inf, 0.0));
                vars[b].qf[k] = Some(add(&mut m, b, Some(ph), Role::QFlow, Continuous, -inf, inf, 0.0));
            }
        }
    }

    let id = |b: usize| sanitize(&net.bus(b).id);
    let get = |slot: [Option<usize>; 3], ph: Phase| slot[ph.index()].expect("present phase has a variable");
    for &b in net.topological_order() {
        let bus = net.bus(b);
        let bv = &vars[b];
        let (p_hat, q_hat) = net.load_pu(b);
        for ph in bus.phases.iter() {
            let k = ph.index();
            let (xi, p, q) = (get(bv.xi, ph), get(bv.p, ph), get(bv.q, ph));
            let p_bar = cfg.capacity_multiplier * p_hat[k];
            let q_bar = cfg.capacity_multiplier * q_hat[k];
            let cap = |var: usize, bar: f64| {
                let mut t = vec![(var, 1.0)];
                if bar != 0.0 {
                    t.push((xi, -bar));
                }
                t
            };
            m.add_constraint(format!("capp_{}_{ph}", id(b)), ConstraintTag::InjectionCapP, cap(p, p_bar), Relation::Le, 0.0);
            m.add_constraint(format!("capq_{}_{ph}", id(b)), ConstraintTag::InjectionCapQ, cap(q, q_bar), Relation::Le, 0.0);
            m.add_constraint(format!("pf_{}_{ph}", id(b)), ConstraintTag::PowerFactor, vec![(q, 1.0), (p, -1.0)], Relation::Le, 0.0);
        }
        let over = |slot: [Option<usize>; 3]| bus.phases.iter().map(|ph| (get(slot, ph), 1.0)).collect::<Vec<_>>();
        m.add_constraint(format!("totp_{}", id(b)), ConstraintTag::TotalP, over(bv.p), Relation::Eq, p_hat.iter().sum());
        m.add_constraint(format!("totq_{}", id(b)), ConstraintTag::TotalQ, over(bv.q), Relation::Eq, q_hat.iter().sum());
        m.add_constraint(format!("ncap_{}", id(b)), ConstraintTag::PhaseCap, over(bv.xi), Relation::Le, bus.phases.len() as f64);
        m.add_constraint(format!("nmin_{}", id(b)), ConstraintTag::PhaseFloor, over(bv.xi), Relation::Ge, floors[b] as f64);

        let mut mean = vec![(bv.vm, bus.phases.len() as f64)];
        mean.extend(bus.phases.iter().map(|ph| (get(bv.v, ph), -1.0)));
        m.add_constraint(format!("vmean_{}", id(b)), ConstraintTag::MeanVoltage, mean, Relation::Eq, 0.0);
        for ph in bus.phases.iter() {
            let (t, v) = (get(bv.t, ph), get(bv.v, ph));
            m.add_constraint(format!("absa_{}_{ph}", id(b)), ConstraintTag::AbsAbove, vec![(t, 1.0), (bv.vm, -1.0), (v, 1.0)], Relation::Ge, 0.0);
            m.add_constraint(format!("absb_{}_{ph}", id(b)), ConstraintTag::AbsBelow, vec![(t, 1.0), (bv.vm, 1.0), (v, -1.0)], Relation::Ge, 0.0);
        }
    }

    for &b in net.topological_order() {
        let (Some(parent), Some(line)) = (net.parent(b), net.parent_line(b)) else {
            continue;
        };
        let bus = net.bus(b);
        let (bv, pv) = (&vars[b], &vars[parent]);
        let sens = line_sensitivity(net, line);
        let kids = net.child_indices(b);
        for ph in bus.phases.iter() {
            let k = ph.index();
            m.add_constraint(
                format!("cons_{}_{}_{ph}", id(parent), id(b)),
                ConstraintTag::Consistency,
                vec![(get(pv.xi, ph), 1.0), (get(bv.xi, ph), -1.0)],
                Relation::Ge,
                0.0,
            );
            for (tag, active, label) in [(ConstraintTag::BalanceP, true, "balp"), (ConstraintTag::BalanceQ, false, "balq")] {
                let flow = |v: &BusVars| if active { v.pf } else { v.qf };
                let inj = if active { bv.p } else { bv.q };
                let mut terms = vec![(get(flow(bv), ph), 1.0), (get(inj, ph), -1.0)];
                for &c in kids {
                    if let Some(j) = flow(&vars[c])[k] {
                        terms.push((j, -1.0));
                    }
                }
                m.add_constraint(format!("{label}_{}_{ph}", id(b)), tag, terms, Relation::Eq, 0.0);
            }
            let mut terms = vec![(get(bv.v, ph), 1.0), (get(pv.v, ph), -1.0)];
            for other in bus.phases.iter() {
                let j = other.index();
                if sens.mp[k][j] != 0.0 {
                    terms.push((get(bv.pf, other), -sens.mp[k][j]));
                }
                if sens.mq[k][j] != 0.0 {
                    terms.push((get(bv.qf, other), -sens.mq[k][j]));
                }
            }
            m.add_constraint(format!("vdrop_{}_{ph}", id(b)), ConstraintTag::VoltageDrop, terms, Relation::Eq, 0.0);
        }
    }

    m.layout = Some(Layout {
        buses: vars,
        phase_floor: floors,
    });
    Ok(m)
}

/// Phases in use at every bus, indexed like `Network::buses`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    pub sets: Vec<PhaseSet>,
}

impl Assignment {
    /// Every bus keeps all of its phases.
    pub fn base(net: &Network) -> Assignment {
        Assignment {
            sets: net.buses().iter().map(|b| b.phases).collect(),
        }
    }

    pub fn equals_base(&self, net: &Network) -> bool {
        *self == Assignment::base(net)
    }

    pub fn phase_count(&self) -> usize {
        self.sets.iter().map(|s| s.len()).sum()
    }

    /// Check the assignment against the feeder: phases available, consistent, source intact.
    pub fn check(&self, net: &Network) -> Result<(), FormulationError> {
        if self.sets.len() != net.bus_count() {
            return Err(FormulationError::AssignmentSize {
                expected: net.bus_count(),
                got: self.sets.len(),
            });
        }
        for (b, bus) in net.buses().iter().enumerate() {
            let set = self.sets[b];
            if !set.is_subset(bus.phases) {
                return Err(FormulationError::AssignmentPhaseAbsent {
                    bus: bus.id.clone(),
                    phases: set,
                });
            }
            if bus.is_source && set != bus.phases {
                return Err(FormulationError::AssignmentSource { bus: bus.id.clone() });
            }
            if let Some(parent) = net.parent(b) {
                if !set.is_subset(self.sets[parent]) {
                    return Err(FormulationError::AssignmentInconsistent {
                        parent: net.bus(parent).id.clone(),
                        child: bus.id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Read the assignment off binary values in `x`.
    pub fn from_values(model: &MilpModel, x: &[f64]) -> Result<Assignment, FormulationError> {
        let layout = model.layout.as_ref().ok_or(FormulationError::NoLayout)?;
        let sets = layout
            .buses
            .iter()
            .map(|bv| {
                Phase::ALL.into_iter().fold(PhaseSet::EMPTY, |s, ph| match bv.xi[ph.index()] {
                    Some(j) if x[j] > 0.5 => s.with(ph),
                    _ => s,
                })
            })
            .collect();
        Ok(Assignment { sets })
    }

    pub fn describe(&self, net: &Network) -> String {
        let mut out = String::new();
        for (b, bus) in net.buses().iter().enumerate() {
            if b > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}:{}", bus.id, self.sets[b]);
        }
        out
    }
}

/// Copy of `model` with every `ξ` fixed to `xi`; the copy has no binaries left.
pub fn fix_assignment(model: &MilpModel, net: &Network, xi: &Assignment) -> Result<MilpModel, FormulationError> {
    xi.check(net)?;
    let layout = model.layout.as_ref().ok_or(FormulationError::NoLayout)?;
    if layout.buses.len() != net.bus_count() {
        return Err(FormulationError::AssignmentSize {
            expected: layout.buses.len(),
            got: net.bus_count(),
        });
    }
    let mut out = model.clone();
    for (b, bv) in layout.buses.iter().enumerate() {
        for ph in Phase::ALL {
            if let Some(j) = bv.xi[ph.index()] {
                let val = if xi.sets[b].contains(ph) { 1.0 } else { 0.0 };
                let var = &mut out.variables[j];
                var.lower = val;
                var.upper = val;
            }
        }
    }
    for v in &mut out.variables {
        v.kind = VarKind::Continuous;
    }
    Ok(out)
}

/// Decoded values of a solved phase allocation model, in per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub assignment: Assignment,
    pub p_inj: Vec<[f64; 3]>,
    pub q_inj: Vec<[f64; 3]>,
    /// Flows per line, indexed like `Network::lines`.
    pub p_flow: Vec<[f64; 3]>,
    pub q_flow: Vec<[f64; 3]>,
    pub v: Vec<[f64; 3]>,
    pub v_mean: Vec<f64>,
    pub objective: f64,
}

impl Solution {
    pub fn from_values(net: &Network, model: &MilpModel, x: &[f64]) -> Result<Solution, FormulationError> {
        let layout = model.layout.as_ref().ok_or(FormulationError::NoLayout)?;
        let read = |slot: [Option<usize>; 3]| slot.map(|j| j.map_or(0.0, |j| x[j]));
        let n = net.bus_count();
        let mut p_flow = vec![[0.0; 3]; net.lines().len()];
        let mut q_flow = vec![[0.0; 3]; net.lines().len()];
        for b in 0..n {
            if let Some(l) = net.parent_line(b) {
                p_flow[l] = read(layout.buses[b].pf);
                q_flow[l] = read(layout.buses[b].qf);
            }
        }
        Ok(Solution {
            assignment: Assignment::from_values(model, x)?,
            p_inj: layout.buses.iter().map(|bv| read(bv.p)).collect(),
            q_inj: layout.buses.iter().map(|bv| read(bv.q)).collect(),
            p_flow,
            q_flow,
            v: layout.buses.iter().map(|bv| read(bv.v)).collect(),
            v_mean: layout.buses.iter().map(|bv| x[bv.vm]).collect(),
            objective: model.objective_value(x),
        })
    }

    /// Voltages and flows of the solution as a power-flow state.
    pub fn phasor_state(&self, net: &Network) -> PhasorState {
        PhasorState {
            phases: net.buses().iter().map(|b| b.phases).collect(),
            v: self.v.clone(),
            p_flow: self.p_flow.clone(),
            q_flow: self.q_flow.clone(),
        }
    }
}

// --- LP interchange format ------------------------------------------------

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], model: &MilpModel) {
    for (i, (j, a)) in terms.iter().enumerate() {
        if i > 0 && i % 6 == 0 {
            out.push_str("\n   ");
        }
        let sign = if *a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", num(a.abs()), model.variables[*j].name);
    }
    if terms.is_empty() {
        out.push_str(" 0");
    }
}

/// Write the model in CPLEX LP format.
pub fn write_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.name);
    out.push_str("Minimize\n obj:");
    let obj: Vec<(usize, f64)> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.objective != 0.0)
        .map(|(j, v)| (j, v.objective))
        .collect();
    write_terms(&mut out, &obj, model);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, &c.terms, model);
        let _ = writeln!(out, " {} {}", c.relation, num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        let (lo, hi) = (v.lower, v.upper);
        let _ = if lo == hi {
            writeln!(out, " {} = {}", v.name, num(lo))
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            writeln!(out, " {} free", v.name)
        } else {
            writeln!(out, " {} <= {} <= {}", num(lo), v.name, num(hi))
        };
    }
    let bins: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for chunk in bins.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum SolutionReadError {
    #[error("line {line}: expected `name value`")]
    Malformed { line: usize },
    #[error("line {line}: unknown variable `{name}`")]
    UnknownVariable { line: usize, name: String },
    #[error("line {line}: `{text}` is not a number")]
    BadNumber { line: usize, text: String },
}

/// Read an external solution given as `name value` lines. Blank lines and
/// lines starting with `#` are skipped; variables not listed are zero.
pub fn read_solution(model: &MilpModel, text: &str) -> Result<Vec<f64>, SolutionReadError> {
    let index: BTreeMap<&str, usize> = model
        .variables
        .iter()
        .enumerate()
        .map(|(j, v)| (v.name.as_str(), j))
        .collect();
    let mut x = vec![0.0; model.variables.len()];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(SolutionReadError::Malformed { line });
        };
        let j = *index.get(name).ok_or_else(|| SolutionReadError::UnknownVariable {
            line,
            name: name.to_string(),
        })?;
        x[j] = value.parse().map_err(|_| SolutionReadError::BadNumber {
            line,
            text: value.to_string(),
        })?;
    }
    Ok(x)
}

/// Write values as `name value` lines, the format [`read_solution`] reads.
pub fn write_solution(model: &MilpModel, x: &[f64]) -> String {
    let mut out = String::new();
    for (v, x) in model.variables.iter().zip(x) {
        let _ = writeln!(out, "{} {}", v.name, num(*x));
    }
    out
}
