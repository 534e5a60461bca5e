//! Radial three-phase feeder model.
//!
//! A feeder is read from a TOML document (see `docs/feeder-format.md`) into
//! [`FeederData`], checked by [`validate`], and wrapped in a [`Network`] that
//! caches the tree topology (parent, children, topological order) rooted at
//! the source bus. A `Network` is immutable once built.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 3x3 real matrix indexed by `[phase][phase]`.
pub type Matrix3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Phase> {
        Phase::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        ['a', 'b', 'c'][self.index()]
    }

    pub fn from_letter(c: char) -> Option<Phase> {
        match c.to_ascii_lowercase() {
            'a' => Some(Phase::A),
            'b' => Some(Phase::B),
            'c' => Some(Phase::C),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// A subset of {a, b, c}, stored as a bit mask (bit 0 = a).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const EMPTY: PhaseSet = PhaseSet(0);
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn from_mask(mask: u8) -> PhaseSet {
        PhaseSet(mask & 0b111)
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn single(phase: Phase) -> PhaseSet {
        PhaseSet(1 << phase.index())
    }

    pub fn contains(self, phase: Phase) -> bool {
        self.0 & (1 << phase.index()) != 0
    }

    pub fn with(self, phase: Phase) -> PhaseSet {
        PhaseSet(self.0 | (1 << phase.index()))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersection(self, other: PhaseSet) -> PhaseSet {
        PhaseSet(self.0 & other.0)
    }

    /// Present phases in a < b < c order.
    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    /// Every nonempty subset, in increasing mask order.
    pub fn nonempty_subsets(self) -> impl Iterator<Item = PhaseSet> {
        (1u8..8).map(PhaseSet).filter(move |s| s.is_subset(self))
    }
}

impl fmt::Debug for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhaseSet({self})")
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "-");
        }
        for p in self.iter() {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PhaseSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = PhaseSet::EMPTY;
        for c in s.chars() {
            let p = Phase::from_letter(c).ok_or_else(|| format!("invalid phase letter `{c}`"))?;
            if set.contains(p) {
                return Err(format!("phase `{c}` listed twice"));
            }
            set = set.with(p);
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub phases: PhaseSet,
    /// Spot load per phase, kW.
    pub load_p: [f64; 3],
    /// Spot load per phase, kVAr.
    pub load_q: [f64; 3],
    pub is_source: bool,
}

impl Bus {
    pub fn new(id: impl Into<String>, phases: PhaseSet) -> Bus {
        Bus {
            id: id.into(),
            phases,
            load_p: [0.0; 3],
            load_q: [0.0; 3],
            is_source: false,
        }
    }

    pub fn with_load(mut self, p_kw: [f64; 3], q_kvar: [f64; 3]) -> Bus {
        self.load_p = p_kw;
        self.load_q = q_kvar;
        self
    }

    pub fn has_load(&self) -> bool {
        self.load_p.iter().chain(&self.load_q).any(|v| *v != 0.0)
    }
}

/// Series element between an upstream and a downstream bus. It carries the
/// phases of its downstream bus; `r` and `x` are in ohms.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: String,
    pub to: String,
    pub r: Matrix3,
    pub x: Matrix3,
}

/// Unvalidated feeder content, exactly as read from a document.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederData {
    pub name: String,
    /// Per-phase power base, kVA.
    pub base_kva: f64,
    /// Line-to-neutral voltage base, kV.
    pub base_kv: f64,
    pub source: String,
    /// Squared source voltage per phase, pu^2.
    pub source_v: [f64; 3],
    /// Optional feeder-specific squared-voltage band (v_min, v_max), pu^2.
    pub voltage_band: Option<(f64, f64)>,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
}

impl FeederData {
    /// A feeder holding only its source bus.
    pub fn new(name: impl Into<String>, source: Bus, base_kva: f64, base_kv: f64) -> FeederData {
        let mut source = source;
        source.is_source = true;
        FeederData {
            name: name.into(),
            base_kva,
            base_kv,
            source: source.id.clone(),
            source_v: [1.0; 3],
            voltage_band: None,
            buses: vec![source],
            lines: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    InvalidBase { field: &'static str, value: f64 },
    InvalidSourceVoltage { phase: Phase, value: f64 },
    InvalidVoltageBand { v_min: f64, v_max: f64 },
    DuplicateBus { id: String },
    InvalidPhases { bus: String, detail: String },
    EmptyPhaseSet { bus: String },
    UnknownSource { id: String },
    UnknownBus { line: usize, id: String },
    SelfLoop { line: usize, bus: String },
    NotRadial { detail: String },
    ReversedLine { line: usize, from: String, to: String },
    NonFinite { element: String },
    NegativeLoad { bus: String, phase: Phase },
    LoadOnAbsentPhase { bus: String, phase: Phase },
    PhaseInconsistent { parent: String, child: String },
    ImpedanceOnAbsentPhase { line: usize, to: String },
    NegativeResistance { line: usize, phase: Phase },
}

impl Violation {
    pub fn is_radiality(&self) -> bool {
        matches!(self, Violation::NotRadial { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            InvalidBase { field, value } => write!(f, "{field} must be positive and finite, got {value}"),
            InvalidSourceVoltage { phase, value } => {
                write!(f, "source squared voltage on phase {phase} must be positive, got {value}")
            }
            InvalidVoltageBand { v_min, v_max } => {
                write!(f, "voltage band requires 0 < v_min < v_max, got [{v_min}, {v_max}]")
            }
            DuplicateBus { id } => write!(f, "duplicate bus id `{id}`"),
            InvalidPhases { bus, detail } => write!(f, "bus `{bus}`: {detail}"),
            EmptyPhaseSet { bus } => write!(f, "bus `{bus}` has no phases"),
            UnknownSource { id } => write!(f, "source bus `{id}` is not defined"),
            UnknownBus { line, id } => write!(f, "line {line} references unknown bus `{id}`"),
            SelfLoop { line, bus } => write!(f, "line {line} connects bus `{bus}` to itself"),
            NotRadial { detail } => write!(f, "network is not radial: {detail}"),
            ReversedLine { line, from, to } => {
                write!(f, "line {line} ({from} -> {to}) points towards the source")
            }
            NonFinite { element } => write!(f, "non-finite value in {element}"),
            NegativeLoad { bus, phase } => write!(f, "bus `{bus}` has a negative load on phase {phase}"),
            LoadOnAbsentPhase { bus, phase } => {
                write!(f, "bus `{bus}` has load on absent phase {phase}")
            }
            PhaseInconsistent { parent, child } => {
                write!(f, "bus `{child}` has a phase that its parent `{parent}` lacks")
            }
            ImpedanceOnAbsentPhase { line, to } => {
                write!(f, "line {line} has impedance on a phase absent from bus `{to}`")
            }
            NegativeResistance { line, phase } => {
                write!(f, "line {line} has negative self resistance on phase {phase}")
            }
        }
    }
}

/// Every invariant violation found in a feeder; empty iff the feeder is valid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn radiality_count(&self) -> usize {
        self.violations.iter().filter(|v| v.is_radiality()).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid feeder: {0}")]
    Invalid(ValidationReport),
    #[error("unknown bus `{0}`")]
    UnknownBus(String),
}

/// Check every feeder invariant and collect the violations.
pub fn validate(data: &FeederData) -> ValidationReport {
    let mut out = Vec::new();

    for (field, value) in [("base_kva", data.base_kva), ("base_kv", data.base_kv)] {
        if !(value.is_finite() && value > 0.0) {
            out.push(Violation::InvalidBase { field, value });
        }
    }
    for p in Phase::ALL {
        let v = data.source_v[p.index()];
        if !(v.is_finite() && v > 0.0) {
            out.push(Violation::InvalidSourceVoltage { phase: p, value: v });
        }
    }
    if let Some((v_min, v_max)) = data.voltage_band {
        if !(v_min.is_finite() && v_max.is_finite() && v_min > 0.0 && v_min < v_max) {
            out.push(Violation::InvalidVoltageBand { v_min, v_max });
        }
    }

    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, bus) in data.buses.iter().enumerate() {
        if index.insert(bus.id.as_str(), i).is_some() {
            out.push(Violation::DuplicateBus { id: bus.id.clone() });
        }
        if bus.phases.is_empty() {
            out.push(Violation::EmptyPhaseSet { bus: bus.id.clone() });
        }
        for p in Phase::ALL {
            let (lp, lq) = (bus.load_p[p.index()], bus.load_q[p.index()]);
            if !(lp.is_finite() && lq.is_finite()) {
                out.push(Violation::NonFinite { element: format!("load of bus `{}`", bus.id) });
                continue;
            }
            if lp < 0.0 || lq < 0.0 {
                out.push(Violation::NegativeLoad { bus: bus.id.clone(), phase: p });
            }
            if !bus.phases.contains(p) && (lp != 0.0 || lq != 0.0) {
                out.push(Violation::LoadOnAbsentPhase { bus: bus.id.clone(), phase: p });
            }
        }
    }
    if !index.contains_key(data.source.as_str()) {
        out.push(Violation::UnknownSource { id: data.source.clone() });
    }

    let mut endpoints = Vec::with_capacity(data.lines.len());
    for (l, line) in data.lines.iter().enumerate() {
        let from = index.get(line.from.as_str()).copied();
        let to = index.get(line.to.as_str()).copied();
        if from.is_none() {
            out.push(Violation::UnknownBus { line: l, id: line.from.clone() });
        }
        if to.is_none() {
            out.push(Violation::UnknownBus { line: l, id: line.to.clone() });
        }
        if line.r.iter().chain(&line.x).flatten().any(|v| !v.is_finite()) {
            out.push(Violation::NonFinite { element: format!("impedance of line {l}") });
        }
        let (Some(from), Some(to)) = (from, to) else {
            continue;
        };
        if from == to {
            out.push(Violation::SelfLoop { line: l, bus: line.from.clone() });
            continue;
        }
        endpoints.push((l, from, to));

        let (up, down) = (&data.buses[from], &data.buses[to]);
        if !down.phases.is_subset(up.phases) {
            out.push(Violation::PhaseInconsistent {
                parent: up.id.clone(),
                child: down.id.clone(),
            });
        }
        let carried = down.phases;
        let stray = Phase::ALL.into_iter().any(|i| {
            Phase::ALL.into_iter().any(|j| {
                let present = carried.contains(i) && carried.contains(j);
                !present && (line.r[i.index()][j.index()] != 0.0 || line.x[i.index()][j.index()] != 0.0)
            })
        });
        if stray {
            out.push(Violation::ImpedanceOnAbsentPhase { line: l, to: down.id.clone() });
        }
        for p in carried.iter() {
            if line.r[p.index()][p.index()] < 0.0 {
                out.push(Violation::NegativeResistance { line: l, phase: p });
            }
        }
    }

    // Radiality is judged only once every line endpoint resolves.
    let endpoints_ok = endpoints.len() == data.lines.len();
    if let (true, Some(&source)) = (endpoints_ok, index.get(data.source.as_str())) {
        let n = data.buses.len();
        if data.lines.len() + 1 != n {
            out.push(Violation::NotRadial {
                detail: format!("{} lines for {} buses (a tree needs {})", data.lines.len(), n, n.saturating_sub(1)),
            });
        } else {
            match bfs_tree(n, source, &endpoints) {
                Err(unreached) => out.push(Violation::NotRadial {
                    detail: format!("bus `{}` is not connected to the source", data.buses[unreached].id),
                }),
                Ok(tree) => {
                    for &(l, from, to) in &endpoints {
                        if tree.parent[to] != Some(from) {
                            out.push(Violation::ReversedLine {
                                line: l,
                                from: data.buses[from].id.clone(),
                                to: data.buses[to].id.clone(),
                            });
                        }
                    }
                }
            }
        }
    }

    ValidationReport { violations: out }
}

struct Tree {
    parent: Vec<Option<usize>>,
}

/// Undirected BFS; `Err(bus)` names the first bus never reached.
fn bfs_tree(n: usize, source: usize, edges: &[(usize, usize, usize)]) -> Result<Tree, usize> {
    let mut adj = vec![Vec::new(); n];
    for &(_, a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    seen[source] = true;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(u);
                queue.push_back(w);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(bus) => Err(bus),
        None => Ok(Tree { parent }),
    }
}

/// A validated radial feeder with its topology precomputed.
#[derive(Debug, Clone)]
pub struct Network {
    data: FeederData,
    index: BTreeMap<String, usize>,
    source: usize,
    parent: Vec<Option<usize>>,
    parent_line: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    line_ends: Vec<(usize, usize)>,
    order: Vec<usize>,
}

impl Network {
    pub fn new(mut data: FeederData) -> Result<Network, NetworkError> {
        let report = validate(&data);
        if !report.is_valid() {
            return Err(NetworkError::Invalid(report));
        }
        for bus in &mut data.buses {
            bus.is_source = bus.id == data.source;
        }
        let index: BTreeMap<String, usize> =
            data.buses.iter().enumerate().map(|(i, b)| (b.id.clone(), i)).collect();
        let n = data.buses.len();
        let source = index[&data.source];
        let mut parent = vec![None; n];
        let mut parent_line = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut line_ends = Vec::with_capacity(data.lines.len());
        for (l, line) in data.lines.iter().enumerate() {
            let (from, to) = (index[&line.from], index[&line.to]);
            parent[to] = Some(from);
            parent_line[to] = Some(l);
            children[from].push(to);
            line_ends.push((from, to));
        }
        for list in &mut children {
            list.sort_by(|a, b| data.buses[*a].id.cmp(&data.buses[*b].id));
        }
        let mut order = Vec::with_capacity(n);
        order.push(source);
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            order.extend_from_slice(&children[u]);
            head += 1;
        }
        Ok(Network {
            data,
            index,
            source,
            parent,
            parent_line,
            children,
            line_ends,
            order,
        })
    }

    pub fn data(&self) -> &FeederData {
        &self.data
    }

    pub fn into_data(self) -> FeederData {
        self.data
    }

    pub fn name(&self) -> &str {
        &self.data.name
    }

    pub fn buses(&self) -> &[Bus] {
        &self.data.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.data.lines
    }

    pub fn bus(&self, i: usize) -> &Bus {
        &self.data.buses[i]
    }

    pub fn bus_count(&self) -> usize {
        self.data.buses.len()
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn source_v(&self) -> [f64; 3] {
        self.data.source_v
    }

    pub fn voltage_band(&self) -> Option<(f64, f64)> {
        self.data.voltage_band
    }

    pub fn parent(&self, bus: usize) -> Option<usize> {
        self.parent[bus]
    }

    /// Index of the line feeding `bus` (none for the source).
    pub fn parent_line(&self, bus: usize) -> Option<usize> {
        self.parent_line[bus]
    }

    /// Direct downstream neighbours, ordered by bus id.
    pub fn child_indices(&self, bus: usize) -> &[usize] {
        &self.children[bus]
    }

    /// `(from, to)` bus indices of a line.
    pub fn line_ends(&self, line: usize) -> (usize, usize) {
        self.line_ends[line]
    }

    /// Buses in breadth-first order from the source; every parent precedes its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn children(&self, id: &str) -> Result<Vec<&str>, NetworkError> {
        let bus = self.bus_index(id).ok_or_else(|| NetworkError::UnknownBus(id.to_string()))?;
        Ok(self.children[bus].iter().map(|c| self.data.buses[*c].id.as_str()).collect())
    }

    /// All buses strictly below `bus`.
    pub fn descendants(&self, bus: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.children[bus].iter().rev().copied().collect();
        while let Some(u) = stack.pop() {
            out.push(u);
            stack.extend(self.children[u].iter().rev());
        }
        out
    }

    /// Impedance base in ohms for the document's per-phase kVA and line-to-neutral kV.
    pub fn z_base(&self) -> f64 {
        self.data.base_kv * self.data.base_kv * 1000.0 / self.data.base_kva
    }

    /// Spot load of a bus in per-unit, `(p, q)`.
    pub fn load_pu(&self, bus: usize) -> ([f64; 3], [f64; 3]) {
        let b = &self.data.buses[bus];
        let s = self.data.base_kva;
        (b.load_p.map(|v| v / s), b.load_q.map(|v| v / s))
    }

    /// Per-phase feeder totals of the spot loads, `(kW, kVAr)`.
    pub fn total_load(&self) -> ([f64; 3], [f64; 3]) {
        let mut p = [0.0; 3];
        let mut q = [0.0; 3];
        for b in &self.data.buses {
            for k in 0..3 {
                p[k] += b.load_p[k];
                q[k] += b.load_q[k];
            }
        }
        (p, q)
    }

    pub fn to_document(&self) -> String {
        serialize_feeder(&self.data)
    }
}

// --- document format ----------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    feeder: Header,
    #[serde(default, rename = "bus")]
    buses: Vec<BusRecord>,
    #[serde(default, rename = "line")]
    lines: Vec<LineRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    name: String,
    base_kva: f64,
    base_kv: f64,
    source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_v: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_max: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusRecord {
    id: String,
    phases: String,
    #[serde(default, skip_serializing_if = "is_zero3")]
    p_kw: [f64; 3],
    #[serde(default, skip_serializing_if = "is_zero3")]
    q_kvar: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRecord {
    from: String,
    to: String,
    r: Matrix3,
    x: Matrix3,
}

fn is_zero3(v: &[f64; 3]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
    (line, column)
}

/// Read a feeder document without validating it.
pub fn parse_feeder_data(text: &str) -> Result<FeederData, NetworkError> {
    let doc: Document = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        NetworkError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;

    let mut phase_errors = Vec::new();
    let buses = doc
        .buses
        .into_iter()
        .map(|rec| {
            let phases = rec.phases.parse::<PhaseSet>().unwrap_or_else(|detail| {
                phase_errors.push(Violation::InvalidPhases {
                    bus: rec.id.clone(),
                    detail: format!("phases `{}`: {detail}", rec.phases),
                });
                PhaseSet::EMPTY
            });
            Bus {
                is_source: rec.id == doc.feeder.source,
                id: rec.id,
                phases,
                load_p: rec.p_kw,
                load_q: rec.q_kvar,
            }
        })
        .collect();
    if !phase_errors.is_empty() {
        return Err(NetworkError::Invalid(ValidationReport { violations: phase_errors }));
    }

    let voltage_band = match (doc.feeder.v_min, doc.feeder.v_max) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        (lo, hi) => {
            return Err(NetworkError::Invalid(ValidationReport {
                violations: vec![Violation::InvalidVoltageBand {
                    v_min: lo.unwrap_or(f64::NAN),
                    v_max: hi.unwrap_or(f64::NAN),
                }],
            }))
        }
    };

    Ok(FeederData {
        name: doc.feeder.name,
        base_kva: doc.feeder.base_kva,
        base_kv: doc.feeder.base_kv,
        source: doc.feeder.source,
        source_v: doc.feeder.source_v.unwrap_or([1.0; 3]),
        voltage_band,
        buses,
        lines: doc
            .lines
            .into_iter()
            .map(|rec| Line {
                from: rec.from,
                to: rec.to,
                r: rec.r,
                x: rec.x,
            })
            .collect(),
    })
}

/// Read and validate a feeder document.
pub fn parse_feeder(text: &str) -> Result<Network, NetworkError> {
    Network::new(parse_feeder_data(text)?)
}

pub fn serialize_feeder(data: &FeederData) -> String {
    let doc = Document {
        feeder: Header {
            name: data.name.clone(),
            base_kva: data.base_kva,
            base_kv: data.base_kv,
            source: data.source.clone(),
            source_v: Some(data.source_v),
            v_min: data.voltage_band.map(|b| b.0),
            v_max: data.voltage_band.map(|b| b.1),
        },
        buses: data
            .buses
            .iter()
            .map(|b| BusRecord {
                id: b.id.clone(),
                phases: b.phases.to_string(),
                p_kw: b.load_p,
                q_kvar: b.load_q,
            })
            .collect(),
        lines: data
            .lines
            .iter()
            .map(|l| LineRecord {
                from: l.from.clone(),
                to: l.to.clone(),
                r: l.r,
                x: l.x,
            })
            .collect(),
    };
    toml::to_string(&doc).expect("feeder documents always serialize")
}
