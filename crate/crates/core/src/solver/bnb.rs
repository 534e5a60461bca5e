//! Best-bound branch-and-bound with depth-first plunging.
//!
//! Each node is the root relaxation plus bound changes on binaries; its LP is
//! warm-started from the parent's final basis. The branching variable is the
//! most fractional binary (ties to the lowest index) and the plunge follows
//! the child on the nearer side of the rounding.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use crate::formulation::{CaseConfig, MilpModel, VarKind};
use crate::solver::lp::{Basis, Infeasibility, LpOptions, LpStatus, Simplex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped at the node limit; the gap is still open.
    GapLimit,
    TimeLimit,
}

impl MipStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MipStatus::Optimal => "optimal",
            MipStatus::Infeasible => "infeasible",
            MipStatus::Unbounded => "unbounded",
            MipStatus::GapLimit => "gap_limit",
            MipStatus::TimeLimit => "time_limit",
        }
    }
}

/// Snapshot taken before each node is processed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub node: usize,
    pub depth: usize,
    /// Global lower bound over all open nodes.
    pub bound: f64,
    pub incumbent: Option<f64>,
}

/// Why the root relaxation has no solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RootCertificate {
    pub status: LpStatus,
    pub infeasibility: Option<Infeasibility>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub status: MipStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Objective of the incumbent (`inf` when there is none).
    pub objective: f64,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub root_bound: f64,
    pub nodes_explored: usize,
    pub lp_iterations: usize,
    pub wall_time: f64,
    pub trace: Vec<TraceEntry>,
    pub root_certificate: Option<RootCertificate>,
    /// Nodes whose relaxation stopped without a verdict.
    pub lp_failures: usize,
}

impl MipSolution {
    /// Relative gap `(objective - bound) / max(1, |objective|)`.
    pub fn gap(&self) -> f64 {
        if self.incumbent.is_none() {
            return f64::INFINITY;
        }
        ((self.objective - self.bound) / self.objective.abs().max(1.0)).max(0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MipOptions {
    pub lp: LpOptions,
}

struct Node {
    bound: f64,
    seq: usize,
    depth: usize,
    fixes: Vec<(usize, f64)>,
    basis: Option<Arc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the lowest bound, then the oldest node, wins.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Solve `model` with the tolerances, gap and limits of `cfg`.
pub fn solve_mip(model: &MilpModel, cfg: &CaseConfig) -> MipSolution {
    solve_mip_with(model, cfg, &MipOptions::default())
}

pub fn solve_mip_with(model: &MilpModel, cfg: &CaseConfig, opts: &MipOptions) -> MipSolution {
    let start = Instant::now();
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let root_bounds: Vec<(f64, f64)> = binaries
        .iter()
        .map(|&j| {
            let v = &model.variables[j];
            (v.lower.max(0.0).ceil(), v.upper.min(1.0).floor())
        })
        .collect();

    let mut lp_opts = opts.lp.clone();
    lp_opts.feasibility_tol = lp_opts.feasibility_tol.min(cfg.feasibility_tol);
    let mut simplex = Simplex::new(model, lp_opts);
    let mut search = Search {
        cfg,
        binaries: &binaries,
        root_bounds: &root_bounds,
        incumbent: None,
        best: f64::INFINITY,
        lp_iterations: 0,
        lp_failures: 0,
        pruned_floor: f64::INFINITY,
    };

    let mut heap = BinaryHeap::new();
    let mut trace = Vec::new();
    let mut seq = 0usize;
    let mut nodes = 0usize;
    let mut root_bound = f64::NEG_INFINITY;
    let mut root_certificate = None;
    let mut stopped = None;
    let mut next = Some(Node {
        bound: f64::NEG_INFINITY,
        seq,
        depth: 0,
        fixes: Vec::new(),
        basis: None,
    });

    loop {
        let node = match next.take() {
            Some(n) => n,
            None => match heap.pop() {
                Some(n) => n,
                None => break,
            },
        };
        let open_min = heap.peek().map_or(f64::INFINITY, |n: &Node| n.bound);
        if search.prunable(node.bound) {
            search.note_pruned(node.bound);
            continue;
        }
        if let Some(limit) = cfg.time_limit {
            if start.elapsed().as_secs_f64() >= limit {
                stopped = Some(MipStatus::TimeLimit);
                heap.push(node);
                break;
            }
        }
        if cfg.node_limit.is_some_and(|limit| nodes >= limit) {
            stopped = Some(MipStatus::GapLimit);
            heap.push(node);
            break;
        }

        trace.push(TraceEntry {
            node: nodes,
            depth: node.depth,
            bound: node.bound.min(open_min).min(search.best).max(root_bound),
            incumbent: search.incumbent.as_ref().map(|_| search.best),
        });
        nodes += 1;

        search.apply_fixes(&mut simplex, &node.fixes);
        let lp = simplex.solve(node.basis.as_deref());
        search.lp_iterations += lp.iterations;

        if node.depth == 0 {
            match lp.status {
                LpStatus::Optimal => root_bound = lp.objective,
                LpStatus::Unbounded => {
                    stopped = Some(MipStatus::Unbounded);
                    break;
                }
                status => {
                    root_certificate = Some(RootCertificate {
                        status,
                        infeasibility: lp.infeasibility.clone(),
                    });
                    if status == LpStatus::IterationLimit {
                        search.lp_failures += 1;
                    }
                    break;
                }
            }
        }
        match lp.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            _ => {
                search.lp_failures += 1;
                continue;
            }
        }

        let bound = lp.objective.max(node.bound);
        if search.prunable(bound) {
            search.note_pruned(bound);
            continue;
        }
        let basis = lp.basis.map(Arc::new);

        let Some((j, value)) = search.most_fractional(&lp.x) else {
            // Integral: polish with the binaries pinned to their rounded values.
            search.try_incumbent(&mut simplex, &node.fixes, &lp.x, basis.as_deref());
            continue;
        };

        if node.depth == 0 {
            search.round_up_heuristic(&mut simplex, &lp.x, basis.as_deref());
        }

        let up_first = value >= 0.5;
        let mut children = [0.0, 1.0].map(|side| {
            let mut fixes = node.fixes.clone();
            fixes.push((j, side));
            seq += 1;
            Node {
                bound,
                seq,
                depth: node.depth + 1,
                fixes,
                basis: basis.clone(),
            }
        });
        if up_first {
            children.swap(0, 1);
        }
        let [first, second] = children;
        heap.push(second);
        next = Some(first);
    }

    let open_min = heap.peek().map_or(f64::INFINITY, |n| n.bound);
    let status = match stopped {
        Some(s) => s,
        None if root_certificate.is_some() => MipStatus::Infeasible,
        None if search.incumbent.is_some() => MipStatus::Optimal,
        None => MipStatus::Infeasible,
    };
    let bound = match status {
        MipStatus::Infeasible => f64::INFINITY,
        MipStatus::Unbounded => f64::NEG_INFINITY,
        _ => open_min.min(search.pruned_floor).min(search.best).max(root_bound),
    };
    MipSolution {
        status,
        objective: search.best,
        incumbent: search.incumbent,
        bound,
        root_bound,
        nodes_explored: nodes,
        lp_iterations: search.lp_iterations,
        wall_time: start.elapsed().as_secs_f64(),
        trace,
        root_certificate,
        lp_failures: search.lp_failures,
    }
}

struct Search<'a> {
    cfg: &'a CaseConfig,
    binaries: &'a [usize],
    root_bounds: &'a [(f64, f64)],
    incumbent: Option<Vec<f64>>,
    best: f64,
    lp_iterations: usize,
    lp_failures: usize,
    /// Lowest bound among nodes discarded by the gap rule.
    pruned_floor: f64,
}

impl Search<'_> {
    fn cutoff(&self) -> f64 {
        self.best - self.cfg.mip_gap * self.best.abs().max(1.0)
    }

    fn prunable(&self, bound: f64) -> bool {
        self.incumbent.is_some() && bound >= self.cutoff()
    }

    fn note_pruned(&mut self, bound: f64) {
        self.pruned_floor = self.pruned_floor.min(bound);
    }

    fn apply_fixes(&self, simplex: &mut Simplex, fixes: &[(usize, f64)]) {
        for (&j, &(lo, hi)) in self.binaries.iter().zip(self.root_bounds) {
            simplex.set_bounds(j, lo, hi);
        }
        for &(j, v) in fixes {
            simplex.set_bounds(j, v, v);
        }
    }

    fn most_fractional(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for &j in self.binaries {
            let frac = (x[j] - x[j].round()).abs();
            if frac > self.cfg.integrality_tol && best.is_none_or(|b| frac > b.2) {
                best = Some((j, x[j], frac));
            }
        }
        best.map(|(j, v, _)| (j, v))
    }

    /// Re-solve with every binary fixed to `round(x)` and keep the result if it improves.
    fn try_incumbent(&mut self, simplex: &mut Simplex, fixes: &[(usize, f64)], x: &[f64], basis: Option<&Basis>) {
        self.apply_fixes(simplex, fixes);
        for &j in self.binaries {
            let v = x[j].round();
            simplex.set_bounds(j, v, v);
        }
        let lp = simplex.solve(basis);
        self.lp_iterations += lp.iterations;
        if lp.status == LpStatus::Optimal && lp.objective < self.best {
            self.best = lp.objective;
            self.incumbent = Some(lp.x);
        }
    }

    /// Round every fractional binary up and polish.
    fn round_up_heuristic(&mut self, simplex: &mut Simplex, x: &[f64], basis: Option<&Basis>) {
        let mut rounded = x.to_vec();
        for &j in self.binaries {
            if (x[j] - x[j].round()).abs() > self.cfg.integrality_tol {
                rounded[j] = 1.0;
            }
        }
        self.try_incumbent(simplex, &[], &rounded, basis);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{ConstraintTag, Relation};

    fn knapsack() -> MilpModel {
        // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut m = MilpModel::new("knap");
        let a = m.add_var("a", VarKind::Binary, 0.0, 1.0, -5.0);
        let b = m.add_var("b", VarKind::Binary, 0.0, 1.0, -4.0);
        let c = m.add_var("c", VarKind::Binary, 0.0, 1.0, -3.0);
        for (row, rhs) in [([2.0, 3.0, 1.0], 5.0), ([4.0, 1.0, 2.0], 11.0), ([3.0, 4.0, 2.0], 8.0)] {
            m.add_constraint("r", ConstraintTag::Custom, vec![(a, row[0]), (b, row[1]), (c, row[2])], Relation::Le, rhs);
        }
        m
    }

    fn brute_force(m: &MilpModel) -> f64 {
        let mut best = f64::INFINITY;
        for mask in 0..8u32 {
            let x: Vec<f64> = (0..3).map(|k| f64::from((mask >> k) & 1)).collect();
            if m.max_violation(&x) == 0.0 {
                best = best.min(m.objective_value(&x));
            }
        }
        best
    }

    #[test]
    fn knapsack_matches_enumeration() {
        let m = knapsack();
        let s = solve_mip(&m, &CaseConfig::default());
        assert_eq!(s.status, MipStatus::Optimal);
        assert!((s.objective - brute_force(&m)).abs() < 1e-9);
        assert!(s.objective >= s.bound - 1e-9);
    }

    #[test]
    fn integral_relaxation_needs_one_node() {
        let mut m = MilpModel::new("integral");
        let a = m.add_var("a", VarKind::Binary, 0.0, 1.0, 1.0);
        let b = m.add_var("b", VarKind::Binary, 0.0, 1.0, 1.0);
        m.add_constraint("cover", ConstraintTag::Custom, vec![(a, 1.0), (b, 1.0)], Relation::Ge, 1.0);
        m.add_constraint("pick", ConstraintTag::Custom, vec![(a, 1.0)], Relation::Ge, 1.0);
        let s = solve_mip(&m, &CaseConfig::default());
        assert_eq!(s.status, MipStatus::Optimal);
        assert_eq!(s.nodes_explored, 1);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_root_carries_certificate() {
        let mut m = MilpModel::new("none");
        let a = m.add_var("a", VarKind::Binary, 0.0, 1.0, 1.0);
        m.add_constraint("big", ConstraintTag::Custom, vec![(a, 1.0)], Relation::Ge, 2.0);
        let s = solve_mip(&m, &CaseConfig::default());
        assert_eq!(s.status, MipStatus::Infeasible);
        let cert = s.root_certificate.unwrap();
        assert_eq!(cert.status, LpStatus::Infeasible);
        assert!(cert.infeasibility.unwrap().sum > 0.5);
    }

    #[test]
    fn integer_infeasible_after_branching() {
        // a + b = 1 and a - b = 0 has only the fractional point (0.5, 0.5).
        let mut m = MilpModel::new("parity");
        let a = m.add_var("a", VarKind::Binary, 0.0, 1.0, 0.0);
        let b = m.add_var("b", VarKind::Binary, 0.0, 1.0, 0.0);
        m.add_constraint("s", ConstraintTag::Custom, vec![(a, 1.0), (b, 1.0)], Relation::Eq, 1.0);
        m.add_constraint("d", ConstraintTag::Custom, vec![(a, 1.0), (b, -1.0)], Relation::Eq, 0.0);
        let s = solve_mip(&m, &CaseConfig::default());
        assert_eq!(s.status, MipStatus::Infeasible);
        assert!(s.root_certificate.is_none());
        assert!(s.nodes_explored >= 3);
    }

    #[test]
    fn node_limit_reports_gap_limit() {
        let cfg = CaseConfig {
            node_limit: Some(1),
            ..CaseConfig::default()
        };
        let s = solve_mip(&knapsack(), &cfg);
        assert_eq!(s.status, MipStatus::GapLimit);
        assert!(s.bound <= s.objective);
    }

    #[test]
    fn trace_bound_is_monotone() {
        let s = solve_mip(&knapsack(), &CaseConfig::default());
        for w in s.trace.windows(2) {
            assert!(w[1].bound >= w[0].bound - 1e-12);
        }
    }
}
