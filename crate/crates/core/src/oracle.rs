//! Exhaustive certification on small feeders: every phase-consistent
//! assignment is fixed in turn and its LP solved.

use thiserror::Error;

use crate::formulation::{build_model, fix_assignment, Assignment, CaseConfig, FormulationError};
use crate::network::{Network, PhaseSet};
use crate::solver::{Basis, LpOptions, LpStatus, Simplex};

/// Largest search space the oracle accepts, as `Π (2^|P_n| - 1)`.
pub const ENUMERATION_LIMIT: u64 = 1_000_000;

/// Objective gap within which two assignments count as tied.
pub const TIE_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("enumeration refused: {count} candidate combinations exceed the limit of {limit}")]
    TooLarge { count: u64, limit: u64 },
    #[error("no phase assignment admits a feasible operating point")]
    Infeasible,
    #[error(transparent)]
    Formulation(#[from] FormulationError),
}

/// Candidate phase subsets per bus and the number of consistent combinations.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentSpace {
    pub candidates: Vec<Vec<PhaseSet>>,
    pub total_count: u64,
}

/// The guard product `Π (2^|P_n| - 1)`, saturating.
pub fn search_space_bound(net: &Network) -> u64 {
    net.buses()
        .iter()
        .fold(1u64, |acc, b| acc.saturating_mul((1u64 << b.phases.len()) - 1))
}

fn candidates(net: &Network, bus: usize) -> Vec<PhaseSet> {
    let b = net.bus(bus);
    if b.is_source {
        vec![b.phases]
    } else {
        b.phases.nonempty_subsets().collect()
    }
}

/// Candidate subsets and the consistent-combination count (tree recursion
/// over the parent's chosen set).
pub fn assignment_space(net: &Network) -> AssignmentSpace {
    let cands: Vec<Vec<PhaseSet>> = (0..net.bus_count()).map(|b| candidates(net, b)).collect();
    // ways[b][mask]: completions of the subtree under b given b uses `mask`.
    let mut ways = vec![[0u64; 8]; net.bus_count()];
    for &b in net.topological_order().iter().rev() {
        for set in &cands[b] {
            let mut w = 1u64;
            for &c in net.child_indices(b) {
                let sub: u64 = cands[c]
                    .iter()
                    .filter(|s| s.is_subset(*set))
                    .map(|s| ways[c][s.mask() as usize])
                    .fold(0u64, u64::saturating_add);
                w = w.saturating_mul(sub);
            }
            ways[b][set.mask() as usize] = w;
        }
    }
    let src = net.source();
    let total = cands[src].iter().map(|s| ways[src][s.mask() as usize]).sum();
    AssignmentSpace {
        candidates: cands,
        total_count: total,
    }
}

/// Iterator over all consistent assignments in a fixed order: buses in
/// topological order, each cycling through its candidate subsets in mask order.
pub struct Assignments {
    order: Vec<usize>,
    parent_pos: Vec<Option<usize>>,
    cands: Vec<Vec<PhaseSet>>,
    choice: Vec<usize>,
    started: bool,
    done: bool,
    bus_count: usize,
}

const UNSET: usize = usize::MAX;

impl Assignments {
    fn advance(&mut self, mut k: usize) -> bool {
        loop {
            let allowed = match self.parent_pos[k] {
                Some(p) => self.cands[p][self.choice[p]],
                None => PhaseSet::ABC,
            };
            let from = if self.choice[k] == UNSET { 0 } else { self.choice[k] + 1 };
            match (from..self.cands[k].len()).find(|&i| self.cands[k][i].is_subset(allowed)) {
                Some(i) => {
                    self.choice[k] = i;
                    if k + 1 == self.order.len() {
                        return true;
                    }
                    k += 1;
                    self.choice[k] = UNSET;
                }
                None => {
                    self.choice[k] = UNSET;
                    if k == 0 {
                        return false;
                    }
                    k -= 1;
                }
            }
        }
    }
}

impl Iterator for Assignments {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        if self.done {
            return None;
        }
        let ok = if self.started {
            self.advance(self.order.len() - 1)
        } else {
            self.started = true;
            self.advance(0)
        };
        if !ok {
            self.done = true;
            return None;
        }
        let mut sets = vec![PhaseSet::EMPTY; self.bus_count];
        for (k, &b) in self.order.iter().enumerate() {
            sets[b] = self.cands[k][self.choice[k]];
        }
        Some(Assignment { sets })
    }
}

/// Every phase-consistent assignment with a nonempty phase set per bus.
pub fn enumerate_assignments(net: &Network) -> Result<Assignments, OracleError> {
    let count = search_space_bound(net);
    if count > ENUMERATION_LIMIT {
        return Err(OracleError::TooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let order = net.topological_order().to_vec();
    let mut pos = vec![0; net.bus_count()];
    for (k, &b) in order.iter().enumerate() {
        pos[b] = k;
    }
    Ok(Assignments {
        parent_pos: order.iter().map(|&b| net.parent(b).map(|p| pos[p])).collect(),
        cands: order.iter().map(|&b| candidates(net, b)).collect(),
        choice: vec![UNSET; order.len()],
        started: false,
        done: false,
        bus_count: net.bus_count(),
        order,
    })
}

/// Result of exhaustive certification.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub best_objective: f64,
    /// Every assignment within [`TIE_TOL`] of the optimum, sorted.
    pub best_assignments: Vec<Assignment>,
    pub evaluated: u64,
    pub feasible: u64,
}

impl Certificate {
    pub fn contains(&self, a: &Assignment) -> bool {
        self.best_assignments.binary_search(a).is_ok()
    }
}

/// Global optimum by enumeration, with the LP of each assignment solved exactly.
pub fn certify(net: &Network, cfg: &CaseConfig) -> Result<Certificate, OracleError> {
    certify_with(net, cfg, TIE_TOL)
}

pub fn certify_with(net: &Network, cfg: &CaseConfig, tie_tol: f64) -> Result<Certificate, OracleError> {
    let assignments = enumerate_assignments(net)?;
    let model = build_model(net, cfg)?;
    let xi: Vec<usize> = model.binaries().collect();
    let opts = LpOptions {
        feasibility_tol: cfg.feasibility_tol.min(1e-9),
        ..LpOptions::default()
    };
    let mut simplex = Simplex::new(&model.relaxed(), opts);
    let mut basis: Option<Basis> = None;
    let mut scored: Vec<(f64, Assignment)> = Vec::new();
    let mut evaluated = 0;
    for a in assignments {
        evaluated += 1;
        let fixed = fix_assignment(&model, net, &a)?;
        for &j in &xi {
            simplex.set_bounds(j, fixed.variables[j].lower, fixed.variables[j].upper);
        }
        let mut lp = simplex.solve(basis.as_ref());
        if lp.status != LpStatus::Optimal && lp.status != LpStatus::Infeasible {
            lp = simplex.solve(None);
        }
        if lp.status == LpStatus::Optimal {
            basis = lp.basis.clone();
            scored.push((lp.objective, a));
        }
    }
    let feasible = scored.len() as u64;
    let best = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(OracleError::Infeasible);
    }
    let mut best_assignments: Vec<Assignment> = scored
        .into_iter()
        .filter(|(obj, _)| *obj <= best + tie_tol)
        .map(|(_, a)| a)
        .collect();
    best_assignments.sort();
    Ok(Certificate {
        best_objective: best,
        best_assignments,
        evaluated,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Bus, FeederData, Line};

    fn z() -> [[f64; 3]; 3] {
        [[0.01, 0.0, 0.0], [0.0, 0.01, 0.0], [0.0, 0.0, 0.01]]
    }

    fn chain_abc() -> Network {
        let mut d = FeederData::new("c", Bus::new("s", PhaseSet::ABC), 100.0, 1.0);
        d.buses.push(Bus::new("n1", PhaseSet::ABC));
        d.lines.push(Line {
            from: "s".into(),
            to: "n1".into(),
            r: z(),
            x: z(),
        });
        Network::new(d).unwrap()
    }

    #[test]
    fn single_phase_bus_has_one_candidate() {
        let mut d = FeederData::new("c", Bus::new("s", PhaseSet::ABC), 100.0, 1.0);
        d.buses.push(Bus::new("n1", "b".parse().unwrap()));
        let mut r = [[0.0; 3]; 3];
        r[1][1] = 0.01;
        d.lines.push(Line {
            from: "s".into(),
            to: "n1".into(),
            r,
            x: r,
        });
        let net = Network::new(d).unwrap();
        assert_eq!(assignment_space(&net).candidates[1], vec!["b".parse::<PhaseSet>().unwrap()]);
        assert_eq!(enumerate_assignments(&net).unwrap().count(), 1);
    }

    #[test]
    fn two_bus_chain_has_seven_assignments() {
        let net = chain_abc();
        let all: Vec<Assignment> = enumerate_assignments(&net).unwrap().collect();
        assert_eq!(all.len(), 7);
        assert_eq!(assignment_space(&net).total_count, 7);
        assert!(all.iter().all(|a| a.check(&net).is_ok()));
    }

    #[test]
    fn zero_load_optimum_is_one_phase_per_bus() {
        let net = chain_abc();
        let cert = certify(&net, &CaseConfig::default()).unwrap();
        // Source keeps three phases; the unloaded bus needs one.
        assert!((cert.best_objective - 4.0).abs() < 1e-9);
        assert_eq!(cert.best_assignments.len(), 3);
    }

    #[test]
    fn guard_refuses_large_spaces() {
        let mut d = FeederData::new("big", Bus::new("s", PhaseSet::ABC), 100.0, 1.0);
        for k in 0..8 {
            d.buses.push(Bus::new(format!("n{k}"), PhaseSet::ABC));
            d.lines.push(Line {
                from: if k == 0 { "s".into() } else { format!("n{}", k - 1) },
                to: format!("n{k}"),
                r: z(),
                x: z(),
            });
        }
        let net = Network::new(d).unwrap();
        match enumerate_assignments(&net) {
            Err(OracleError::TooLarge { count, .. }) => assert_eq!(count, 7u64.pow(9)),
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("guard did not trigger"),
        }
    }
}
