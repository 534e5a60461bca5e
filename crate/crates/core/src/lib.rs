//! Optimal phase allocation for radial three-phase distribution feeders.
//!
//! The crate builds a mixed-integer linear program over the linearized
//! three-phase DistFlow model, solves it with its own simplex and
//! branch-and-bound, and can certify small instances by enumeration.
//!
//! ```
//! use phasealloc::{fixtures, formulation::CaseConfig, solve_case};
//!
//! let net = fixtures::ieee13();
//! let cfg = CaseConfig::case(1).with_band(net.voltage_band());
//! let run = solve_case(&net, &cfg).unwrap();
//! assert!(run.solution.unwrap().assignment.equals_base(&net));
//! ```

pub mod analysis;
pub mod fixtures;
pub mod formulation;
pub mod lin3distflow;
pub mod network;
pub mod oracle;
pub mod solver;
pub mod synthetic;

pub use analysis::{magnitude_metric, reassignment, unbalance_metric, ReassignmentTable, UnbalanceReport};
pub use formulation::{
    build_model, fix_assignment, Assignment, CaseConfig, FormulationError, MilpModel, Solution,
};
pub use lin3distflow::{build_sensitivity, power_flow, Injections, PhasorState, SensitivityMatrices};
pub use network::{parse_feeder, validate, Bus, FeederData, Line, Network, NetworkError, Phase, PhaseSet};
pub use oracle::{certify, enumerate_assignments, Certificate};
pub use solver::{solve_lp, solve_mip, LpSolution, LpStatus, MipSolution, MipStatus};

/// Build, solve and decode one case.
pub fn solve_case(net: &Network, cfg: &CaseConfig) -> Result<CaseRun, FormulationError> {
    let model = build_model(net, cfg)?;
    let mip = solve_mip(&model, cfg);
    let solution = match &mip.incumbent {
        Some(x) => Some(Solution::from_values(net, &model, x)?),
        None => None,
    };
    Ok(CaseRun { model, mip, solution })
}

/// Everything produced by [`solve_case`].
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub model: MilpModel,
    pub mip: MipSolution,
    /// Decoded incumbent, when the search found one.
    pub solution: Option<Solution>,
}
