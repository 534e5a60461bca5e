//! LP and MILP solvers for [`MilpModel`](crate::formulation::MilpModel).

mod bnb;
pub mod factor;
mod lp;

pub use bnb::{solve_mip, solve_mip_with, MipOptions, MipSolution, MipStatus, RootCertificate, TraceEntry};
pub use lp::{solve_lp, solve_lp_with, Basis, Engine, Infeasibility, LpOptions, LpSolution, LpStatus, Simplex};
