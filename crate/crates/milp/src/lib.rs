//! Mixed-integer linear programming at desk scale.
//!
//! The crate holds the [`MilpModel`] that every reformulation targets, a
//! bounded revised simplex for the LP relaxation ([`solve_lp`], [`LpSolver`]),
//! a deterministic best-first branch-and-bound ([`solve_milp`]) and
//! bit-stable MPS / LP file export with an adapter for external solvers.

mod bnb;
mod decompose;
mod error;
mod external;
mod factor;
mod model;
mod mps;
mod simplex;

pub use bnb::{solve_milp, MilpOptions, NodeEvent, SolveResult, SolveStatus};
pub use decompose::{components, solve_milp_by_blocks};
pub use error::{LpError, MilpError, ModelError};
pub use external::{read_solution, ExternalSolver, ExternalSolverError};
pub use model::{MilpModel, Row, RowSense, VarId, VarKind, Variable};
pub use mps::{lp_string, mps_string, parse_mps, read_mps, write_lp, write_mps, MpsError};
pub use simplex::{solve_lp, Basis, LpOptions, LpOutcome, LpSolver, LpStatus, VarStatus};

/// Numerical tolerances shared by the LP and MILP solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility of rows and bounds.
    pub feasibility: f64,
    /// Optimality: reduced costs must not be more negative than this.
    pub reduced_cost: f64,
    /// Distance to the nearest integer accepted as integral.
    pub integrality: f64,
    /// Smallest magnitude accepted as a pivot element.
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-7,
            reduced_cost: 1e-9,
            integrality: 1e-6,
            pivot: 1e-9,
        }
    }
}
