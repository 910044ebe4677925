//! The four-block signed Kantorovich problem: assembly, exact and entropic
//! solvers, duals, map extraction and monotonicity diagnostics.

mod cost;
mod entropic;
mod map;
mod monotone;
mod plan;
mod problem;
mod simplex;
mod solver;

pub use cost::{fd_hessian_y, Block, CostDescription, CostSpec, CustomPenalty, Penalty};
pub use entropic::{solve_entropic, EntropicOptions};
pub use map::{extract_map, MapEntry, TransportMap};
pub use monotone::{check_cyclical_monotonicity, exhaustive_two_cycles, MonotonicityReport, Violation};
pub use plan::{complementary_slackness, duality_gap, BlockPlan, DualPotentials, GapReport, MarginalReport, SolverMeta};
pub use problem::{build_block_problem, TransportProblem};
pub use simplex::{solve_exact, DEFAULT_CAP};
pub use solver::{build_solver, solver_names, SolverSpec, TransportSolver};
