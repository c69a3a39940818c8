//! Exact solution of the plan LP.

mod linalg;
pub mod plan;
pub mod simplex;

pub use linalg::solve_dense;
pub use plan::{
    build_lp, solve_plan, solve_plan_lp, verify_plan, PlanLp, PlanReport, PlanSolution, PlanStatus,
    SOLVER_TOL,
};
pub use simplex::{kkt_report, solve_lp, KktReport, LpProblem, LpSolution, LpStatus};
