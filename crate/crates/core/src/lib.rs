//! Cooperative bargaining with direction oracles.
//!
//! A mediator that can only ask each agent for its most preferred direction
//! (or answer pairwise comparisons) steers a shared state toward a Pareto
//! stationary point by weighting every agent's direction with that agent's
//! distance from its own preferred state. The crate also ships the classical
//! utility-based baselines (Nash and Kalai-Smorodinsky), the naive equal-weight
//! direction sum, the certificates used to check solutions, and the two
//! experiment families (formation assignment and portfolio allocation).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod game;
pub mod oracles;
pub mod problems;
pub mod solvers;

mod linalg;

pub use error::{Error, PriceError, Result};
pub use game::{
    make_game, BargainingGame, CostModel, SharedCost, SolveReport, StateSpace, StateVector,
    Termination, DEFAULT_PREFERRED_STATE_TOL,
};
pub use oracles::{
    compare, estimate_direction, exact_direction, find_preferred_state, ComparisonVerdict,
    DirectionQueryResult, EstimatorConfig, OracleMode,
};
pub use solvers::{
    dibs_step, naive_step, nbs_step, project_simplex, solve, solve_ksbs, step_schedule_value,
    Method, ScheduleKind, SolverConfig, StepSchedule,
};
