//! Bargaining procedures: the distance-weighted direction method, the naive
//! equal-weight direction sum, the Nash product gradient iteration, and the
//! Kalai-Smorodinsky ratio equalizer.

mod ksbs;
mod projection;
mod schedule;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ksbs::{solve_ksbs, DEFAULT_RATIO_TOL};
pub use projection::project_simplex;
pub use schedule::{step_schedule_value, ScheduleKind, StepSchedule};

use crate::analysis;
use crate::error::{Error, Result};
use crate::game::{BargainingGame, SolveReport, StateVector, Termination};
use crate::linalg::{dist, norm, scaled, tangent_to_simplex};
use crate::oracles::OracleMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dibs,
    Naive,
    Nbs,
    Ksbs,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Dibs => "dibs",
            Method::Naive => "naive",
            Method::Nbs => "nbs",
            Method::Ksbs => "ksbs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dibs" => Ok(Method::Dibs),
            "naive" => Ok(Method::Naive),
            "nbs" => Ok(Method::Nbs),
            "ksbs" => Ok(Method::Ksbs),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub schedule: StepSchedule,
    pub max_iters: usize,
    pub update_norm_tol: f64,
    pub oracle_mode: OracleMode,
    /// Record every `trajectory_stride`-th iterate; 0 disables recording.
    pub trajectory_stride: usize,
    /// KSBS only: admissible spread between the largest and smallest ratio.
    pub ratio_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::harmonic(0.5),
            max_iters: 5000,
            update_norm_tol: 1e-10,
            oracle_mode: OracleMode::Exact,
            trajectory_stride: 0,
            ratio_tol: DEFAULT_RATIO_TOL,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.update_norm_tol > 0.0) {
            return Err(Error::InvalidArgument("update_norm_tol must be positive".into()));
        }
        if !(self.ratio_tol > 0.0) {
            return Err(Error::InvalidArgument("ratio_tol must be positive".into()));
        }
        if let OracleMode::Comparison(cfg) = &self.oracle_mode {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// Sums per-agent vectors in an order that does not depend on how the agents
/// are listed: each coordinate is accumulated over its sorted values.
fn order_free_sum(contributions: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut column = Vec::with_capacity(contributions.len());
    (0..dim)
        .map(|j| {
            column.clear();
            column.extend(contributions.iter().map(|c| c[j]));
            column.sort_by(f64::total_cmp);
            column.iter().sum()
        })
        .collect()
}

fn direction_sum(
    game: &BargainingGame,
    x: &[f64],
    oracle: &OracleMode,
    iteration: u64,
    distance_weighted: bool,
) -> Result<Vec<f64>> {
    let simplex = game.space().is_simplex();
    let mut contributions = Vec::with_capacity(game.num_agents());
    for (agent, (model, x_star)) in game.agents().iter().zip(game.preferred_states()).enumerate() {
        let answer = oracle.query(model.as_ref(), x, x_star, iteration, agent as u64)?;
        let weight = if distance_weighted { dist(x, x_star) } else { 1.0 };
        let mut c = scaled(weight, &answer.direction);
        if simplex {
            tangent_to_simplex(&mut c);
        }
        contributions.push(c);
    }
    Ok(order_free_sum(&contributions, x.len()))
}

/// `sum_i ||x - x*_i|| D_i(x)`, the unscaled DiBS update.
pub fn dibs_update(game: &BargainingGame, x: &[f64], oracle: &OracleMode, iteration: u64) -> Result<Vec<f64>> {
    direction_sum(game, x, oracle, iteration, true)
}

/// `sum_i D_i(x)`
pub fn naive_update(game: &BargainingGame, x: &[f64], oracle: &OracleMode, iteration: u64) -> Result<Vec<f64>> {
    direction_sum(game, x, oracle, iteration, false)
}

/// `-sum_i grad l_i(x) / (d_i - l_i(x))`; requires strict individual rationality at `x`.
pub fn nbs_update(game: &BargainingGame, x: &[f64]) -> Result<Vec<f64>> {
    let simplex = game.space().is_simplex();
    let mut contributions = Vec::with_capacity(game.num_agents());
    for (agent, (model, d)) in game.agents().iter().zip(game.disagreement()).enumerate() {
        let gap = d - model.evaluate(x);
        if !(gap > 0.0) {
            return Err(Error::IndividualRationalityViolated { agent, gap });
        }
        let g = model.gradient(x);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOracle { what: "gradient" });
        }
        let mut c = scaled(-1.0 / gap, &g);
        if simplex {
            tangent_to_simplex(&mut c);
        }
        contributions.push(c);
    }
    Ok(order_free_sum(&contributions, x.len()))
}

fn take_step(game: &BargainingGame, x: &[f64], update: &[f64], alpha: f64) -> Result<StateVector> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("step size must be positive".into()));
    }
    let candidate: Vec<f64> = x.iter().zip(update).map(|(a, u)| a + alpha * u).collect();
    StateVector::new(game.space().project(&candidate))
}

/// One DiBS iteration `P(x + alpha * sum_i ||x - x*_i|| D_i(x))`.
pub fn dibs_step(game: &BargainingGame, x: &StateVector, alpha: f64, oracle: &OracleMode) -> Result<StateVector> {
    let u = dibs_update(game, x, oracle, 0)?;
    take_step(game, x, &u, alpha)
}

/// One naive iteration `P(x + alpha * sum_i D_i(x))`.
pub fn naive_step(game: &BargainingGame, x: &StateVector, alpha: f64, oracle: &OracleMode) -> Result<StateVector> {
    let u = naive_update(game, x, oracle, 0)?;
    take_step(game, x, &u, alpha)
}

/// One NBS iteration `P(x - alpha * sum_i grad l_i(x) / (d_i - l_i(x)))`.
pub fn nbs_step(game: &BargainingGame, x: &StateVector, alpha: f64) -> Result<StateVector> {
    let u = nbs_update(game, x)?;
    take_step(game, x, &u, alpha)
}

pub(crate) fn finish(
    game: &BargainingGame,
    x: Vec<f64>,
    trajectory: Option<Vec<StateVector>>,
    iterations: usize,
    termination: Termination,
) -> Result<SolveReport> {
    let certificate = analysis::stationarity_residual(game, &x);
    let final_costs = game.costs(&x);
    Ok(SolveReport {
        final_state: StateVector::new(x)?,
        trajectory,
        final_costs,
        iterations,
        termination,
        stationarity_residual: certificate.residual,
        stationarity_weights: certificate.weights,
    })
}

/// Runs `method` from `x0` until the update norm drops to
/// `update_norm_tol`, the iteration budget is spent, or the step underflows.
///
/// A zero update ends the run as converged. With the shrink-on-violation
/// schedule an infeasible raw step is retried with a smaller step; otherwise
/// it is projected. NBS also retries (with any schedule) whenever the next
/// iterate would violate individual rationality, and fails once the step
/// underflows in that situation.
pub fn solve(game: &BargainingGame, method: Method, x0: &StateVector, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    game.space().check(x0, "initial state")?;
    if method == Method::Ksbs {
        return solve_ksbs(game, x0, cfg);
    }
    if method == Method::Nbs {
        game.check_individually_rational(x0)?;
    }

    let space = game.space();
    let mut schedule = cfg.schedule.clone();
    let mut x = x0.to_vec();
    let mut trajectory = (cfg.trajectory_stride > 0).then(|| vec![x0.clone()]);
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;

    'outer: for k in 0..cfg.max_iters {
        let update = match method {
            Method::Dibs => dibs_update(game, &x, &cfg.oracle_mode, k as u64)?,
            Method::Naive => naive_update(game, &x, &cfg.oracle_mode, k as u64)?,
            Method::Nbs => nbs_update(game, &x)?,
            Method::Ksbs => unreachable!(),
        };
        if norm(&update) == 0.0 {
            termination = Termination::Converged;
            break;
        }

        let next = loop {
            if schedule.underflowed(k) {
                if method == Method::Nbs {
                    // report why the step collapsed
                    let alpha = schedule.value(k);
                    let raw: Vec<f64> = x.iter().zip(&update).map(|(a, u)| a + alpha * u).collect();
                    game.check_individually_rational(&space.project(&raw))?;
                }
                termination = Termination::StepUnderflow;
                break 'outer;
            }
            let alpha = schedule.value(k);
            let raw: Vec<f64> = x.iter().zip(&update).map(|(a, u)| a + alpha * u).collect();
            if schedule.kind == ScheduleKind::ShrinkOnViolation && !space.contains(&raw) {
                schedule.shrink();
                continue;
            }
            let candidate = space.project(&raw);
            if method == Method::Nbs && game.check_individually_rational(&candidate).is_err() {
                schedule.shrink();
                continue;
            }
            break candidate;
        };

        iterations = k + 1;
        if dist(&next, &x) <= cfg.update_norm_tol {
            termination = Termination::Converged;
            break;
        }
        x = next;
        if let Some(t) = trajectory.as_mut() {
            if iterations % cfg.trajectory_stride == 0 {
                t.push(StateVector::new(x.clone())?);
            }
        }
    }

    if let Some(t) = trajectory.as_mut() {
        if t.last().map(|s| s.as_slice()) != Some(x.as_slice()) {
            t.push(StateVector::new(x.clone())?);
        }
    }
    finish(game, x, trajectory, iterations, termination)
}
