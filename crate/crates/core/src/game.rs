//! Domain types shared by every oracle, solver and problem: states, cost
//! models, state spaces and the bargaining game itself.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::{self, OracleMode};
use crate::solvers::project_simplex;

/// Gradient-mapping tolerance used when freezing each agent's preferred state.
pub const DEFAULT_PREFERRED_STATE_TOL: f64 = 1e-8;

/// Iteration budget for the preferred-state search performed by [`make_game`].
pub const PREFERRED_STATE_BUDGET: usize = 200_000;

/// Feasibility slack for simplex membership (non-negativity and unit sum).
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A point of the shared decision space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(index) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { index });
        }
        Ok(Self(coords))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

/// An agent's differentiable cost (negative utility).
///
/// Implementations must be deterministic and free of interior mutability so
/// that games can be shared across threads.
pub trait CostModel: Send + Sync + fmt::Debug {
    fn dimension(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// A minimizer over `space` known in closed form, chosen deterministically
    /// from `start`. Models whose minimizer sits on a kink of the cost (where
    /// descent methods cannot certify a small gradient) should provide this.
    fn closed_form_minimizer(&self, _space: &StateSpace, _start: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

pub type SharedCost = Arc<dyn CostModel>;

/// The feasible set of a game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateSpace {
    /// Coordinatewise bounds; infinite bounds give an unconstrained space.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `{x : x >= 0, sum(x) = 1}`.
    Simplex { dim: usize },
}

impl StateSpace {
    pub fn unbounded(dim: usize) -> Self {
        StateSpace::Box {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if let Some(j) = (0..lower.len()).find(|&j| !(lower[j] <= upper[j])) {
            return Err(Error::InvalidArgument(format!(
                "box bound {j}: lower {} exceeds upper {}",
                lower[j], upper[j]
            )));
        }
        Ok(StateSpace::Box { lower, upper })
    }

    pub fn uniform_box(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::boxed(vec![lower; dim], vec![upper; dim])
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("simplex dimension must be positive".into()));
        }
        Ok(StateSpace::Simplex { dim })
    }

    pub fn dimension(&self) -> usize {
        match self {
            StateSpace::Box { lower, .. } => lower.len(),
            StateSpace::Simplex { dim } => *dim,
        }
    }

    pub fn is_simplex(&self) -> bool {
        matches!(self, StateSpace::Simplex { .. })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dimension() {
            return false;
        }
        match self {
            StateSpace::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi),
            StateSpace::Simplex { .. } => {
                x.iter().all(|v| *v >= -SIMPLEX_TOL)
                    && (x.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
            }
        }
    }

    /// Euclidean projection onto the space.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            StateSpace::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect(),
            StateSpace::Simplex { .. } => project_simplex(x),
        }
    }

    pub(crate) fn check(&self, x: &[f64], what: &str) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        if !self.contains(x) {
            return Err(Error::Infeasible(format!("{what} {x:?}")));
        }
        Ok(())
    }
}

/// A cooperative bargaining game: agents, disagreement penalties, a shared
/// state space and each agent's frozen preferred state.
#[derive(Clone, Debug)]
pub struct BargainingGame {
    agents: Vec<SharedCost>,
    disagreement: Vec<f64>,
    space: StateSpace,
    preferred_states: Vec<StateVector>,
}

/// Builds a game and freezes every agent's preferred state, searched from `x0`.
pub fn make_game(
    models: Vec<SharedCost>,
    disagreement: Vec<f64>,
    space: StateSpace,
    x0: &StateVector,
    preferred_state_tol: f64,
) -> Result<BargainingGame> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("a game needs at least one agent".into()));
    }
    if disagreement.len() != models.len() {
        return Err(Error::DimensionMismatch {
            expected: models.len(),
            got: disagreement.len(),
        });
    }
    let n = space.dimension();
    for model in &models {
        if model.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: model.dimension(),
            });
        }
    }
    space.check(x0, "initial state")?;

    let mut preferred_states = Vec::with_capacity(models.len());
    for (agent, model) in models.iter().enumerate() {
        let state = match model.closed_form_minimizer(&space, x0) {
            Some(candidate) => {
                let residual = oracles::projected_gradient_norm(model.as_ref(), &space, &candidate);
                if !(residual <= preferred_state_tol) {
                    return Err(Error::PreferredStateNotFound {
                        agent,
                        residual,
                        tol: preferred_state_tol,
                        iterations: 0,
                    });
                }
                StateVector::new(candidate)?
            }
            None => oracles::find_preferred_state(
                model.as_ref(),
                &space,
                x0,
                &OracleMode::Exact,
                PREFERRED_STATE_BUDGET,
                preferred_state_tol,
            )
            .map_err(|e| match e {
                Error::PreferredStateNotFound {
                    residual,
                    tol,
                    iterations,
                    ..
                } => Error::PreferredStateNotFound {
                    agent,
                    residual,
                    tol,
                    iterations,
                },
                other => other,
            })?,
        };
        preferred_states.push(state);
    }

    Ok(BargainingGame {
        agents: models,
        disagreement,
        space,
        preferred_states,
    })
}

impl BargainingGame {
    /// Assembles a game from already-known preferred states, skipping the search.
    pub fn from_parts(
        agents: Vec<SharedCost>,
        disagreement: Vec<f64>,
        space: StateSpace,
        preferred_states: Vec<StateVector>,
    ) -> Result<Self> {
        if agents.is_empty() || agents.len() != disagreement.len() || agents.len() != preferred_states.len() {
            return Err(Error::InvalidArgument(
                "agents, disagreement and preferred states must be non-empty and of equal length".into(),
            ));
        }
        let n = space.dimension();
        for (model, state) in agents.iter().zip(&preferred_states) {
            if model.dimension() != n || state.dimension() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: model.dimension().max(state.dimension()),
                });
            }
        }
        Ok(Self {
            agents,
            disagreement,
            space,
            preferred_states,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension()
    }

    pub fn agents(&self) -> &[SharedCost] {
        &self.agents
    }

    pub fn disagreement(&self) -> &[f64] {
        &self.disagreement
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn preferred_states(&self) -> &[StateVector] {
        &self.preferred_states
    }

    pub fn costs(&self, x: &[f64]) -> Vec<f64> {
        self.agents.iter().map(|a| a.evaluate(x)).collect()
    }

    pub fn gradients(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.agents.iter().map(|a| a.gradient(x)).collect()
    }

    /// The same game with agents listed in the order `perm` (agent `k` of the
    /// result is agent `perm[k]` of `self`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_agents();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        Ok(Self {
            agents: perm.iter().map(|&p| self.agents[p].clone()).collect(),
            disagreement: perm.iter().map(|&p| self.disagreement[p]).collect(),
            space: self.space.clone(),
            preferred_states: perm.iter().map(|&p| self.preferred_states[p].clone()).collect(),
        })
    }

    /// Strict individual rationality: `d^i - l^i(x) > 0` for every agent.
    pub fn check_individually_rational(&self, x: &[f64]) -> Result<()> {
        for (agent, (model, d)) in self.agents.iter().zip(&self.disagreement).enumerate() {
            let gap = d - model.evaluate(x);
            if !(gap > 0.0) {
                return Err(Error::IndividualRationalityViolated { agent, gap });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    StepUnderflow,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
            Termination::StepUnderflow => "step_underflow",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub final_state: StateVector,
    /// Iterates sampled every `trajectory_stride` steps, including the start
    /// and the final state. `None` when the stride is zero.
    pub trajectory: Option<Vec<StateVector>>,
    pub final_costs: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub stationarity_residual: f64,
    pub stationarity_weights: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Quadratic;

    fn example_one(x0: f64) -> Result<BargainingGame> {
        make_game(
            vec![Arc::new(Quadratic::isotropic(vec![0.0], 1.0)), Arc::new(Quadratic::isotropic(vec![1.0], 1.0))],
            vec![1.0, 1.0],
            StateSpace::uniform_box(1, 0.0, 1.0)?,
            &StateVector::new(vec![x0])?,
            DEFAULT_PREFERRED_STATE_TOL,
        )
    }

    #[test]
    fn rejects_non_finite_state() {
        assert!(matches!(
            StateVector::new(vec![0.0, f64::NAN]),
            Err(Error::NonFiniteState { index: 1 })
        ));
    }

    #[test]
    fn example_one_preferred_states() {
        let game = example_one(0.3).unwrap();
        assert!(game.preferred_states()[0][0].abs() < 1e-6);
        assert!((game.preferred_states()[1][0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn single_centered_quadratic_prefers_center() {
        let c = vec![0.3, -1.2, 4.0];
        let game = make_game(
            vec![Arc::new(Quadratic::isotropic(c.clone(), 1.0))],
            vec![123.0],
            StateSpace::unbounded(3),
            &StateVector::new(vec![0.0; 3]).unwrap(),
            DEFAULT_PREFERRED_STATE_TOL,
        )
        .unwrap();
        for (a, b) in game.preferred_states()[0].iter().zip(&c) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn construction_errors() {
        let space = StateSpace::uniform_box(1, 0.0, 1.0).unwrap();
        let x0 = StateVector::new(vec![0.5]).unwrap();
        assert!(matches!(
            make_game(vec![], vec![], space.clone(), &x0, 1e-8),
            Err(Error::InvalidArgument(_))
        ));
        let two_d: SharedCost = Arc::new(Quadratic::isotropic(vec![0.0, 0.0], 1.0));
        assert!(matches!(
            make_game(vec![two_d], vec![1.0], space.clone(), &x0, 1e-8),
            Err(Error::DimensionMismatch { .. })
        ));
        let outside = StateVector::new(vec![1.5]).unwrap();
        assert!(matches!(
            make_game(vec![Arc::new(Quadratic::isotropic(vec![0.0], 1.0))], vec![1.0], space, &outside, 1e-8),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn bad_box_bounds() {
        assert!(StateSpace::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(StateSpace::boxed(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn simplex_membership() {
        let s = StateSpace::simplex(3).unwrap();
        assert!(s.contains(&[0.2, 0.3, 0.5]));
        assert!(!s.contains(&[0.2, 0.3, 0.6]));
        assert!(!s.contains(&[-0.1, 0.6, 0.5]));
        let p = s.project(&[2.0, 0.0, 0.0]);
        assert!(s.contains(&p));
    }

    #[test]
    fn permutation_round_trip_preserves_preferred_states() {
        let game = example_one(0.4).unwrap();
        let back = game.permuted(&[1, 0]).unwrap().permuted(&[1, 0]).unwrap();
        assert_eq!(game.preferred_states(), back.preferred_states());
        assert!(game.permuted(&[0, 0]).is_err());
    }

    #[test]
    fn construction_is_deterministic() {
        let a = example_one(0.37).unwrap();
        let b = example_one(0.37).unwrap();
        assert_eq!(a.preferred_states(), b.preferred_states());
    }

    #[test]
    fn individual_rationality_check() {
        let game = example_one(0.5).unwrap();
        assert!(game.check_individually_rational(&[0.5]).is_ok());
        // l1(1) = 1 = d1
        assert!(matches!(
            game.check_individually_rational(&[1.0]),
            Err(Error::IndividualRationalityViolated { agent: 0, .. })
        ));
    }
}
