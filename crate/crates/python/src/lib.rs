//! Python bindings for the `bargain` crate.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use bargain::analysis;
use bargain::experiments::{self, ExperimentConfig};
use bargain::problems::{
    example_one_game, example_one_transformed_game, FormationParams, MonotoneTransform, Quadratic, TransformSpec,
};
use bargain::{
    make_game, BargainingGame, EstimatorConfig, Method, OracleMode, SharedCost, SolveReport, SolverConfig,
    StateSpace, StateVector, StepSchedule, DEFAULT_PREFERRED_STATE_TOL,
};

fn to_py(e: bargain::Error) -> PyErr {
    match e {
        bargain::Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        bargain::Error::BisectionStalled(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn state(x: Vec<f64>) -> PyResult<StateVector> {
    StateVector::new(x).map_err(to_py)
}

fn transform_named(name: &str) -> PyResult<MonotoneTransform> {
    match name {
        "signed-square" => Ok(MonotoneTransform::SignedSquare),
        "cubic-plus-linear" => Ok(MonotoneTransform::CubicPlusLinear),
        other => match other.strip_prefix("power:").map(str::parse::<f64>) {
            Some(Ok(p)) if p > 0.0 => Ok(MonotoneTransform::Power(p)),
            _ => Err(PyValueError::new_err(format!(
                "unknown transform {other:?}; use signed-square, cubic-plus-linear or power:<p>"
            ))),
        },
    }
}

/// A bargaining game with frozen preferred states.
#[pyclass(frozen, name = "Game", module = "bargain_py")]
struct PyGame {
    inner: BargainingGame,
}

#[pymethods]
impl PyGame {
    /// Agents with costs `scale_i * ||x - c_i||^2` on a box.
    #[staticmethod]
    #[pyo3(signature = (centers, disagreement, lower, upper, x0, scales=None))]
    fn quadratics(
        centers: Vec<Vec<f64>>,
        disagreement: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        x0: Vec<f64>,
        scales: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let scales = scales.unwrap_or_else(|| vec![1.0; centers.len()]);
        if scales.len() != centers.len() {
            return Err(PyValueError::new_err("scales and centers differ in length"));
        }
        let models: Vec<SharedCost> = centers
            .into_iter()
            .zip(scales)
            .map(|(c, s)| Arc::new(Quadratic::isotropic(c, s)) as SharedCost)
            .collect();
        let space = StateSpace::boxed(lower, upper).map_err(to_py)?;
        let inner = make_game(models, disagreement, space, &state(x0)?, DEFAULT_PREFERRED_STATE_TOL).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// The two-agent game `[x^2, (x - 1)^2]` on `[0, 1]`, or with the first
    /// cost squared when `transformed` is true.
    #[staticmethod]
    #[pyo3(signature = (x0=0.5, transformed=false))]
    fn example_one(x0: f64, transformed: bool) -> PyResult<Self> {
        let inner = if transformed {
            example_one_transformed_game(x0)
        } else {
            example_one_game(x0)
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Formation assignment with default parameters; `transform` is applied
    /// to the odd agents. Returns the game and its circular start.
    #[staticmethod]
    #[pyo3(signature = (n_agents=10, transform=None))]
    fn formation(n_agents: usize, transform: Option<&str>) -> PyResult<(Self, Vec<f64>)> {
        let params = FormationParams {
            n_agents,
            ..FormationParams::default()
        };
        let spec = transform
            .map(|t| transform_named(t).map(|t| TransformSpec::odd_agents(t, n_agents)))
            .transpose()?;
        let (inner, x0) = experiments::formation_game(&params, spec.as_ref()).map_err(to_py)?;
        Ok((Self { inner }, x0.into_inner()))
    }

    #[getter]
    fn num_agents(&self) -> usize {
        self.inner.num_agents()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn disagreement(&self) -> Vec<f64> {
        self.inner.disagreement().to_vec()
    }

    #[getter]
    fn preferred_states(&self) -> Vec<Vec<f64>> {
        self.inner.preferred_states().iter().map(|s| s.to_vec()).collect()
    }

    fn costs(&self, x: Vec<f64>) -> Vec<f64> {
        self.inner.costs(&x)
    }

    /// The same game with agent `k` taken from position `perm[k]`.
    fn permuted(&self, perm: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.permuted(&perm).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Game(agents={}, dimension={})", self.inner.num_agents(), self.inner.dimension())
    }
}

/// Outcome of a solver run.
#[pyclass(frozen, name = "SolveReport", module = "bargain_py")]
struct PyReport {
    inner: SolveReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn final_state(&self) -> Vec<f64> {
        self.inner.final_state.to_vec()
    }

    #[getter]
    fn final_costs(&self) -> Vec<f64> {
        self.inner.final_costs.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn termination(&self) -> &'static str {
        self.inner.termination.as_str()
    }

    #[getter]
    fn stationarity_residual(&self) -> f64 {
        self.inner.stationarity_residual
    }

    #[getter]
    fn stationarity_weights(&self) -> Vec<f64> {
        self.inner.stationarity_weights.clone()
    }

    #[getter]
    fn trajectory(&self) -> Option<Vec<Vec<f64>>> {
        self.inner
            .trajectory
            .as_ref()
            .map(|t| t.iter().map(|s| s.to_vec()).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveReport(termination={:?}, iterations={}, final_state={:?})",
            self.inner.termination.as_str(),
            self.inner.iterations,
            self.inner.final_state.as_slice()
        )
    }
}

fn oracle(queries: Option<usize>, seed: u64) -> OracleMode {
    match queries {
        None => OracleMode::Exact,
        Some(q) => OracleMode::Comparison(EstimatorConfig::new(q, seed)),
    }
}

/// Runs `method` ("dibs", "naive", "nbs" or "ksbs") from `x0`.
#[pyfunction]
#[pyo3(signature = (game, method, x0, *, schedule="constant", alpha0=0.1, max_iters=5000, tol=1e-12, queries=None, seed=0, trajectory_stride=0))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    game: &PyGame,
    method: &str,
    x0: Vec<f64>,
    schedule: &str,
    alpha0: f64,
    max_iters: usize,
    tol: f64,
    queries: Option<usize>,
    seed: u64,
    trajectory_stride: usize,
) -> PyResult<PyReport> {
    let method: Method = method.parse().map_err(to_py)?;
    let schedule = match schedule {
        "harmonic" => StepSchedule::harmonic(alpha0),
        "constant" => StepSchedule::constant(alpha0),
        "shrink-on-violation" => StepSchedule::shrink_on_violation(alpha0),
        other => return Err(PyValueError::new_err(format!("unknown schedule {other:?}"))),
    };
    let cfg = SolverConfig {
        schedule,
        max_iters,
        update_norm_tol: tol,
        oracle_mode: oracle(queries, seed),
        trajectory_stride,
        ..SolverConfig::default()
    };
    let x0 = state(x0)?;
    let inner = py
        .detach(|| bargain::solve(&game.inner, method, &x0, &cfg))
        .map_err(to_py)?;
    Ok(PyReport { inner })
}

/// One DiBS iteration with exact (or, given `queries`, comparison-estimated) directions.
#[pyfunction]
#[pyo3(signature = (game, x, alpha, queries=None, seed=0))]
fn dibs_step(game: &PyGame, x: Vec<f64>, alpha: f64, queries: Option<usize>, seed: u64) -> PyResult<Vec<f64>> {
    bargain::dibs_step(&game.inner, &state(x)?, alpha, &oracle(queries, seed))
        .map(StateVector::into_inner)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (game, x, alpha, queries=None, seed=0))]
fn naive_step(game: &PyGame, x: Vec<f64>, alpha: f64, queries: Option<usize>, seed: u64) -> PyResult<Vec<f64>> {
    bargain::naive_step(&game.inner, &state(x)?, alpha, &oracle(queries, seed))
        .map(StateVector::into_inner)
        .map_err(to_py)
}

#[pyfunction]
fn nbs_step(game: &PyGame, x: Vec<f64>, alpha: f64) -> PyResult<Vec<f64>> {
    bargain::nbs_step(&game.inner, &state(x)?, alpha)
        .map(StateVector::into_inner)
        .map_err(to_py)
}

#[pyfunction]
fn project_simplex(v: Vec<f64>) -> Vec<f64> {
    bargain::project_simplex(&v)
}

/// `(residual, weights)` of the least-norm convex combination of gradients at `x`.
#[pyfunction]
fn stationarity_residual(game: &PyGame, x: Vec<f64>) -> (f64, Vec<f64>) {
    let c = analysis::stationarity_residual(&game.inner, &x);
    (c.residual, c.weights)
}

#[pyfunction]
fn ksbs_ratio_spread(game: &PyGame, x: Vec<f64>) -> PyResult<f64> {
    analysis::ksbs_ratio_spread(&game.inner, &x).map_err(to_py)
}

#[pyfunction]
fn relative_error(x_dir: Vec<f64>, x_comp: Vec<f64>, x0: Vec<f64>) -> PyResult<f64> {
    analysis::relative_error(&x_dir, &x_comp, &x0).map_err(to_py)
}

/// Runs an experiment from TOML text and returns one JSON string per record.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<Vec<String>> {
    let cfg = ExperimentConfig::from_toml_str(config).map_err(to_py)?;
    let records = py.detach(|| experiments::run(&cfg)).map_err(to_py)?;
    Ok(records.iter().map(experiments::to_json_line).collect())
}

#[pymodule]
fn bargain_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGame>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(dibs_step, m)?)?;
    m.add_function(wrap_pyfunction!(naive_step, m)?)?;
    m.add_function(wrap_pyfunction!(nbs_step, m)?)?;
    m.add_function(wrap_pyfunction!(project_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(stationarity_residual, m)?)?;
    m.add_function(wrap_pyfunction!(ksbs_ratio_spread, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
