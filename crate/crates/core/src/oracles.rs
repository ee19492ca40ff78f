//! Information channels between the mediator and an agent: the exact
//! direction oracle, the three-way comparison oracle, a direction estimator
//! built from comparisons, and a preferred-state finder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{CostModel, StateSpace, StateVector};
use crate::linalg::{dist, dot, norm};

/// Gradients (or aggregated probe sums) at or below this norm count as zero.
pub const ZERO_GRAD_TOL: f64 = 1e-12;

/// Two costs closer than this compare as equal.
pub const COMPARISON_EQ_TOL: f64 = 0.0;

/// Comparison-mode preferred-state search stops once its step drops below this.
pub const SEARCH_STEP_UNDERFLOW: f64 = 1e-12;

// Relative cost change treated as rounding noise by the exact descent.
const COST_NOISE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionQueryResult {
    /// Unit norm, or all zeros when `is_zero`.
    pub direction: Vec<f64>,
    pub is_zero: bool,
    /// Comparison queries spent producing this answer (0 for the exact oracle).
    pub queries: usize,
}

impl DirectionQueryResult {
    pub fn zero(dim: usize, queries: usize) -> Self {
        Self {
            direction: vec![0.0; dim],
            is_zero: true,
            queries,
        }
    }

    fn normalized(v: Vec<f64>, queries: usize) -> Self {
        let len = norm(&v);
        if len <= ZERO_GRAD_TOL {
            return Self::zero(v.len(), queries);
        }
        Self {
            direction: v.into_iter().map(|e| e / len).collect(),
            is_zero: false,
            queries,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ComparisonVerdict {
    /// The proposed state is preferred.
    Better,
    Indifferent,
    Worse,
}

impl ComparisonVerdict {
    pub fn value(self) -> i8 {
        match self {
            ComparisonVerdict::Better => 1,
            ComparisonVerdict::Indifferent => 0,
            ComparisonVerdict::Worse => -1,
        }
    }

    fn flipped(self) -> Self {
        match self {
            ComparisonVerdict::Better => ComparisonVerdict::Worse,
            ComparisonVerdict::Indifferent => ComparisonVerdict::Indifferent,
            ComparisonVerdict::Worse => ComparisonVerdict::Better,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub queries_per_call: usize,
    /// Probe radius relative to `max(1, ||x||)`.
    pub smoothing_radius: f64,
    pub noise_flip_prob: f64,
    pub rng_seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            queries_per_call: 100,
            smoothing_radius: 1e-3,
            noise_flip_prob: 0.0,
            rng_seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn new(queries_per_call: usize, rng_seed: u64) -> Self {
        Self {
            queries_per_call,
            rng_seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.queries_per_call == 0 {
            return Err(Error::InvalidArgument("queries_per_call must be at least 1".into()));
        }
        if !(self.smoothing_radius > 0.0) || !self.smoothing_radius.is_finite() {
            return Err(Error::InvalidArgument("smoothing_radius must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.noise_flip_prob) {
            return Err(Error::InvalidArgument("noise_flip_prob must lie in [0, 0.5)".into()));
        }
        Ok(())
    }

    /// The same configuration with a seed derived from `parts`.
    pub fn reseeded(&self, parts: &[u64]) -> Self {
        Self {
            rng_seed: derive_seed(self.rng_seed, parts),
            ..self.clone()
        }
    }
}

/// Where an agent's preferred direction comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum OracleMode {
    /// The normalized negative gradient.
    Exact,
    /// Sign-aggregated comparison probes.
    Comparison(EstimatorConfig),
}

impl OracleMode {
    pub fn label(&self) -> &'static str {
        match self {
            OracleMode::Exact => "exact",
            OracleMode::Comparison(_) => "comparison",
        }
    }

    /// Direction for `agent` at `iteration`; comparison seeds are derived
    /// from both so every query stream is distinct and reproducible.
    pub fn query(
        &self,
        model: &dyn CostModel,
        x: &[f64],
        x_star: &[f64],
        iteration: u64,
        agent: u64,
    ) -> Result<DirectionQueryResult> {
        match self {
            OracleMode::Exact => exact_direction(model, x, x_star),
            OracleMode::Comparison(cfg) => estimate_direction(model, x, &cfg.reseeded(&[iteration, agent])),
        }
    }
}

/// SplitMix64 finalizer folded over `parts`.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, p| mix(acc ^ mix(*p)))
}

fn checked_gradient(model: &dyn CostModel, x: &[f64]) -> Result<Vec<f64>> {
    let g = model.gradient(x);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteOracle { what: "gradient" });
    }
    Ok(g)
}

fn checked_cost(model: &dyn CostModel, x: &[f64]) -> Result<f64> {
    let v = model.evaluate(x);
    if !v.is_finite() {
        return Err(Error::NonFiniteOracle { what: "cost" });
    }
    Ok(v)
}

fn check_dim(model: &dyn CostModel, x: &[f64]) -> Result<()> {
    if x.len() != model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Most preferred direction `-grad l(x) / ||grad l(x)||`, zero at the
/// preferred state or wherever the gradient vanishes.
pub fn exact_direction(model: &dyn CostModel, x: &[f64], x_star: &[f64]) -> Result<DirectionQueryResult> {
    check_dim(model, x)?;
    if x == x_star {
        return Ok(DirectionQueryResult::zero(x.len(), 0));
    }
    let g = checked_gradient(model, x)?;
    Ok(DirectionQueryResult::normalized(g.into_iter().map(|v| -v).collect(), 0))
}

fn verdict_from_costs(current: f64, proposed: f64) -> ComparisonVerdict {
    if (proposed - current).abs() <= COMPARISON_EQ_TOL {
        ComparisonVerdict::Indifferent
    } else if proposed < current {
        ComparisonVerdict::Better
    } else {
        ComparisonVerdict::Worse
    }
}

fn noisy<R: Rng + ?Sized>(verdict: ComparisonVerdict, noise_flip_prob: f64, rng: &mut R) -> ComparisonVerdict {
    if noise_flip_prob > 0.0 && verdict != ComparisonVerdict::Indifferent && rng.random::<f64>() < noise_flip_prob {
        verdict.flipped()
    } else {
        verdict
    }
}

/// Asks whether `y` is preferred to `x`. Non-indifferent answers are flipped
/// independently with probability `noise_flip_prob`.
pub fn compare<R: Rng + ?Sized>(
    model: &dyn CostModel,
    x: &[f64],
    y: &[f64],
    noise_flip_prob: f64,
    rng: &mut R,
) -> Result<ComparisonVerdict> {
    check_dim(model, x)?;
    check_dim(model, y)?;
    let verdict = verdict_from_costs(checked_cost(model, x)?, checked_cost(model, y)?);
    Ok(noisy(verdict, noise_flip_prob, rng))
}

fn unit_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 0.0 {
            return v.into_iter().map(|e| e / len).collect();
        }
    }
}

/// Estimates the most preferred direction from `Q` comparisons against
/// random probes `x + eps * u`: preferred probes add `u`, dispreferred
/// probes subtract it.
pub fn estimate_direction(model: &dyn CostModel, x: &[f64], cfg: &EstimatorConfig) -> Result<DirectionQueryResult> {
    cfg.validate()?;
    check_dim(model, x)?;
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let radius = cfg.smoothing_radius * norm(x).max(1.0);
    // Cost at x is the agent's private reference; every comparison reuses it.
    let current = checked_cost(model, x)?;
    let mut sum = vec![0.0; n];
    let mut probe = vec![0.0; n];
    for _ in 0..cfg.queries_per_call {
        let u = unit_sphere(n, &mut rng);
        for j in 0..n {
            probe[j] = x[j] + radius * u[j];
        }
        let verdict = noisy(
            verdict_from_costs(current, checked_cost(model, &probe)?),
            cfg.noise_flip_prob,
            &mut rng,
        );
        let s = f64::from(verdict.value());
        if s != 0.0 {
            for j in 0..n {
                sum[j] += s * u[j];
            }
        }
    }
    Ok(DirectionQueryResult::normalized(sum, cfg.queries_per_call))
}

/// `||x - P(x - grad l(x))||`, zero exactly at constrained stationary points.
pub fn projected_gradient_norm(model: &dyn CostModel, space: &StateSpace, x: &[f64]) -> f64 {
    let g = model.gradient(x);
    let stepped: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
    dist(x, &space.project(&stepped))
}

/// Minimizes a single agent's cost over `space` starting from `x0`.
///
/// Exact mode runs projected gradient descent with backtracking and returns
/// the first iterate whose gradient-mapping norm is at most `tol`. Comparison
/// mode accepts a step along the estimated direction only when the agent
/// prefers it, halving the step otherwise, and returns once the step
/// underflows (or the budget runs out).
pub fn find_preferred_state(
    model: &dyn CostModel,
    space: &StateSpace,
    x0: &[f64],
    mode: &OracleMode,
    budget: usize,
    tol: f64,
) -> Result<StateVector> {
    check_dim(model, x0)?;
    space.check(x0, "search start")?;
    match mode {
        OracleMode::Exact => descend_exact(model, space, x0, budget, tol),
        OracleMode::Comparison(cfg) => descend_by_comparison(model, space, x0, cfg, budget),
    }
}

fn descend_exact(model: &dyn CostModel, space: &StateSpace, x0: &[f64], budget: usize, tol: f64) -> Result<StateVector> {
    let mut x = x0.to_vec();
    let mut step = 1.0;
    let mut residual = f64::INFINITY;
    for iteration in 0..budget {
        let g = checked_gradient(model, &x)?;
        let unit: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
        residual = dist(&x, &space.project(&unit));
        if residual <= tol {
            return StateVector::new(x);
        }
        let f = checked_cost(model, &x)?;
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let y = space.project(&trial);
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let model_decrease = dot(&g, &d) + dot(&d, &d) / (2.0 * step);
            let fy = checked_cost(model, &y)?;
            // Near the minimum the decrease drops below the rounding of f; there
            // the change is taken from the trapezoid rule on the gradients,
            // which is exact for quadratics.
            let change = if (fy - f).abs() <= COST_NOISE * f.abs() {
                let gy = checked_gradient(model, &y)?;
                0.5 * (dot(&g, &d) + dot(&gy, &d))
            } else {
                fy - f
            };
            if change <= model_decrease {
                x = y;
                step = (step * 2.0).min(1e12);
                break;
            }
            step *= 0.5;
            if step < 1e-30 {
                return Err(Error::PreferredStateNotFound {
                    agent: 0,
                    residual,
                    tol,
                    iterations: iteration,
                });
            }
        }
    }
    Err(Error::PreferredStateNotFound {
        agent: 0,
        residual,
        tol,
        iterations: budget,
    })
}

fn descend_by_comparison(
    model: &dyn CostModel,
    space: &StateSpace,
    x0: &[f64],
    cfg: &EstimatorConfig,
    budget: usize,
) -> Result<StateVector> {
    cfg.validate()?;
    let mut x = x0.to_vec();
    let mut step = 0.1 * norm(x0).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &[u64::MAX]));
    for iteration in 0..budget {
        if step < SEARCH_STEP_UNDERFLOW {
            break;
        }
        let est = estimate_direction(model, &x, &cfg.reseeded(&[iteration as u64]))?;
        if est.is_zero {
            step *= 0.5;
            continue;
        }
        let trial: Vec<f64> = x.iter().zip(&est.direction).map(|(a, d)| a + step * d).collect();
        let y = space.project(&trial);
        if compare(model, &x, &y, cfg.noise_flip_prob, &mut rng)? == ComparisonVerdict::Better {
            x = y;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    StateVector::new(x)
}
