//! Certificates and metrics for checking bargaining solutions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{BargainingGame, CostModel, StateVector};
use crate::linalg::{dist, dot, norm, tangent_to_simplex};

/// Optimality tolerance of the least-norm weight search, relative to the
/// largest gradient norm.
pub const CERTIFICATE_SOLVER_TOL: f64 = 1e-12;

/// Residual at or below which a state is reported Pareto stationary.
pub const STATIONARY_RESIDUAL: f64 = 1e-4;

/// Slack added to the ball radius in [`check_bounded`].
pub const BOUNDEDNESS_MARGIN: f64 = 1e-9;

const CERTIFICATE_BUDGET: usize = 10_000;

// Wolfe's stopping gap `|x|^2 - min_j x.v_j`, in units of the largest norm squared.
const DUALITY_GAP_TOL: f64 = 1e-15;

/// Best convex combination of the agents' gradients at a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityCertificate {
    /// `||sum_i beta_i grad l_i(x)||`
    pub residual: f64,
    pub weights: Vec<f64>,
}

/// The gradients the certificate combines: raw model gradients, projected
/// onto the tangent space `{sum(v) = 0}` when the game lives on a simplex.
pub fn certificate_gradients(game: &BargainingGame, x: &[f64]) -> Vec<Vec<f64>> {
    let simplex = game.space().is_simplex();
    game.gradients(x)
        .into_iter()
        .map(|mut g| {
            if simplex {
                tangent_to_simplex(&mut g);
            }
            g
        })
        .collect()
}

/// `||sum_i w_i v_i||`
pub fn combination_norm(vectors: &[Vec<f64>], weights: &[f64]) -> f64 {
    let n = vectors.first().map_or(0, Vec::len);
    let mut sum = vec![0.0; n];
    for (v, w) in vectors.iter().zip(weights) {
        for (s, e) in sum.iter_mut().zip(v) {
            *s += w * e;
        }
    }
    norm(&sum)
}

/// Minimizes `||sum_i beta_i v_i||^2` over the probability simplex with
/// Wolfe's min-norm-point algorithm, which terminates finitely and stays
/// accurate when the vectors are nearly parallel or antiparallel. Vectors are
/// rescaled by the largest norm first so the tolerances are scale-free.
pub fn min_norm_weights(vectors: &[Vec<f64>]) -> Vec<f64> {
    let m = vectors.len();
    if m == 0 {
        return Vec::new();
    }
    let scale = vectors.iter().map(|v| norm(v)).fold(0.0, f64::max);
    if scale == 0.0 || m == 1 {
        return vec![1.0 / m as f64; m];
    }
    let unit: Vec<Vec<f64>> = vectors.iter().map(|v| v.iter().map(|e| e / scale).collect()).collect();
    let dim = unit[0].len();
    let combine = |support: &[usize], w: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for (&i, &b) in support.iter().zip(w) {
            for (xk, vk) in x.iter_mut().zip(&unit[i]) {
                *xk += b * vk;
            }
        }
        x
    };

    let first = (0..m)
        .min_by(|&a, &b| norm(&unit[a]).total_cmp(&norm(&unit[b])))
        .unwrap_or(0);
    let mut support = vec![first];
    let mut lambda = vec![1.0];
    let mut x = unit[first].clone();
    for _ in 0..CERTIFICATE_BUDGET {
        let xx = dot(&x, &x);
        if xx.sqrt() <= CERTIFICATE_SOLVER_TOL {
            break;
        }
        let (j, xv) = (0..m)
            .map(|j| (j, dot(&x, &unit[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, xx));
        if xx - xv <= DUALITY_GAP_TOL || support.contains(&j) {
            break;
        }
        support.push(j);
        lambda.push(0.0);
        loop {
            let mu = affine_minimizer(&unit, &support);
            if mu.iter().all(|&v| v > 0.0) {
                lambda = mu;
                break;
            }
            let theta = lambda
                .iter()
                .zip(&mu)
                .filter(|(_, &u)| u <= 0.0)
                .map(|(&l, &u)| l / (l - u))
                .fold(1.0, f64::min);
            for (l, u) in lambda.iter_mut().zip(&mu) {
                *l += theta * (u - *l);
            }
            let mut k = 0;
            while k < support.len() {
                if lambda[k] <= f64::EPSILON {
                    support.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            if support.len() == 1 {
                lambda = vec![1.0];
                break;
            }
        }
        x = combine(&support, &lambda);
    }
    let mut beta = vec![0.0; m];
    for (&i, &l) in support.iter().zip(&lambda) {
        beta[i] += l;
    }
    beta
}

// Weights summing to one that minimize the norm over the affine hull of the
// support, from the bordered Gram system (least squares when it is singular).
fn affine_minimizer(unit: &[Vec<f64>], support: &[usize]) -> Vec<f64> {
    let k = support.len();
    let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[(r, c)] = dot(&unit[i], &unit[j]);
        }
        a[(r, k)] = 1.0;
        a[(k, r)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;
    let solution = a
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .or_else(|| a.svd(true, true).solve(&rhs, 1e-13).ok())
        .unwrap_or_else(|| {
            let mut s = DVector::<f64>::zeros(k + 1);
            s[k - 1] = 1.0;
            s
        });
    let mu: Vec<f64> = solution.iter().take(k).copied().collect();
    let total: f64 = mu.iter().sum();
    if total.is_finite() && total != 0.0 {
        mu.into_iter().map(|v| v / total).collect()
    } else {
        mu
    }
}

/// Pareto-stationarity certificate at `x`: the least-norm convex combination
/// of the agents' gradients. A zero residual means zero lies in their convex hull.
pub fn stationarity_residual(game: &BargainingGame, x: &[f64]) -> StationarityCertificate {
    let gradients = certificate_gradients(game, x);
    let weights = min_norm_weights(&gradients);
    StationarityCertificate {
        residual: combination_norm(&gradients, &weights),
        weights,
    }
}

/// Gain ratios `(d^i - l^i(x)) / (d^i - l^i(x*_i))`.
pub fn ksbs_ratios(game: &BargainingGame, x: &[f64]) -> Result<Vec<f64>> {
    game.agents()
        .iter()
        .zip(game.disagreement())
        .zip(game.preferred_states())
        .enumerate()
        .map(|(agent, ((model, &d), x_star))| {
            let ideal = model.evaluate(x_star);
            let gap = d - ideal;
            if !(gap > 0.0) {
                return Err(Error::InfeasibleIdeal {
                    agent,
                    disagreement: d,
                    ideal,
                });
            }
            Ok((d - model.evaluate(x)) / gap)
        })
        .collect()
}

/// `max_i r_i - min_i r_i` over the gain ratios.
pub fn ksbs_ratio_spread(game: &BargainingGame, x: &[f64]) -> Result<f64> {
    let r = ksbs_ratios(game, x)?;
    let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

/// `||x_dir - x_comp|| / ||x_dir - x0||`
pub fn relative_error(x_dir: &[f64], x_comp: &[f64], x0: &[f64]) -> Result<f64> {
    if x_dir.len() != x_comp.len() || x_dir.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: x_dir.len(),
            got: if x_comp.len() != x_dir.len() { x_comp.len() } else { x0.len() },
        });
    }
    let denominator = dist(x_dir, x0);
    if denominator == 0.0 {
        return Err(Error::ZeroDenominator("exact solution coincides with the start"));
    }
    Ok(dist(x_dir, x_comp) / denominator)
}

/// Centre and radius of the ball around the preferred-state centroid that
/// contains `x0` and every preferred state.
pub fn bounding_ball(preferred_states: &[StateVector], x0: &[f64]) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut centroid = vec![0.0; n];
    for s in preferred_states {
        for (c, v) in centroid.iter_mut().zip(s.iter()) {
            *c += v;
        }
    }
    let count = preferred_states.len().max(1) as f64;
    for c in centroid.iter_mut() {
        *c /= count;
    }
    let radius = preferred_states
        .iter()
        .map(|s| dist(s, &centroid))
        .fold(dist(x0, &centroid), f64::max);
    (centroid, radius)
}

/// Whether every iterate stays inside [`bounding_ball`] (plus a small margin).
pub fn check_bounded(trajectory: &[StateVector], preferred_states: &[StateVector], x0: &[f64]) -> bool {
    let (centroid, radius) = bounding_ball(preferred_states, x0);
    trajectory
        .iter()
        .all(|x| dist(x, &centroid) <= radius + BOUNDEDNESS_MARGIN)
}

/// Central differences `(l(x + h e_j) - l(x - h e_j)) / 2h`.
pub fn finite_diff_gradient(model: &dyn CostModel, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let up = model.evaluate(&probe);
            probe[j] = x[j] - h;
            let down = model.evaluate(&probe);
            probe[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest coordinatewise `|a - b| / max(1, |b|)`, the comparison used for
/// gradient checks.
pub fn max_relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}
