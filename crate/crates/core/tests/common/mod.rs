#![allow(dead_code)]

use std::sync::Arc;

use bargain::problems::Quadratic;
use bargain::{make_game, BargainingGame, SharedCost, StateSpace, StateVector, DEFAULT_PREFERRED_STATE_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `R(theta)^T diag(l1, l2) R(theta)`, row-major.
pub fn rotated_diag(theta: f64, l1: f64, l2: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    vec![
        c * c * l1 + s * s * l2,
        c * s * (l1 - l2),
        c * s * (l1 - l2),
        s * s * l1 + c * c * l2,
    ]
}

/// A seeded game of 2 or 3 strongly convex quadratics on the plane, with
/// curvatures in `[0.1, 0.5]`, centres in `[-1, 1]^2` and a start in `[-1, 1]^2`.
pub fn strongly_convex_game(seed: u64) -> (BargainingGame, StateVector) {
    let mut r = rng(seed);
    let n_agents = r.random_range(2..=3);
    let models: Vec<SharedCost> = (0..n_agents)
        .map(|_| {
            let center = vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            let a = rotated_diag(
                r.random_range(0.0..std::f64::consts::PI),
                r.random_range(0.1..0.5),
                r.random_range(0.1..0.5),
            );
            Arc::new(Quadratic::new(center, a).unwrap()) as SharedCost
        })
        .collect();
    let x0 = StateVector::new(vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).unwrap();
    let game = make_game(
        models,
        vec![10.0; n_agents],
        StateSpace::unbounded(2),
        &x0,
        DEFAULT_PREFERRED_STATE_TOL,
    )
    .unwrap();
    (game, x0)
}

/// Least residual over a grid of step `h` on the simplex (2 or 3 vectors).
pub fn grid_min_residual(vectors: &[Vec<f64>], h: f64) -> f64 {
    let steps = (1.0 / h).round() as usize;
    let combo = |w: &[f64]| -> f64 {
        let n = vectors[0].len();
        (0..n)
            .map(|j| vectors.iter().zip(w).map(|(v, b)| b * v[j]).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut best = f64::INFINITY;
    match vectors.len() {
        1 => best = combo(&[1.0]),
        2 => {
            for a in 0..=steps {
                let b0 = a as f64 / steps as f64;
                best = best.min(combo(&[b0, 1.0 - b0]));
            }
        }
        3 => {
            for a in 0..=steps {
                for b in 0..=steps - a {
                    let b0 = a as f64 / steps as f64;
                    let b1 = b as f64 / steps as f64;
                    best = best.min(combo(&[b0, b1, (1.0 - b0 - b1).max(0.0)]));
                }
            }
        }
        _ => panic!("grid oracle supports at most three vectors"),
    }
    best
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
