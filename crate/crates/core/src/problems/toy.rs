use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{
    make_game, BargainingGame, CostModel, SharedCost, StateSpace, StateVector,
    DEFAULT_PREFERRED_STATE_TOL,
};
use crate::problems::{transform_cost, MonotoneTransform};

/// `l(x) = (x - c)^T A (x - c)` with `A` symmetric positive semidefinite.
#[derive(Clone, Debug)]
pub struct Quadratic {
    center: Vec<f64>,
    // row-major n x n
    matrix: Vec<f64>,
}

impl Quadratic {
    pub fn new(center: Vec<f64>, matrix: Vec<f64>) -> Result<Self> {
        let n = center.len();
        if matrix.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: matrix.len(),
            });
        }
        Ok(Self { center, matrix })
    }

    /// `scale * ||x - c||^2`
    pub fn isotropic(center: Vec<f64>, scale: f64) -> Self {
        let n = center.len();
        let mut matrix = vec![0.0; n * n];
        for j in 0..n {
            matrix[j * n + j] = scale;
        }
        Self { center, matrix }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl CostModel for Quadratic {
    fn dimension(&self) -> usize {
        self.center.len()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let n = self.center.len();
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let mut total = 0.0;
        for r in 0..n {
            let row = &self.matrix[r * n..(r + 1) * n];
            total += d[r] * row.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        }
        total
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.center.len();
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        (0..n)
            .map(|r| {
                let row = &self.matrix[r * n..(r + 1) * n];
                let col: f64 = (0..n).map(|c| self.matrix[c * n + r] * d[c]).sum();
                row.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() + col
            })
            .collect()
    }

    /// Separable cases: with a positive diagonal matrix the box minimizer is
    /// the clamped center, and with an isotropic one the simplex minimizer is
    /// the projected center.
    fn closed_form_minimizer(&self, space: &StateSpace, _start: &[f64]) -> Option<Vec<f64>> {
        let n = self.center.len();
        let diagonal = (0..n).all(|r| (0..n).all(|c| r == c || self.matrix[r * n + c] == 0.0));
        if !diagonal || (0..n).any(|j| !(self.matrix[j * n + j] > 0.0)) {
            return None;
        }
        match space {
            StateSpace::Box { lower, upper } => Some(
                self.center
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(c, (lo, hi))| c.clamp(*lo, *hi))
                    .collect(),
            ),
            StateSpace::Simplex { .. } if (0..n).all(|j| self.matrix[j * n + j] == self.matrix[0]) => {
                Some(crate::solvers::project_simplex(&self.center))
            }
            StateSpace::Simplex { .. } => None,
        }
    }
}

/// `l(x) = a^T x`
#[derive(Clone, Debug)]
pub struct Linear {
    coeffs: Vec<f64>,
}

impl Linear {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }
}

impl CostModel for Linear {
    fn dimension(&self) -> usize {
        self.coeffs.len()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        self.coeffs.clone()
    }
}

fn example_one_models() -> (SharedCost, SharedCost) {
    (
        Arc::new(Quadratic::isotropic(vec![0.0], 1.0)),
        Arc::new(Quadratic::isotropic(vec![1.0], 1.0)),
    )
}

/// Two agents on `[0, 1]` with costs `x^2` and `(x - 1)^2`, disagreement `[1, 1]`.
pub fn example_one_game(x0: f64) -> Result<BargainingGame> {
    let (first, second) = example_one_models();
    make_game(
        vec![first, second],
        vec![1.0, 1.0],
        StateSpace::uniform_box(1, 0.0, 1.0)?,
        &StateVector::new(vec![x0])?,
        DEFAULT_PREFERRED_STATE_TOL,
    )
}

/// The same game with the first agent's cost squared: `x^4` and `(x - 1)^2`.
pub fn example_one_transformed_game(x0: f64) -> Result<BargainingGame> {
    let (first, second) = example_one_models();
    make_game(
        vec![transform_cost(first, MonotoneTransform::Power(2.0)), second],
        vec![1.0, 1.0],
        StateSpace::uniform_box(1, 0.0, 1.0)?,
        &StateVector::new(vec![x0])?,
        DEFAULT_PREFERRED_STATE_TOL,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::finite_diff_gradient;

    #[test]
    fn asymmetric_matrix_gradient_matches_differences() {
        let q = Quadratic::new(vec![1.0, -2.0], vec![2.0, 0.5, -0.3, 1.0]).unwrap();
        let x = [0.4, 0.7];
        let fd = finite_diff_gradient(&q, &x, 1e-6);
        for (a, b) in q.gradient(&x).iter().zip(&fd) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn transformed_first_agent_is_quartic() {
        let game = example_one_transformed_game(0.5).unwrap();
        for x in [0.0, 0.25, 0.5, 0.9] {
            let v = game.agents()[0].evaluate(&[x]);
            assert!((v - x.powi(4)).abs() < 1e-15);
        }
    }
}
