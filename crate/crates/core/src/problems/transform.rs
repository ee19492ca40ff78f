use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::game::{CostModel, SharedCost, StateSpace};

/// A strictly increasing, nonaffine rescaling of a cost value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "p", rename_all = "kebab-case")]
pub enum MonotoneTransform {
    /// `g(l) = sign(l) * l^2`
    SignedSquare,
    /// `g(l) = sign(l) * |l|^p`, `p > 0`. Strictly increasing everywhere; on
    /// `l >= 0` it is the plain power `l^p`.
    Power(f64),
    /// `g(l) = l^3 + l`
    CubicPlusLinear,
}

impl MonotoneTransform {
    pub fn apply(&self, l: f64) -> f64 {
        match *self {
            MonotoneTransform::SignedSquare => l.signum() * l * l,
            MonotoneTransform::Power(p) => {
                if p == 2.0 {
                    l.signum() * l * l
                } else {
                    l.signum() * l.abs().powf(p)
                }
            }
            MonotoneTransform::CubicPlusLinear => l * l * l + l,
        }
    }

    pub fn derivative(&self, l: f64) -> f64 {
        match *self {
            MonotoneTransform::SignedSquare => 2.0 * l.abs(),
            MonotoneTransform::Power(p) => p * l.abs().powf(p - 1.0),
            MonotoneTransform::CubicPlusLinear => 3.0 * l * l + 1.0,
        }
    }
}

/// `g(l(x))` with gradient `g'(l(x)) * grad l(x)`.
#[derive(Clone, Debug)]
pub struct TransformedCost {
    inner: SharedCost,
    transform: MonotoneTransform,
}

impl TransformedCost {
    pub fn inner(&self) -> &SharedCost {
        &self.inner
    }

    pub fn transform(&self) -> MonotoneTransform {
        self.transform
    }
}

impl CostModel for TransformedCost {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.transform.apply(self.inner.evaluate(x))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let scale = self.transform.derivative(self.inner.evaluate(x));
        self.inner.gradient(x).into_iter().map(|g| scale * g).collect()
    }

    // Strictly increasing transforms keep the argmin.
    fn closed_form_minimizer(&self, space: &StateSpace, start: &[f64]) -> Option<Vec<f64>> {
        self.inner.closed_form_minimizer(space, start)
    }
}

pub fn transform_cost(model: SharedCost, transform: MonotoneTransform) -> SharedCost {
    Arc::new(TransformedCost {
        inner: model,
        transform,
    })
}

/// A transform together with the agents (0-based) it is applied to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub transform: MonotoneTransform,
    pub agents: Vec<usize>,
}

impl TransformSpec {
    /// Agents with odd 1-based index, i.e. 0-based indices 0, 2, 4, ...
    pub fn odd_agents(transform: MonotoneTransform, n_agents: usize) -> Self {
        Self {
            transform,
            agents: (0..n_agents).step_by(2).collect(),
        }
    }

    pub fn apply(&self, models: &[SharedCost]) -> Vec<SharedCost> {
        models
            .iter()
            .enumerate()
            .map(|(i, m)| {
                if self.agents.contains(&i) {
                    transform_cost(m.clone(), self.transform)
                } else {
                    m.clone()
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Quadratic;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL: [MonotoneTransform; 4] = [
        MonotoneTransform::SignedSquare,
        MonotoneTransform::Power(2.0),
        MonotoneTransform::Power(3.5),
        MonotoneTransform::CubicPlusLinear,
    ];

    #[test]
    fn signed_square_of_square() {
        let m = transform_cost(
            Arc::new(Quadratic::isotropic(vec![0.0], 1.0)),
            MonotoneTransform::SignedSquare,
        );
        assert_eq!(m.evaluate(&[0.5]), 0.0625);
        assert_eq!(m.gradient(&[0.5]), vec![0.5]);
    }

    #[test]
    fn transforms_are_strictly_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in ALL {
            for _ in 0..200 {
                let l: f64 = rng.random_range(-20.0..20.0);
                if l == 0.0 {
                    continue;
                }
                assert!(t.derivative(l) > 0.0, "{t:?} at {l}");
                assert!(t.apply(l + 1e-3) > t.apply(l));
            }
        }
    }

    #[test]
    fn normalized_gradient_is_unchanged_in_one_dimension() {
        let base: SharedCost = Arc::new(Quadratic::isotropic(vec![0.3], 2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in ALL {
            let m = transform_cost(base.clone(), t);
            for _ in 0..100 {
                let x = [rng.random_range(-3.0..3.0)];
                let (a, b) = (base.gradient(&x)[0], m.gradient(&x)[0]);
                if a != 0.0 {
                    assert_eq!(a / a.abs(), b / b.abs());
                }
            }
        }
    }

    #[test]
    fn odd_agent_selection() {
        assert_eq!(TransformSpec::odd_agents(MonotoneTransform::SignedSquare, 5).agents, vec![0, 2, 4]);
    }
}
