//! Planar formation assignment: agents are drawn to a common center while
//! same-parity agents cohere and cross-parity agents keep their distance.
//!
//! State layout: `[x_0, y_0, x_1, y_1, ...]`, two coordinates per agent.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{CostModel, SharedCost, StateSpace, StateVector};

/// Pair terms and the center term have undefined gradients at zero distance;
/// below this distance their gradient contribution is zero.
pub const SINGULAR_DISTANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormationParams {
    pub n_agents: usize,
    pub center: [f64; 2],
    pub a: f64,
    pub b: f64,
    pub alpha_same: f64,
    pub alpha_cross: f64,
    pub beta_same: f64,
    pub beta_cross: f64,
    pub init_radius: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Default for FormationParams {
    fn default() -> Self {
        Self {
            n_agents: 10,
            center: [5.0, 5.0],
            a: 10.0,
            b: 0.01,
            alpha_same: 1.0,
            alpha_cross: 0.1,
            beta_same: 3.0,
            beta_cross: 0.9,
            init_radius: 3.0,
            lower: 0.0,
            upper: 10.0,
        }
    }
}

impl FormationParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.a,
            self.b,
            self.alpha_same,
            self.alpha_cross,
            self.beta_same,
            self.beta_cross,
            self.init_radius,
        ];
        if self.n_agents == 0 || positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument(
                "formation parameters must be positive with at least one agent".into(),
            ));
        }
        if !(self.beta_same > self.alpha_same && self.beta_cross > self.alpha_cross) {
            return Err(Error::InvalidArgument(
                "beta must exceed alpha for both same- and cross-parity pairs".into(),
            ));
        }
        if !(self.lower < self.upper) {
            return Err(Error::InvalidArgument("empty formation box".into()));
        }
        Ok(())
    }

    pub fn weights(&self, i: usize, j: usize) -> (f64, f64) {
        if (i + j).is_multiple_of(2) {
            (self.alpha_same, self.beta_same)
        } else {
            (self.alpha_cross, self.beta_cross)
        }
    }

    pub fn space(&self) -> Result<StateSpace> {
        StateSpace::uniform_box(2 * self.n_agents, self.lower, self.upper)
    }
}

/// Distance maximizing `e^{-alpha d} - e^{-beta d}`.
pub fn pair_equilibrium_distance(alpha: f64, beta: f64) -> f64 {
    (beta / alpha).ln() / (beta - alpha)
}

#[derive(Clone, Debug)]
pub struct FormationCost {
    params: Arc<FormationParams>,
    agent: usize,
}

pub fn formation_cost(params: &FormationParams, agent: usize) -> Result<FormationCost> {
    params.validate()?;
    if agent >= params.n_agents {
        return Err(Error::InvalidArgument(format!(
            "agent {agent} out of range for {} agents",
            params.n_agents
        )));
    }
    Ok(FormationCost {
        params: Arc::new(params.clone()),
        agent,
    })
}

pub fn formation_models(params: &FormationParams) -> Result<Vec<SharedCost>> {
    (0..params.n_agents)
        .map(|i| formation_cost(params, i).map(|m| Arc::new(m) as SharedCost))
        .collect()
}

/// Agents evenly spaced on a circle around the center, the first at angle 0.
pub fn formation_initial_state(params: &FormationParams) -> Result<StateVector> {
    let n = params.n_agents;
    let mut x = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = 2.0 * PI * k as f64 / n as f64;
        x.push(params.center[0] + params.init_radius * theta.cos());
        x.push(params.center[1] + params.init_radius * theta.sin());
    }
    StateVector::new(x)
}

fn pos(x: &[f64], k: usize) -> [f64; 2] {
    [x[2 * k], x[2 * k + 1]]
}

fn length(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

impl CostModel for FormationCost {
    fn dimension(&self) -> usize {
        2 * self.params.n_agents
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let p = &*self.params;
        let i = self.agent;
        let xi = pos(x, i);
        let r = length([xi[0] - p.center[0], xi[1] - p.center[1]]);
        let mut cost = -p.a * (-p.b * r).exp();
        for j in (0..p.n_agents).filter(|&j| j != i) {
            let xj = pos(x, j);
            let d = length([xi[0] - xj[0], xi[1] - xj[1]]);
            let (alpha, beta) = p.weights(i, j);
            cost -= (-alpha * d).exp() - (-beta * d).exp();
        }
        cost
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let p = &*self.params;
        let i = self.agent;
        let mut grad = vec![0.0; x.len()];
        let xi = pos(x, i);

        let rel = [xi[0] - p.center[0], xi[1] - p.center[1]];
        let r = length(rel);
        if r >= SINGULAR_DISTANCE {
            let s = p.a * p.b * (-p.b * r).exp() / r;
            grad[2 * i] += s * rel[0];
            grad[2 * i + 1] += s * rel[1];
        }

        for j in (0..p.n_agents).filter(|&j| j != i) {
            let xj = pos(x, j);
            let rel = [xi[0] - xj[0], xi[1] - xj[1]];
            let d = length(rel);
            if d < SINGULAR_DISTANCE {
                continue;
            }
            let (alpha, beta) = p.weights(i, j);
            // d/dd of -(e^{-alpha d} - e^{-beta d})
            let s = (alpha * (-alpha * d).exp() - beta * (-beta * d).exp()) / d;
            grad[2 * i] += s * rel[0];
            grad[2 * i + 1] += s * rel[1];
            grad[2 * j] -= s * rel[0];
            grad[2 * j + 1] -= s * rel[1];
        }
        grad
    }

    /// The agent itself at the center and every other agent at its pair
    /// equilibrium distance, along the ray from the center through its
    /// position in `start`.
    fn closed_form_minimizer(&self, space: &StateSpace, start: &[f64]) -> Option<Vec<f64>> {
        let p = &*self.params;
        if space.dimension() != self.dimension() || start.len() != self.dimension() {
            return None;
        }
        let i = self.agent;
        let mut x = vec![0.0; self.dimension()];
        x[2 * i] = p.center[0];
        x[2 * i + 1] = p.center[1];
        for j in (0..p.n_agents).filter(|&j| j != i) {
            let sj = pos(start, j);
            let mut dir = [sj[0] - p.center[0], sj[1] - p.center[1]];
            let len = length(dir);
            if len < SINGULAR_DISTANCE {
                let theta = 2.0 * PI * j as f64 / p.n_agents as f64;
                dir = [theta.cos(), theta.sin()];
            } else {
                dir = [dir[0] / len, dir[1] / len];
            }
            let (alpha, beta) = p.weights(i, j);
            let d = pair_equilibrium_distance(alpha, beta);
            x[2 * j] = p.center[0] + d * dir[0];
            x[2 * j + 1] = p.center[1] + d * dir[1];
        }
        Some(space.project(&x))
    }
}
