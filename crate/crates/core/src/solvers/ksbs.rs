use crate::error::{Error, Result};
use crate::game::{BargainingGame, SolveReport, StateVector, Termination};
use crate::linalg::{dist, dot};

use super::{finish, SolverConfig};

/// Default admissible spread between the largest and smallest gain ratio.
pub const DEFAULT_RATIO_TOL: f64 = 1e-6;

const INNER_BUDGET: usize = 20_000;
const MIN_STEP: f64 = 1e-30;

/// Ideal gaps `d^i - l^i(x*_i)`, all strictly positive.
fn ideal_gaps(game: &BargainingGame) -> Result<Vec<f64>> {
    game.agents()
        .iter()
        .zip(game.disagreement())
        .zip(game.preferred_states())
        .enumerate()
        .map(|(agent, ((model, &d), x_star))| {
            let ideal = model.evaluate(x_star);
            if d - ideal > 0.0 {
                Ok(d - ideal)
            } else {
                Err(Error::InfeasibleIdeal {
                    agent,
                    disagreement: d,
                    ideal,
                })
            }
        })
        .collect()
}

fn ratios(game: &BargainingGame, gaps: &[f64], x: &[f64]) -> Vec<f64> {
    game.agents()
        .iter()
        .zip(game.disagreement())
        .zip(gaps)
        .map(|((model, d), gap)| (d - model.evaluate(x)) / gap)
        .collect()
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Penalty on ratios outside `[lo, hi]`: `sum max(0, lo - r)^2 + max(0, r - hi)^2`.
struct BandPenalty<'a> {
    game: &'a BargainingGame,
    gaps: &'a [f64],
    lo: f64,
    hi: f64,
}

impl BandPenalty<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        ratios(self.game, self.gaps, x)
            .iter()
            .map(|&r| (self.lo - r).max(0.0).powi(2) + (r - self.hi).max(0.0).powi(2))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let r = ratios(self.game, self.gaps, x);
        for (i, model) in self.game.agents().iter().enumerate() {
            // d r_i / dx = -grad l_i / gap_i
            let coef = -2.0 * (self.lo - r[i]).max(0.0) + 2.0 * (r[i] - self.hi).max(0.0);
            if coef != 0.0 {
                let scale = coef / self.gaps[i];
                for (gj, lj) in g.iter_mut().zip(model.gradient(x)) {
                    *gj -= scale * lj;
                }
            }
        }
        g
    }

    /// Projected gradient descent with backtracking; stops once the penalty
    /// reaches `target` or no further progress is possible.
    fn minimize(&self, start: &[f64], target: f64, iterations: &mut usize) -> (Vec<f64>, f64) {
        let space = self.game.space();
        let mut x = start.to_vec();
        let mut f = self.value(&x);
        let mut step = 1.0;
        for _ in 0..INNER_BUDGET {
            if f <= target {
                break;
            }
            *iterations += 1;
            let g = self.gradient(&x);
            let mut moved = false;
            while step >= MIN_STEP {
                let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
                let y = space.project(&trial);
                let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
                let fy = self.value(&y);
                if fy < f && fy <= f + dot(&g, &d) + dot(&d, &d) / (2.0 * step) {
                    moved = dist(&x, &y) > 0.0;
                    x = y;
                    f = fy;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (x, f)
    }
}

/// Kalai-Smorodinsky solution: the state maximizing the smallest gain ratio
/// `(d^i - l^i(x)) / (d^i - l^i(x*_i))`, found by bisection on the ratio level
/// with a penalized feasibility solve at every level, followed by a polish
/// that pulls all ratios into a band of width `ratio_tol / 2`.
pub fn solve_ksbs(game: &BargainingGame, x0: &StateVector, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    game.space().check(x0, "initial state")?;
    let gaps = ideal_gaps(game)?;
    game.check_individually_rational(x0)?;
    let tol = cfg.ratio_tol;
    let mut trajectory = (cfg.trajectory_stride > 0).then(|| vec![x0.clone()]);

    // Some agent's ideal may already be everyone's ideal.
    for x_star in game.preferred_states() {
        let r = ratios(game, &gaps, x_star);
        if min_of(&r) >= 1.0 - tol / 2.0 && max_of(&r) - min_of(&r) <= tol {
            if let Some(t) = trajectory.as_mut() {
                t.push(x_star.clone());
            }
            return finish(game, x_star.to_vec(), trajectory, 0, Termination::Converged);
        }
    }

    let slack = tol / 8.0;
    let mut iterations = 0;
    let mut best = x0.to_vec();
    let mut lo = min_of(&ratios(game, &gaps, &best));
    let mut hi = 1.0;
    let mut round = 0usize;
    while hi - lo > tol / 4.0 {
        let mid = 0.5 * (lo + hi);
        let penalty = BandPenalty {
            game,
            gaps: &gaps,
            lo: mid,
            hi: f64::INFINITY,
        };
        let (x, _) = penalty.minimize(&best, slack * slack, &mut iterations);
        let reached = min_of(&ratios(game, &gaps, &x));
        if reached >= mid - slack {
            lo = reached.max(lo).min(hi);
            best = x;
        } else {
            hi = mid;
        }
        round += 1;
        if let Some(t) = trajectory.as_mut() {
            if round.is_multiple_of(cfg.trajectory_stride) {
                t.push(StateVector::new(best.clone())?);
            }
        }
    }

    let band = BandPenalty {
        game,
        gaps: &gaps,
        lo: lo - slack,
        hi: lo - slack + tol / 2.0,
    };
    let (x, _) = band.minimize(&best, 0.0, &mut iterations);
    let r = ratios(game, &gaps, &x);
    let spread = max_of(&r) - min_of(&r);
    if !(spread <= tol) {
        return Err(Error::BisectionStalled(format!(
            "ratio spread {spread:e} exceeds {tol:e} at level {lo}"
        )));
    }
    if let Some(t) = trajectory.as_mut() {
        if t.last().map(|s| s.as_slice()) != Some(x.as_slice()) {
            t.push(StateVector::new(x.clone())?);
        }
    }
    finish(game, x, trajectory, iterations, Termination::Converged)
}
