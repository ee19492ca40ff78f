//! Acceptance gate: one PASS/FAIL line per criterion, each with its own
//! time budget. Exits nonzero if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- <substring>`.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bargain::analysis::{
    certificate_gradients, check_bounded, finite_diff_gradient, stationarity_residual,
};
use bargain::experiments::{
    formation_game, run_formation, run_portfolio, run_toy, summarize, Experiment, ExperimentConfig, ResultRecord,
};
use bargain::problems::{
    estimate_profile, formation_models, markowitz_cost, synthesize_prices, transform_cost, FormationParams,
    MonotoneTransform, Quadratic, TransformSpec, Window,
};
use bargain::solvers::{dibs_update, nbs_update};
use bargain::{
    dibs_step, estimate_direction, make_game, solve, CostModel, EstimatorConfig, Method, OracleMode, SharedCost,
    SolverConfig, StateSpace, StateVector, StepSchedule, Termination, DEFAULT_PREFERRED_STATE_TOL,
};
use common::{cosine, grid_min_residual, median, rng, strongly_convex_game};
use rand::Rng;
use rand_distr::StandardNormal;

const TOY_DIBS_TOL: f64 = 1e-6;
const TOY_BASELINE_TOL: f64 = 1e-4;
const NAIVE_TOL: f64 = 1e-9;
const SENSITIVITY_GAP: f64 = 0.02;
const STATIONARY_RESIDUAL: f64 = 1e-4;
const GRID_STEP: f64 = 1e-3;
const GRID_TOL: f64 = 1e-3;
const FORMATION_UPDATE_TOL: f64 = 1e-4;
const FORMATION_INVARIANCE_TOL: f64 = 1e-6;
const FORMATION_NBS_GAP: f64 = 0.1;
const PORTFOLIO_MEDIAN_LIMIT: f64 = 1.0;
const FD_STEP: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-5;
const ESTIMATOR_COSINE: f64 = 0.9;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: bargain::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn toy_records() -> Result<Vec<ResultRecord>, String> {
    let mut cfg = ExperimentConfig::new(Experiment::Toy);
    cfg.seed = Some(7);
    cfg.n_scenarios = 10;
    lib(run_toy(&cfg))
}

fn worst(records: &[ResultRecord], variant: &str, method: Method, target: impl Fn(&ResultRecord) -> f64) -> f64 {
    records
        .iter()
        .filter(|r| r.variant == variant && r.method == method)
        .map(|r| (r.final_state[0] - target(r)).abs())
        .fold(0.0, f64::max)
}

fn toy_suite() -> Outcome {
    let records = toy_records()?;
    let starts = records.iter().filter(|r| r.variant == "plain" && r.method == Method::Dibs).count();
    ensure(starts == 10, || format!("{starts} starts"))?;
    let dibs = worst(&records, "plain", Method::Dibs, |_| 0.5);
    let nbs = worst(&records, "plain", Method::Nbs, |_| 0.5);
    let ksbs = worst(&records, "plain", Method::Ksbs, |_| 0.5);
    let naive = worst(&records, "plain", Method::Naive, |r| r.x0[0]);
    ensure(dibs <= TOY_DIBS_TOL, || format!("dibs off by {dibs:e}"))?;
    ensure(nbs <= TOY_BASELINE_TOL, || format!("nbs off by {nbs:e}"))?;
    ensure(ksbs <= TOY_BASELINE_TOL, || format!("ksbs off by {ksbs:e}"))?;
    ensure(naive <= NAIVE_TOL, || format!("naive moved {naive:e}"))?;
    Ok(format!("max |x-0.5|: dibs {dibs:.1e}, nbs {nbs:.1e}, ksbs {ksbs:.1e}; naive drift {naive:.1e}"))
}

fn example_game(g: Option<MonotoneTransform>) -> Result<bargain::BargainingGame, String> {
    let models: Vec<SharedCost> = [0.0, 1.0]
        .iter()
        .map(|&c| {
            let m: SharedCost = Arc::new(Quadratic::isotropic(vec![c], 1.0));
            g.map_or(m.clone(), |g| transform_cost(m, g))
        })
        .collect();
    let x0 = lib(StateVector::new(vec![0.5]))?;
    lib(make_game(models, vec![1.0, 1.0], lib(StateSpace::uniform_box(1, 0.0, 1.0))?, &x0, DEFAULT_PREFERRED_STATE_TOL))
}

fn invariance_suite() -> Outcome {
    let records = toy_records()?;
    let dibs = worst(&records, "transformed", Method::Dibs, |_| 0.5);
    ensure(dibs <= TOY_DIBS_TOL, || format!("transformed dibs off by {dibs:e}"))?;
    let closest = |m: Method| {
        records
            .iter()
            .filter(|r| r.variant == "transformed" && r.method == m)
            .map(|r| (r.final_state[0] - 0.5).abs())
            .fold(f64::INFINITY, f64::min)
    };
    let (nbs, ksbs) = (closest(Method::Nbs), closest(Method::Ksbs));
    ensure(nbs > SENSITIVITY_GAP, || format!("transformed nbs within {nbs:e} of 0.5"))?;
    ensure(ksbs > SENSITIVITY_GAP, || format!("transformed ksbs within {ksbs:e} of 0.5"))?;

    let plain = example_game(None)?;
    let mut r = rng(40);
    for g in [MonotoneTransform::SignedSquare, MonotoneTransform::CubicPlusLinear] {
        let transformed = example_game(Some(g))?;
        for _ in 0..100 {
            let x = lib(StateVector::new(vec![r.random_range(0.001..0.999)]))?;
            let alpha = r.random_range(0.001..0.5);
            let a = lib(dibs_step(&plain, &x, alpha, &OracleMode::Exact))?;
            let b = lib(dibs_step(&transformed, &x, alpha, &OracleMode::Exact))?;
            ensure(a.as_slice() == b.as_slice(), || format!("{g:?} step differs at {:?}", x.as_slice()))?;
        }
    }
    Ok(format!(
        "transformed: dibs off by {dibs:.1e}, nbs/ksbs at least {nbs:.3}/{ksbs:.3} from 0.5; 200 steps bitwise equal"
    ))
}

fn dibs_cfg(stride: usize) -> SolverConfig {
    SolverConfig {
        schedule: StepSchedule::constant(0.05),
        max_iters: 20_000,
        update_norm_tol: 1e-12,
        trajectory_stride: stride,
        ..SolverConfig::default()
    }
}

fn certificate_suite() -> Outcome {
    let mut converged = 0;
    let mut worst_residual: f64 = 0.0;
    let mut worst_grid: f64 = 0.0;
    let mut r = rng(41);
    for seed in 0..50 {
        let (game, x0) = strongly_convex_game(seed);
        let report = lib(solve(&game, Method::Dibs, &x0, &dibs_cfg(0)))?;
        if report.termination == Termination::Converged {
            converged += 1;
            worst_residual = worst_residual.max(report.stationarity_residual);
        }
        let probes = [x0.to_vec(), report.final_state.to_vec(), vec![r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)]];
        for x in probes {
            let cert = stationarity_residual(&game, &x);
            let grid = grid_min_residual(&certificate_gradients(&game, &x), GRID_STEP);
            worst_grid = worst_grid.max((cert.residual - grid).abs());
        }
    }
    ensure(converged > 0, || "no run converged".into())?;
    ensure(worst_residual <= STATIONARY_RESIDUAL, || format!("converged residual {worst_residual:e}"))?;
    ensure(worst_grid <= GRID_TOL, || format!("grid mismatch {worst_grid:e}"))?;
    Ok(format!(
        "{converged}/50 converged, max residual {worst_residual:.1e}; max grid mismatch {worst_grid:.1e} over 150 states"
    ))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn boundedness_symmetry_suite() -> Outcome {
    let mut runs = 0;
    let mut permuted_runs = 0;
    for seed in 0..50 {
        let (game, x0) = strongly_convex_game(1000 + seed);
        let report = lib(solve(&game, Method::Dibs, &x0, &dibs_cfg(1)))?;
        let trajectory = report.trajectory.clone().unwrap_or_default();
        ensure(check_bounded(&trajectory, game.preferred_states(), &x0), || format!("seed {seed} left the ball"))?;
        runs += 1;
        for perm in permutations(game.num_agents()).into_iter().skip(1) {
            let models = perm.iter().map(|&p| game.agents()[p].clone()).collect();
            let d = perm.iter().map(|&p| game.disagreement()[p]).collect();
            let permuted = lib(make_game(models, d, game.space().clone(), &x0, DEFAULT_PREFERRED_STATE_TOL))?;
            let other = lib(solve(&permuted, Method::Dibs, &x0, &dibs_cfg(1)))?;
            ensure(other.trajectory == report.trajectory, || format!("seed {seed} permutation {perm:?} differs"))?;
            permuted_runs += 1;
        }
    }
    Ok(format!("{runs} trajectories bounded; {permuted_runs} permuted runs bitwise identical"))
}

fn formation_suite() -> Outcome {
    let mut cfg = ExperimentConfig::new(Experiment::Formation);
    cfg.methods = Some(vec![Method::Dibs, Method::Nbs]);
    let records = lib(run_formation(&cfg))?;
    let find = |variant: &str, method: Method| {
        records
            .iter()
            .find(|r| r.variant == variant && r.method == method)
            .ok_or_else(|| format!("missing {variant} {method}"))
    };
    let params = FormationParams::default();
    ensure(params.n_agents == 10, || "default formation is not 10 agents".into())?;
    let spec = TransformSpec::odd_agents(MonotoneTransform::SignedSquare, params.n_agents);
    let (plain, _) = lib(formation_game(&params, None))?;
    let (transformed, _) = lib(formation_game(&params, Some(&spec)))?;
    let norm = |v: &[f64]| v.iter().map(|e| e * e).sum::<f64>().sqrt();

    let mut update: f64 = 0.0;
    for (game, variant) in [(&plain, "plain"), (&transformed, "transformed")] {
        let r = find(variant, Method::Dibs)?;
        ensure(r.iterations <= 5000, || format!("{} iterations", r.iterations))?;
        update = update.max(norm(&lib(dibs_update(game, &r.final_state, &OracleMode::Exact, 0))?));
    }
    let dibs_gap = common::max_abs_diff(&find("plain", Method::Dibs)?.final_state, &find("transformed", Method::Dibs)?.final_state);
    let nbs_gap = common::max_abs_diff(&find("plain", Method::Nbs)?.final_state, &find("transformed", Method::Nbs)?.final_state);
    let nbs_update = norm(&lib(nbs_update(&plain, &find("plain", Method::Nbs)?.final_state))?);
    ensure(update <= FORMATION_UPDATE_TOL, || format!("dibs update norm {update:e}"))?;
    ensure(dibs_gap <= FORMATION_INVARIANCE_TOL, || format!("dibs transform gap {dibs_gap:e}"))?;
    ensure(nbs_gap > FORMATION_NBS_GAP, || format!("nbs transform gap only {nbs_gap:e}"))?;
    Ok(format!(
        "dibs update norm {update:.1e}, dibs transform gap {dibs_gap:.1e}, nbs transform gap {nbs_gap:.3} (nbs update norm {nbs_update:.1e})"
    ))
}

fn portfolio_suite() -> Outcome {
    let mut cfg = ExperimentConfig::new(Experiment::Portfolio);
    cfg.seed = Some(2024);
    cfg.n_stocks = vec![5, 10];
    cfg.n_agents = vec![2, 3, 5, 10];
    cfg.n_scenarios = 20;
    cfg.comparisons_per_iter = vec![1, 10, 100, 1000];
    let records = lib(run_portfolio(&cfg))?;
    let rows = summarize(&records);
    ensure(rows.len() == 2 * 4 * 4, || format!("{} summary rows", rows.len()))?;
    let mut worst_median: f64 = 0.0;
    let mut cells = std::collections::BTreeMap::<(Option<usize>, usize), Vec<(usize, f64)>>::new();
    for row in &rows {
        ensure(row.count == 20, || format!("{} scenarios in a cell", row.count))?;
        worst_median = worst_median.max(row.median());
        cells.entry((row.n_stocks, row.n_agents)).or_default().push((row.queries.unwrap_or(0), row.median()));
    }
    ensure(worst_median < PORTFOLIO_MEDIAN_LIMIT, || format!("median relative error {worst_median}"))?;
    for ((n, m), mut medians) in cells {
        medians.sort_by_key(|&(q, _)| q);
        ensure(medians.windows(2).all(|w| w[1].1 <= w[0].1), || format!("n={n:?} N={m}: medians {medians:?} increase"))?;
    }
    Ok(format!("32 cells, worst median {worst_median:.3}, medians nonincreasing in Q everywhere"))
}

fn relative_fd_error(model: &dyn CostModel, x: &[f64]) -> f64 {
    let fd = finite_diff_gradient(model, x, FD_STEP);
    let g = model.gradient(x);
    let diff: f64 = fd.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    diff / g.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE)
}

fn gradient_suite() -> Outcome {
    let params = FormationParams::default();
    let formation = lib(formation_models(&params))?;
    let mut r = rng(42);
    let mut worst_formation: f64 = 0.0;
    for k in 0..100 {
        let x: Vec<f64> = (0..2 * params.n_agents).map(|_| r.random_range(0.5..9.5)).collect();
        worst_formation = worst_formation.max(relative_fd_error(formation[k % params.n_agents].as_ref(), &x));
    }
    let prices = lib(synthesize_prices(10, 2016, 43))?;
    let end = *prices.dates().last().ok_or("empty prices")?;
    let mut worst_markowitz: f64 = 0.0;
    for _ in 0..100 {
        let window = Window::ALL[r.random_range(0..Window::ALL.len())];
        let profile = lib(estimate_profile(&prices, window, r.random_range(0.0..0.1), end))?;
        let model = markowitz_cost(&profile);
        let raw: Vec<f64> = (0..10).map(|_| r.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let x: Vec<f64> = raw.iter().map(|v| v / total).collect();
        worst_markowitz = worst_markowitz.max(relative_fd_error(&model, &x));
    }
    ensure(worst_formation <= FD_REL_TOL, || format!("formation relative error {worst_formation:e}"))?;
    ensure(worst_markowitz <= FD_REL_TOL, || format!("markowitz relative error {worst_markowitz:e}"))?;
    Ok(format!("max relative error: formation {worst_formation:.1e}, markowitz {worst_markowitz:.1e}"))
}

fn estimator_suite() -> Outcome {
    let model = Quadratic::isotropic(vec![0.0; 5], 1.0);
    let mut medians = Vec::new();
    for q in [10, 100, 1000] {
        let mut cosines = Vec::with_capacity(50);
        for seed in 0..50u64 {
            let mut r = rng(seed);
            let x: Vec<f64> = (0..5).map(|_| r.sample(StandardNormal)).collect();
            let truth: Vec<f64> = model.gradient(&x).into_iter().map(|v| -v).collect();
            let estimate = lib(estimate_direction(&model, &x, &EstimatorConfig::new(q, seed)))?;
            cosines.push(cosine(&estimate.direction, &truth));
        }
        medians.push(median(&mut cosines));
    }
    ensure(medians[2] >= ESTIMATOR_COSINE, || format!("median cosine at Q=1000 is {}", medians[2]))?;
    ensure(medians.windows(2).all(|w| w[1] >= w[0]), || format!("medians {medians:?} decrease"))?;
    Ok(format!("median cosine at Q=10/100/1000: {:.3}/{:.3}/{:.3}", medians[0], medians[1], medians[2]))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "toy-game suite", budget: Duration::from_secs(1), check: toy_suite },
        Criterion { name: "invariance/sensitivity suite", budget: Duration::from_secs(5), check: invariance_suite },
        Criterion { name: "stationarity-certificate suite", budget: Duration::from_secs(10), check: certificate_suite },
        Criterion { name: "boundedness + symmetry suite", budget: Duration::from_secs(10), check: boundedness_symmetry_suite },
        Criterion { name: "formation experiment (N=10, 5000 iterations)", budget: Duration::from_secs(120), check: formation_suite },
        Criterion { name: "portfolio experiment (desk scale)", budget: Duration::from_secs(600), check: portfolio_suite },
        Criterion { name: "gradient-oracle suite", budget: Duration::from_secs(5), check: gradient_suite },
        Criterion { name: "estimator suite", budget: Duration::from_secs(30), check: estimator_suite },
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filters.is_empty() || filters.iter().any(|f| c.name.contains(f.as_str()))) {
        let started = Instant::now();
        let outcome = (c.check)();
        let elapsed = started.elapsed();
        let verdict = match &outcome {
            Ok(_) if elapsed > c.budget => Err(format!("over budget ({:.1}s > {}s)", elapsed.as_secs_f64(), c.budget.as_secs())),
            Ok(detail) => Ok(detail.clone()),
            Err(e) => Err(e.clone()),
        };
        let (tag, detail) = match verdict {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {} [{:.2}s / {}s]: {detail}", c.name, elapsed.as_secs_f64(), c.budget.as_secs());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
