//! Experiment runners behind the `bargain` command: the one-dimensional toy
//! games, formation assignment and the portfolio comparison sweep.

mod config;
mod records;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

pub use config::{
    AgentSelection, Experiment, ExperimentConfig, OracleKind, OutputFormat, PricesSection, SolverSection,
    TransformKind, TransformSection,
};
pub use records::{
    emit_results, format_float, percentile, read_jsonl, sort_records, summarize, to_json_line, write_records,
    write_summary, write_trajectories, ResultRecord, SummaryRow, CSV_HEADER, SUMMARY_PERCENTILES,
};

use crate::analysis::relative_error;
use crate::error::{Error, Result};
use crate::game::{make_game, BargainingGame, SharedCost, SolveReport, StateSpace, StateVector, DEFAULT_PREFERRED_STATE_TOL};
use crate::oracles::{derive_seed, OracleMode};
use crate::problems::{
    estimate_profile, example_one_game, formation_initial_state, formation_models, load_prices_csv, markowitz_cost,
    synthesize_prices, FormationParams, MonotoneTransform, PriceSeries, TransformSpec, Window,
};
use crate::solvers::{solve, Method, SolverConfig, StepSchedule};

/// Solver defaults for the toy games: a constant step contracts the
/// one-dimensional updates geometrically.
pub fn toy_solver_defaults() -> SolverConfig {
    SolverConfig {
        schedule: StepSchedule::constant(0.1),
        max_iters: 10_000,
        update_norm_tol: 1e-12,
        ..SolverConfig::default()
    }
}

/// Solver defaults for formation assignment: harmonic steps `1/k` for 5000 iterations.
pub fn formation_solver_defaults() -> SolverConfig {
    SolverConfig {
        schedule: StepSchedule::harmonic(1.0),
        max_iters: 5000,
        update_norm_tol: 1e-12,
        ..SolverConfig::default()
    }
}

/// Solver defaults for the portfolio sweep: step 0.01 shrunk tenfold on any
/// negative weight, stopping below 1e-12 or after 1000 iterations.
pub fn portfolio_solver_defaults() -> SolverConfig {
    SolverConfig {
        schedule: StepSchedule::shrink_on_violation(0.01),
        max_iters: 1000,
        update_norm_tol: 1e-15,
        ..SolverConfig::default()
    }
}

pub const DEFAULT_COMPARISONS: [usize; 4] = [1, 10, 100, 1000];

fn solver_config(cfg: &ExperimentConfig, defaults: SolverConfig) -> SolverConfig {
    let s = &cfg.solver;
    SolverConfig {
        schedule: s.schedule_or(defaults.schedule.clone()),
        max_iters: s.max_iters.unwrap_or(defaults.max_iters),
        update_norm_tol: s.tol.unwrap_or(defaults.update_norm_tol),
        ratio_tol: s.ratio_tol.unwrap_or(defaults.ratio_tol),
        trajectory_stride: cfg.trajectory_stride,
        oracle_mode: OracleMode::Exact,
    }
}

/// One `(oracle, query count)` setting of a run.
#[derive(Clone, Debug)]
struct OracleChoice {
    mode: OracleMode,
    queries: Option<usize>,
}

fn oracle_choices(cfg: &ExperimentConfig, method: Method, seed: u64) -> Vec<OracleChoice> {
    let uses_directions = matches!(method, Method::Dibs | Method::Naive);
    if cfg.oracle_mode == OracleKind::Exact || !uses_directions {
        return vec![OracleChoice {
            mode: OracleMode::Exact,
            queries: None,
        }];
    }
    cfg.comparisons_per_iter
        .iter()
        .map(|&q| OracleChoice {
            mode: OracleMode::Comparison(cfg.estimator(q).reseeded(&[seed, q as u64])),
            queries: Some(q),
        })
        .collect()
}

struct RunContext<'a> {
    experiment: Experiment,
    n_stocks: Option<usize>,
    n_agents: usize,
    scenario: u64,
    variant: &'a str,
    record_wall_time: bool,
}

fn run_one(
    ctx: &RunContext<'_>,
    game: &BargainingGame,
    method: Method,
    x0: &StateVector,
    solver: &SolverConfig,
    choice: &OracleChoice,
) -> Result<(ResultRecord, SolveReport)> {
    let cfg = SolverConfig {
        oracle_mode: choice.mode.clone(),
        ..solver.clone()
    };
    let started = Instant::now();
    let report = solve(game, method, x0, &cfg)?;
    let elapsed = started.elapsed().as_secs_f64();
    log::debug!(
        "{} scenario {} {} {} q={:?}: {} after {} iterations",
        ctx.experiment.label(),
        ctx.scenario,
        ctx.variant,
        method,
        choice.queries,
        report.termination,
        report.iterations
    );
    let record = ResultRecord {
        experiment: ctx.experiment.label().to_string(),
        n_stocks: ctx.n_stocks,
        n_agents: ctx.n_agents,
        scenario: ctx.scenario,
        variant: ctx.variant.to_string(),
        method,
        oracle_mode: choice.mode.label().to_string(),
        queries: choice.queries,
        x0: x0.to_vec(),
        final_state: report.final_state.to_vec(),
        final_costs: report.final_costs.clone(),
        iterations: report.iterations,
        termination: report.termination,
        stationarity_residual: report.stationarity_residual,
        relative_error: None,
        wall_time_s: ctx.record_wall_time.then_some(elapsed),
        trajectory: report.trajectory.clone(),
    };
    Ok((record, report))
}

fn check_experiment(cfg: &ExperimentConfig, expected: Experiment) -> Result<()> {
    cfg.validate()?;
    if cfg.experiment()? != expected {
        return Err(Error::Config(format!(
            "config describes a {} experiment, not {}",
            cfg.experiment()?.label(),
            expected.label()
        )));
    }
    Ok(())
}

fn rebuild_game(base: &BargainingGame, models: Vec<SharedCost>, x0: &StateVector) -> Result<BargainingGame> {
    make_game(
        models,
        base.disagreement().to_vec(),
        base.space().clone(),
        x0,
        DEFAULT_PREFERRED_STATE_TOL,
    )
}

/// Toy starting points: the configured list, or seeded draws from `(0.05, 0.95)`.
pub fn toy_starts(cfg: &ExperimentConfig) -> Vec<f64> {
    if !cfg.x0.is_empty() {
        return cfg.x0.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed.unwrap_or(0), &[0x70]));
    (0..cfg.n_scenarios).map(|_| rng.random_range(0.05..0.95)).collect()
}

/// Solves the two-agent game `[x^2, (x - 1)^2]` on `[0, 1]` and its
/// transformed variant (first agent squared unless configured otherwise)
/// with every requested method, from every starting point.
pub fn run_toy(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    check_experiment(cfg, Experiment::Toy)?;
    let solver = solver_config(cfg, toy_solver_defaults());
    let methods = cfg.methods_or(&[Method::Dibs, Method::Naive, Method::Nbs, Method::Ksbs]);
    let transform = match &cfg.transform {
        Some(section) => section.spec(2)?,
        None => TransformSpec {
            transform: MonotoneTransform::Power(2.0),
            agents: vec![0],
        },
    };
    let starts = toy_starts(cfg);
    let results: Vec<Result<Vec<ResultRecord>>> = starts
        .par_iter()
        .enumerate()
        .map(|(scenario, &start)| {
            let x0 = StateVector::new(vec![start])?;
            let plain = example_one_game(start)?;
            let transformed = rebuild_game(&plain, transform.apply(plain.agents()), &x0)?;
            let mut out = Vec::new();
            for (variant, game) in [("plain", &plain), ("transformed", &transformed)] {
                let ctx = RunContext {
                    experiment: Experiment::Toy,
                    n_stocks: None,
                    n_agents: 2,
                    scenario: scenario as u64,
                    variant,
                    record_wall_time: cfg.record_wall_time,
                };
                for &method in &methods {
                    let seed = derive_seed(cfg.seed.unwrap_or(0), &[scenario as u64]);
                    for choice in oracle_choices(cfg, method, seed) {
                        out.push(run_one(&ctx, game, method, &x0, &solver, &choice)?.0);
                    }
                }
            }
            Ok(out)
        })
        .collect();
    collect_sorted(results)
}

fn collect_sorted(results: Vec<Result<Vec<ResultRecord>>>) -> Result<Vec<ResultRecord>> {
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    sort_records(&mut records);
    Ok(records)
}

/// The formation game for `params`, optionally transformed; disagreement is zero.
pub fn formation_game(params: &FormationParams, transform: Option<&TransformSpec>) -> Result<(BargainingGame, StateVector)> {
    let x0 = formation_initial_state(params)?;
    let mut models = formation_models(params)?;
    if let Some(spec) = transform {
        models = spec.apply(&models);
    }
    let game = make_game(
        models,
        vec![0.0; params.n_agents],
        params.space()?,
        &x0,
        DEFAULT_PREFERRED_STATE_TOL,
    )?;
    Ok((game, x0))
}

/// Formation assignment with and without a monotone transform on the odd
/// agents (signed square unless configured otherwise).
pub fn run_formation(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    check_experiment(cfg, Experiment::Formation)?;
    let solver = solver_config(cfg, formation_solver_defaults());
    let methods = cfg.methods_or(&[Method::Dibs, Method::Naive, Method::Nbs, Method::Ksbs]);
    let counts = if cfg.n_agents.is_empty() {
        vec![cfg.formation.n_agents]
    } else {
        cfg.n_agents.clone()
    };
    let mut jobs = Vec::new();
    for &n in &counts {
        for scenario in 0..cfg.n_scenarios as u64 {
            for variant in ["plain", "transformed"] {
                for &method in &methods {
                    jobs.push((n, scenario, variant, method));
                }
            }
        }
    }
    let results: Vec<Result<Vec<ResultRecord>>> = jobs
        .par_iter()
        .map(|&(n, scenario, variant, method)| {
            let params = FormationParams {
                n_agents: n,
                ..cfg.formation.clone()
            };
            let spec = match &cfg.transform {
                Some(section) => section.spec(n)?,
                None => TransformSpec::odd_agents(MonotoneTransform::SignedSquare, n),
            };
            let (game, x0) = formation_game(&params, (variant == "transformed").then_some(&spec))?;
            let ctx = RunContext {
                experiment: Experiment::Formation,
                n_stocks: None,
                n_agents: n,
                scenario,
                variant,
                record_wall_time: cfg.record_wall_time,
            };
            let seed = derive_seed(cfg.seed.unwrap_or(0), &[n as u64, scenario]);
            oracle_choices(cfg, method, seed)
                .iter()
                .map(|choice| run_one(&ctx, &game, method, &x0, &solver, choice).map(|r| r.0))
                .collect()
        })
        .collect();
    collect_sorted(results)
}

/// Loads the configured price CSV (first `n_stocks` columns) or synthesizes
/// a seeded series.
pub fn portfolio_prices(cfg: &ExperimentConfig, n_stocks: usize) -> Result<PriceSeries> {
    match &cfg.prices.csv {
        Some(path) => {
            let series = load_prices_csv(path)?;
            if series.n_stocks() < n_stocks {
                return Err(Error::Config(format!(
                    "{} has {} stocks, {n_stocks} requested",
                    path.display(),
                    series.n_stocks()
                )));
            }
            series.select(&(0..n_stocks).collect::<Vec<_>>())
        }
        None => synthesize_prices(
            n_stocks,
            cfg.prices.synthetic_days,
            derive_seed(cfg.seed.unwrap_or(0), &[0x5052_4943, n_stocks as u64]),
        ),
    }
}

const WINDOW_ATTEMPTS: usize = 1000;

/// One sampled portfolio scenario: per-investor windows and risk
/// coefficients, the Markowitz game on the simplex and a random start.
pub fn portfolio_scenario(prices: &PriceSeries, n_agents: usize, seed: u64) -> Result<(BargainingGame, StateVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = prices
        .last_date()
        .ok_or_else(|| Error::InvalidArgument("empty price series".into()))?;
    let n = prices.n_stocks();
    let mut models: Vec<SharedCost> = Vec::with_capacity(n_agents);
    for agent in 0..n_agents {
        let mut attempt = 0;
        let profile = loop {
            let window = Window::ALL[rng.random_range(0..Window::ALL.len())];
            let lambda = rng.random_range(0.0..=0.1);
            match estimate_profile(prices, window, lambda, end) {
                Ok(p) => break p,
                Err(e) if attempt + 1 < WINDOW_ATTEMPTS => {
                    log::info!("agent {agent}: resampling window ({e})");
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        models.push(Arc::new(markowitz_cost(&profile)));
    }
    let weights: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = weights.iter().sum();
    let x0 = StateVector::new(crate::solvers::project_simplex(
        &weights.iter().map(|w| w / total).collect::<Vec<_>>(),
    ))?;
    let disagreement = models.iter().map(|m| m.evaluate(&x0) + 1.0).collect();
    let game = make_game(models, disagreement, StateSpace::simplex(n)?, &x0, DEFAULT_PREFERRED_STATE_TOL)?;
    Ok((game, x0))
}

/// Portfolio sweep: for every `(n_stocks, n_agents)` cell and scenario, DiBS
/// with exact directions, then with the comparison estimator at every query
/// count, recording the relative error of the comparison solution.
pub fn run_portfolio(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    check_experiment(cfg, Experiment::Portfolio)?;
    let solver = solver_config(cfg, portfolio_solver_defaults());
    let methods = cfg.methods_or(&[Method::Dibs]);
    let stocks = if cfg.n_stocks.is_empty() { vec![5] } else { cfg.n_stocks.clone() };
    let agents = if cfg.n_agents.is_empty() { vec![10] } else { cfg.n_agents.clone() };
    let queries = if cfg.comparisons_per_iter.is_empty() {
        DEFAULT_COMPARISONS.to_vec()
    } else {
        cfg.comparisons_per_iter.clone()
    };
    let master = cfg.seed.unwrap_or(0);

    let mut prices = Vec::with_capacity(stocks.len());
    for &n in &stocks {
        prices.push(portfolio_prices(cfg, n)?);
    }
    let mut jobs = Vec::new();
    for (k, &n) in stocks.iter().enumerate() {
        for &m in &agents {
            for scenario in 0..cfg.n_scenarios as u64 {
                jobs.push((k, n, m, scenario));
            }
        }
    }
    let results: Vec<Result<Vec<ResultRecord>>> = jobs
        .par_iter()
        .map(|&(k, n, m, scenario)| {
            let seed = derive_seed(master, &[n as u64, m as u64, scenario]);
            let (game, x0) = portfolio_scenario(&prices[k], m, seed)?;
            let ctx = RunContext {
                experiment: Experiment::Portfolio,
                n_stocks: Some(n),
                n_agents: m,
                scenario,
                variant: "plain",
                record_wall_time: cfg.record_wall_time,
            };
            let mut out = Vec::new();
            for &method in &methods {
                let exact = OracleChoice {
                    mode: OracleMode::Exact,
                    queries: None,
                };
                let (record, reference) = run_one(&ctx, &game, method, &x0, &solver, &exact)?;
                out.push(record);
                if !matches!(method, Method::Dibs | Method::Naive) {
                    continue;
                }
                for &q in &queries {
                    let choice = OracleChoice {
                        mode: OracleMode::Comparison(cfg.estimator(q).reseeded(&[seed, q as u64])),
                        queries: Some(q),
                    };
                    let (mut record, report) = run_one(&ctx, &game, method, &x0, &solver, &choice)?;
                    record.relative_error = match relative_error(&reference.final_state, &report.final_state, &x0) {
                        Ok(e) => Some(e),
                        Err(e) => {
                            log::warn!("scenario {scenario}: no relative error ({e})");
                            None
                        }
                    };
                    out.push(record);
                }
            }
            Ok(out)
        })
        .collect();
    collect_sorted(results)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    match cfg.experiment()? {
        Experiment::Toy => run_toy(cfg),
        Experiment::Formation => run_formation(cfg),
        Experiment::Portfolio => run_portfolio(cfg),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

/// Writes the records to `path`, plus `<stem>.summary.csv` when any record
/// carries a relative error and `<stem>.trajectories.csv` when any carries a
/// trajectory. Returns the paths written.
pub fn write_outputs(records: &[ResultRecord], path: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    emit_results(records, path, format)?;
    let mut written = vec![path.to_path_buf()];
    if records.iter().any(|r| r.relative_error.is_some()) {
        let p = sibling(path, ".summary.csv");
        write_summary(&summarize(records), std::io::BufWriter::new(std::fs::File::create(&p)?))?;
        written.push(p);
    }
    if records.iter().any(|r| r.trajectory.is_some()) {
        let p = sibling(path, ".trajectories.csv");
        write_trajectories(records, std::io::BufWriter::new(std::fs::File::create(&p)?))?;
        written.push(p);
    }
    Ok(written)
}
