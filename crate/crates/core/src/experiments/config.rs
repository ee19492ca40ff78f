use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::EstimatorConfig;
use crate::problems::{FormationParams, MonotoneTransform, TransformSpec};
use crate::solvers::{Method, ScheduleKind, StepSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Toy,
    Formation,
    Portfolio,
}

impl Experiment {
    pub fn label(&self) -> &'static str {
        match self {
            Experiment::Toy => "toy",
            Experiment::Formation => "formation",
            Experiment::Portfolio => "portfolio",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Exact,
    Comparison,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Jsonl,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(OutputFormat::Jsonl),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
}

/// Which agents a transform applies to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AgentSelection {
    /// `"odd"` (1-based odd: 0-based indices 0, 2, ...), `"even"` or `"all"`.
    Named(String),
    Indices(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    SignedSquare,
    Power,
    CubicPlusLinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSection {
    pub kind: TransformKind,
    /// Exponent for `kind = "power"`.
    pub p: Option<f64>,
    #[serde(default = "odd")]
    pub agents: AgentSelection,
}

fn odd() -> AgentSelection {
    AgentSelection::Named("odd".into())
}

impl TransformSection {
    pub fn transform(&self) -> Result<MonotoneTransform> {
        match (self.kind, self.p) {
            (TransformKind::SignedSquare, None) => Ok(MonotoneTransform::SignedSquare),
            (TransformKind::CubicPlusLinear, None) => Ok(MonotoneTransform::CubicPlusLinear),
            (TransformKind::Power, Some(p)) if p > 0.0 && p.is_finite() => Ok(MonotoneTransform::Power(p)),
            (TransformKind::Power, _) => Err(Error::Config("power transform needs a positive `p`".into())),
            (_, Some(_)) => Err(Error::Config("`p` applies only to the power transform".into())),
        }
    }

    pub fn spec(&self, n_agents: usize) -> Result<TransformSpec> {
        let agents = match &self.agents {
            AgentSelection::Named(name) => match name.as_str() {
                "odd" => (0..n_agents).step_by(2).collect(),
                "even" => (1..n_agents).step_by(2).collect(),
                "all" => (0..n_agents).collect(),
                other => return Err(Error::Config(format!("unknown agent selection {other:?}"))),
            },
            AgentSelection::Indices(list) => {
                if let Some(&bad) = list.iter().find(|&&i| i >= n_agents) {
                    return Err(Error::Config(format!(
                        "transform agent {bad} out of range for {n_agents} agents"
                    )));
                }
                list.clone()
            }
        };
        Ok(TransformSpec {
            transform: self.transform()?,
            agents,
        })
    }
}

/// Overrides for the solver defaults of an experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub schedule: Option<ScheduleKind>,
    pub alpha0: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub ratio_tol: Option<f64>,
}

impl SolverSection {
    pub fn schedule_or(&self, default: StepSchedule) -> StepSchedule {
        let kind = self.schedule.unwrap_or(default.kind);
        let alpha0 = self.alpha0.unwrap_or(default.alpha0);
        StepSchedule::new(kind, alpha0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricesSection {
    /// CSV file with a `date,<ticker>...` header; synthesized when absent.
    pub csv: Option<PathBuf>,
    #[serde(default = "default_days")]
    pub synthetic_days: usize,
}

fn default_days() -> usize {
    2016
}

impl Default for PricesSection {
    fn default() -> Self {
        Self {
            csv: None,
            synthetic_days: default_days(),
        }
    }
}

/// A scenario sweep read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub methods: Option<Vec<Method>>,
    #[serde(default = "exact")]
    pub oracle_mode: OracleKind,
    #[serde(default)]
    pub comparisons_per_iter: Vec<usize>,
    #[serde(default)]
    pub noise_flip_prob: f64,
    #[serde(default)]
    pub n_stocks: Vec<usize>,
    #[serde(default)]
    pub n_agents: Vec<usize>,
    #[serde(default = "one")]
    pub n_scenarios: usize,
    pub seed: Option<u64>,
    /// Toy starting points; sampled from the seed when empty.
    #[serde(default)]
    pub x0: Vec<f64>,
    #[serde(default)]
    pub solver: SolverSection,
    pub transform: Option<TransformSection>,
    #[serde(default)]
    pub formation: FormationParams,
    #[serde(default)]
    pub prices: PricesSection,
    #[serde(default)]
    pub trajectory_stride: usize,
    /// Record per-run wall time; off by default so output is reproducible byte for byte.
    #[serde(default)]
    pub record_wall_time: bool,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn exact() -> OracleKind {
    OracleKind::Exact
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment: Some(experiment),
            methods: None,
            oracle_mode: OracleKind::Exact,
            comparisons_per_iter: Vec::new(),
            noise_flip_prob: 0.0,
            n_stocks: Vec::new(),
            n_agents: Vec::new(),
            n_scenarios: 1,
            seed: None,
            x0: Vec::new(),
            solver: SolverSection::default(),
            transform: None,
            formation: FormationParams::default(),
            prices: PricesSection::default(),
            trajectory_stride: 0,
            record_wall_time: false,
            output: None,
            format: OutputFormat::Jsonl,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn experiment(&self) -> Result<Experiment> {
        self.experiment
            .ok_or_else(|| Error::Config("missing `experiment` (toy, formation or portfolio)".into()))
    }

    pub fn methods_or(&self, default: &[Method]) -> Vec<Method> {
        let mut methods = self.methods.clone().unwrap_or_else(|| default.to_vec());
        methods.sort();
        methods.dedup();
        methods
    }

    pub fn estimator(&self, queries: usize) -> EstimatorConfig {
        EstimatorConfig {
            queries_per_call: queries,
            noise_flip_prob: self.noise_flip_prob,
            rng_seed: self.seed.unwrap_or(0),
            ..EstimatorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let experiment = self.experiment()?;
        if self.n_scenarios == 0 {
            return Err(Error::Config("n_scenarios must be at least 1".into()));
        }
        let needs_seed = self.oracle_mode == OracleKind::Comparison || experiment == Experiment::Portfolio;
        if needs_seed && self.seed.is_none() {
            return Err(Error::Config(
                "`seed` is required for comparison oracles and portfolio sweeps".into(),
            ));
        }
        if let Some(methods) = &self.methods {
            if methods.is_empty() {
                return Err(Error::Config("`methods` must not be empty".into()));
            }
        }
        if self.comparisons_per_iter.contains(&0) {
            return Err(Error::Config("comparisons_per_iter entries must be at least 1".into()));
        }
        if self.oracle_mode == OracleKind::Comparison
            && experiment != Experiment::Portfolio
            && self.comparisons_per_iter.is_empty()
        {
            return Err(Error::Config(
                "comparison oracles need at least one comparisons_per_iter value".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.noise_flip_prob) {
            return Err(Error::Config("noise_flip_prob must lie in [0, 0.5)".into()));
        }
        if self.n_stocks.iter().any(|&n| n < 2) {
            return Err(Error::Config("n_stocks entries must be at least 2".into()));
        }
        if self.n_agents.contains(&0) {
            return Err(Error::Config("n_agents entries must be at least 1".into()));
        }
        if let Some(bad) = self.x0.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::Config(format!("toy x0 {bad} must lie in (0, 1)")));
        }
        if let Some(a) = self.solver.alpha0 {
            if !(a > 0.0) {
                return Err(Error::Config("solver.alpha0 must be positive".into()));
            }
        }
        if self.solver.max_iters == Some(0) {
            return Err(Error::Config("solver.max_iters must be at least 1".into()));
        }
        if let Some(t) = self.solver.tol {
            if !(t > 0.0) {
                return Err(Error::Config("solver.tol must be positive".into()));
            }
        }
        if experiment == Experiment::Formation {
            self.formation.validate().map_err(|e| Error::Config(e.to_string()))?;
            for &n in &self.n_agents {
                if n % 2 != 0 {
                    return Err(Error::Config(format!("formation needs an even agent count, got {n}")));
                }
            }
        }
        if self.prices.synthetic_days < 10 {
            return Err(Error::Config("prices.synthetic_days must be at least 10".into()));
        }
        Ok(())
    }
}
