//! Run configuration: an optional TOML file, overridden by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use ptree_learn::gain::GainOptions;
use ptree_learn::hypotheses::HypothesisSpec;
use ptree_learn::simharness::Setup;
use ptree_learn::{HypothesisSet, StrategyKind, VariableSpace};
use serde::Deserialize;

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_THRESHOLD: f64 = 0.95;
pub const DEFAULT_MAX_INTERVENTIONS: usize = 40;
pub const DEFAULT_RHO: f64 = 0.9;
pub const DEFAULT_RESTARTS: usize = 100;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_BINS: usize = 5;
pub const DEFAULT_OUT: &str = "results";
/// Environment variable naming the output directory when neither the config
/// file nor `--out` does.
pub const OUT_ENV: &str = "PTREE_LEARN_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Symmetric,
    Asymmetric,
    ThreeVar,
    Context,
    Pairs,
    CustomTree,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Symmetric => "symmetric",
            ExperimentKind::Asymmetric => "asymmetric",
            ExperimentKind::ThreeVar => "three-var",
            ExperimentKind::Context => "context",
            ExperimentKind::Pairs => "pairs",
            ExperimentKind::CustomTree => "custom-tree",
        }
    }

    fn default_n_obs(self) -> usize {
        match self {
            ExperimentKind::Context => 400,
            ExperimentKind::Pairs => 100,
            _ => 300,
        }
    }

    fn default_k(self) -> usize {
        match self {
            ExperimentKind::ThreeVar => 6,
            ExperimentKind::Context => 3,
            _ => 4,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A bad configuration value, reported with exit code 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Keys accepted in the config file. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub experiment: Option<ExperimentKind>,
    pub strategies: Option<Vec<String>>,
    pub n_obs: Option<usize>,
    pub restarts: Option<usize>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dataset_dir: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub max_interventions: Option<usize>,
    pub sampled_outcomes: Option<usize>,
    pub true_hypothesis: Option<usize>,
    pub heavy_cells: Option<usize>,
    pub bins: Option<usize>,
    pub cardinalities: Option<Vec<usize>>,
    pub hypotheses: Option<Vec<HypothesisSpec>>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with any of the keys below; flags take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub experiment: Option<ExperimentKind>,
    /// Comma-separated list of expected, actual, random, entropy
    #[arg(long, alias = "strategy", value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
    /// Observational records drawn before the first intervention
    #[arg(long)]
    pub n_obs: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Dirichlet concentration scale
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Mass on the heavy cells of the ground-truth joint
    #[arg(long)]
    pub rho: Option<f64>,
    /// Values per variable
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [env: PTREE_LEARN_OUT]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory holding pairmeta.txt and the pair files
    #[arg(long)]
    pub dataset_dir: Option<PathBuf>,
    /// Posterior on the truth counted as certain
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_interventions: Option<usize>,
    /// Estimate gains from this many sampled outcomes instead of enumerating
    #[arg(long)]
    pub sampled_outcomes: Option<usize>,
    /// Index of the data-generating hypothesis
    #[arg(long)]
    pub true_hypothesis: Option<usize>,
    /// Heavy cells in random sparsity patterns
    #[arg(long)]
    pub heavy_cells: Option<usize>,
    /// Equiprobable bins per pair variable
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub strategies: Vec<StrategyKind>,
    pub n_obs: usize,
    pub restarts: usize,
    pub alpha: f64,
    pub rho: f64,
    pub k: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub dataset_dir: Option<PathBuf>,
    pub threshold: f64,
    pub max_interventions: usize,
    pub sampled_outcomes: Option<usize>,
    pub true_hypothesis: usize,
    pub heavy_cells: Option<usize>,
    pub bins: usize,
    pub cardinalities: Option<Vec<usize>>,
    pub hypotheses: Option<Vec<HypothesisSpec>>,
}

impl RunConfig {
    /// Flags override the file, the file overrides `env_out` and the
    /// built-in defaults.
    pub fn resolve(args: &ConfigArgs, env_out: Option<PathBuf>) -> Result<Self, ConfigError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Self::merge(args, file, env_out)
    }

    pub fn merge(
        args: &ConfigArgs,
        file: FileConfig,
        env_out: Option<PathBuf>,
    ) -> Result<Self, ConfigError> {
        let experiment = args
            .experiment
            .or(file.experiment)
            .unwrap_or(ExperimentKind::Symmetric);
        let strategy_names = args
            .strategies
            .clone()
            .or(file.strategies)
            .unwrap_or_else(|| vec!["expected".into(), "random".into()]);
        let mut strategies = Vec::new();
        for name in &strategy_names {
            let s = StrategyKind::from_str(name.trim()).map_err(|_| {
                ConfigError::new(
                    "strategies",
                    format!(
                        "unknown strategy `{name}`; allowed: expected, actual, random, entropy"
                    ),
                )
            })?;
            if !strategies.contains(&s) {
                strategies.push(s);
            }
        }
        let cfg = RunConfig {
            experiment,
            strategies,
            n_obs: args
                .n_obs
                .or(file.n_obs)
                .unwrap_or(experiment.default_n_obs()),
            restarts: args.restarts.or(file.restarts).unwrap_or(DEFAULT_RESTARTS),
            alpha: args.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA),
            rho: args.rho.or(file.rho).unwrap_or(DEFAULT_RHO),
            k: args.k.or(file.k).unwrap_or(experiment.default_k()),
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            out: args
                .out
                .clone()
                .or(file.out)
                .or(env_out)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            dataset_dir: args.dataset_dir.clone().or(file.dataset_dir),
            threshold: args
                .threshold
                .or(file.threshold)
                .unwrap_or(DEFAULT_THRESHOLD),
            max_interventions: args
                .max_interventions
                .or(file.max_interventions)
                .unwrap_or(DEFAULT_MAX_INTERVENTIONS),
            sampled_outcomes: args.sampled_outcomes.or(file.sampled_outcomes),
            true_hypothesis: args.true_hypothesis.or(file.true_hypothesis).unwrap_or(0),
            heavy_cells: args.heavy_cells.or(file.heavy_cells),
            bins: args.bins.or(file.bins).unwrap_or(DEFAULT_BINS),
            cardinalities: file.cardinalities,
            hypotheses: file.hypotheses,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.strategies.is_empty() {
            return Err(ConfigError::new(
                "strategies",
                "at least one strategy is required",
            ));
        }
        if self.restarts == 0 {
            return Err(ConfigError::new("restarts", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ConfigError::new(
                "alpha",
                format!("must be positive and finite, got {}", self.alpha),
            ));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(ConfigError::new(
                "rho",
                format!("must lie in [0, 1], got {}", self.rho),
            ));
        }
        if self.k < 2 {
            return Err(ConfigError::new(
                "k",
                format!("must be at least 2, got {}", self.k),
            ));
        }
        if self.experiment == ExperimentKind::Context && self.k < 3 {
            return Err(ConfigError::new(
                "k",
                "the context experiment needs at least 3 values",
            ));
        }
        if !(self.threshold > 0.5 && self.threshold < 1.0) {
            return Err(ConfigError::new(
                "threshold",
                format!("must lie in (0.5, 1), got {}", self.threshold),
            ));
        }
        if self.sampled_outcomes == Some(0) {
            return Err(ConfigError::new("sampled-outcomes", "must be at least 1"));
        }
        if self.bins < 2 {
            return Err(ConfigError::new(
                "bins",
                format!("must be at least 2, got {}", self.bins),
            ));
        }
        if self.experiment == ExperimentKind::Pairs && self.dataset_dir.is_none() {
            return Err(ConfigError::new(
                "dataset-dir",
                "required for the pairs experiment",
            ));
        }
        if self.experiment == ExperimentKind::CustomTree
            && (self.cardinalities.is_none() || self.hypotheses.is_none())
        {
            return Err(ConfigError::new(
                "hypotheses",
                "custom-tree needs `cardinalities` and `hypotheses` in the config file",
            ));
        }
        if self.experiment != ExperimentKind::Pairs {
            let hset = self.setup().and_then(|s| {
                s.hypothesis_set()
                    .map_err(|e| ConfigError::new("hypotheses", e.to_string()))
            })?;
            if self.true_hypothesis >= hset.len() {
                return Err(ConfigError::new(
                    "true-hypothesis",
                    format!("must be below {}, got {}", hset.len(), self.true_hypothesis),
                ));
            }
        }
        Ok(())
    }

    pub fn gain_options(&self) -> GainOptions {
        GainOptions {
            sampled_outcomes: self.sampled_outcomes,
            seed: self.seed,
            ..GainOptions::default()
        }
    }

    /// The simulated setup; pairs runs build theirs per pair.
    pub fn setup(&self) -> Result<Setup, ConfigError> {
        Ok(match self.experiment {
            ExperimentKind::Symmetric => Setup::Symmetric {
                k: self.k,
                rho: self.rho,
            },
            ExperimentKind::Asymmetric => Setup::Asymmetric { rho: self.rho },
            ExperimentKind::ThreeVar => Setup::ThreeVar {
                cardinality: self.k,
                rho: self.rho,
                heavy_cells: self.heavy_cells,
            },
            ExperimentKind::Context => Setup::Context {
                cardinality: self.k,
                rho: self.rho,
            },
            ExperimentKind::CustomTree => {
                let cards = self.cardinalities.clone().unwrap_or_default();
                let space = VariableSpace::with_cardinalities(&cards)
                    .map_err(|e| ConfigError::new("cardinalities", e.to_string()))?;
                Setup::Custom {
                    space,
                    hypotheses: self.hypotheses.clone().unwrap_or_default(),
                    rho: self.rho,
                    heavy_cells: self.heavy_cells,
                }
            }
            ExperimentKind::Pairs => {
                return Err(ConfigError::new(
                    "experiment",
                    "pairs runs have no single simulated setup",
                ))
            }
        })
    }

    pub fn hypothesis_set(&self) -> Result<HypothesisSet, ConfigError> {
        self.setup()?
            .hypothesis_set()
            .map_err(|e| ConfigError::new("hypotheses", e.to_string()))
    }
}
