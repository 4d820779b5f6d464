use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ptree_learn::gain::{actual_gain, expected_gain};
use ptree_learn::pairsdata::{run_pairs_benchmark, PairsConfig};
use ptree_learn::simharness::{
    parameterize_truth, run_experiment, ExperimentConfig, ExperimentResult,
};
use ptree_learn::strategies::candidates;
use ptree_learn::{formats, BeliefState, Error as CoreError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigArgs, ConfigError, ExperimentKind, RunConfig};
use crate::output::{self, fmt_real};
use crate::svg;

#[derive(Debug, Parser)]
#[command(
    name = "ptree-learn",
    version,
    about = "Active learning of causal probability trees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment for every selected strategy and write CSVs and a chart
    Run(RunArgs),
    /// Score every single-variable intervention on a recorded dataset
    ScoreInterventions(ScoreArgs),
    /// Print a hypothesis tree as JSON
    DumpTree(DumpArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Dataset CSV; scores the empty dataset when omitted
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Also report the actual gain under the simulated truth
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Index of the hypothesis subtree
    #[arg(long, default_value_t = 0)]
    pub hypothesis: usize,
    /// Use the ground-truth probabilities instead of uniform ones
    #[arg(long, conflicts_with = "meta")]
    pub truth: bool,
    /// Print the whole meta tree, hypothesis variable included
    #[arg(long)]
    pub meta: bool,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit code 1.
    Usage(String),
    /// Failure while running; exit code 2.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::UnsupportedStrategy { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub fn execute(cli: Cli, env_out: Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = RunConfig::resolve(&args.config, env_out)?;
            cmd_run(&cfg, stdout)
        }
        Command::ScoreInterventions(args) => {
            let cfg = RunConfig::resolve(&args.config, env_out)?;
            cmd_score(&cfg, args.dataset.as_deref(), args.oracle, stdout)
        }
        Command::DumpTree(args) => {
            let cfg = RunConfig::resolve(&args.config, env_out)?;
            cmd_dump(&cfg, &args, stdout)
        }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> anyhow::Result<()> {
    let mut w = create(path)?;
    f(&mut w).with_context(|| format!("cannot write {}", path.display()))?;
    w.flush()
        .with_context(|| format!("cannot write {}", path.display()))
}

pub fn experiment_config(cfg: &RunConfig) -> Result<ExperimentConfig, ConfigError> {
    Ok(ExperimentConfig {
        setup: cfg.setup()?,
        true_hypothesis: cfg.true_hypothesis,
        n_obs: cfg.n_obs,
        max_interventions: cfg.max_interventions,
        alpha: cfg.alpha,
        threshold: cfg.threshold,
        seed: cfg.seed,
        gain: cfg.gain_options(),
    })
}

/// Runs every strategy with shared restart seeds.
pub fn run_strategies(cfg: &RunConfig) -> Result<Vec<ExperimentResult>, CliError> {
    let exp = experiment_config(cfg)?;
    cfg.strategies
        .iter()
        .map(|&s| run_experiment(&exp, s, cfg.restarts).map_err(CliError::from))
        .collect()
}

pub fn cmd_run(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    if cfg.experiment == ExperimentKind::Pairs {
        let dir = cfg.dataset_dir.as_deref().expect("validated");
        let summary = run_pairs_benchmark(
            dir,
            &PairsConfig {
                n_obs: cfg.n_obs,
                strategies: cfg.strategies.clone(),
                restarts: cfg.restarts,
                alpha: cfg.alpha,
                max_interventions: cfg.max_interventions,
                threshold: cfg.threshold,
                bins: cfg.bins,
                seed: cfg.seed,
                gain: cfg.gain_options(),
            },
        )?;
        write_file(&cfg.out.join("pairs.csv"), |w| {
            output::write_pairs_table(w, &summary)
        })?;
        write_file(&cfg.out.join("pairs_detail.csv"), |w| {
            output::write_pairs_detail(w, &summary)
        })?;
        for row in &summary.rows {
            writeln!(
                stdout,
                "{:<9} {} ± {} interventions over {} pairs",
                row.strategy.name(),
                fmt_real(row.weighted_mean),
                fmt_real(row.weighted_stderr),
                summary.pairs.len()
            )
            .context("stdout")?;
        }
        return Ok(());
    }

    let results = run_strategies(cfg)?;
    write_file(&cfg.out.join("episodes.csv"), |w| {
        output::write_episodes(w, &results)
    })?;
    write_file(&cfg.out.join("aggregate.csv"), |w| {
        output::write_aggregate(w, &results)
    })?;
    write_file(&cfg.out.join("summary.csv"), |w| {
        output::write_summary(w, &results)
    })?;
    let title = format!("{} experiment, {} restarts", cfg.experiment, cfg.restarts);
    fs::write(
        cfg.out.join("curves.svg"),
        svg::render_curves(&results, &title),
    )
    .with_context(|| format!("cannot write {}", cfg.out.join("curves.svg").display()))?;
    for r in &results {
        writeln!(
            stdout,
            "{:<9} steps to certainty {} ± {}",
            r.strategy.name(),
            fmt_real(r.mean_steps),
            fmt_real(r.stderr_steps)
        )
        .context("stdout")?;
    }
    Ok(())
}

fn pairs_unsupported(what: &str) -> CliError {
    CliError::Usage(format!("{what} needs a simulated experiment, not `pairs`"))
}

pub fn cmd_score(
    cfg: &RunConfig,
    dataset: Option<&Path>,
    oracle: bool,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    if cfg.experiment == ExperimentKind::Pairs {
        return Err(pairs_unsupported("score-interventions"));
    }
    let hset = Arc::new(cfg.hypothesis_set()?);
    let mut state = BeliefState::new(Arc::clone(&hset), cfg.alpha)?;
    if let Some(path) = dataset {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let data = formats::read_dataset(file, hset.space())
            .with_context(|| format!("cannot read dataset {}", path.display()))?;
        state.observe_all(&data)?;
    }
    let truth = if oracle {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let joint = cfg.setup()?.joint(&mut rng)?;
        Some(parameterize_truth(&hset, &joint, cfg.true_hypothesis)?)
    } else {
        None
    };
    let opts = cfg.gain_options();

    let mut w = csv::Writer::from_writer(stdout);
    let mut header = vec!["intervention_var", "intervention_val", "expected_gain"];
    if oracle {
        header.push("actual_gain");
    }
    w.write_record(&header).context("stdout")?;
    for j in candidates(hset.space()) {
        let s = j.target.expect("candidate interventions are nonempty");
        let mut row = vec![
            s.variable.to_string(),
            s.value.to_string(),
            fmt_real(expected_gain(&state, &j, &opts)?.score),
        ];
        if let Some(t) = &truth {
            row.push(fmt_real(
                actual_gain(&state, &j, t.subtrees(), &opts)?.score,
            ));
        }
        w.write_record(&row).context("stdout")?;
    }
    w.flush().context("stdout")?;
    Ok(())
}

pub fn cmd_dump(cfg: &RunConfig, args: &DumpArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if cfg.experiment == ExperimentKind::Pairs {
        return Err(pairs_unsupported("dump-tree"));
    }
    let hset = cfg.hypothesis_set()?;
    if !args.meta && args.hypothesis >= hset.len() {
        return Err(CliError::Usage(format!(
            "invalid `hypothesis`: must be below {}, got {}",
            hset.len(),
            args.hypothesis
        )));
    }
    let tree = if args.meta {
        hset.meta_tree()?
    } else if args.truth {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let joint = cfg.setup()?.joint(&mut rng)?;
        parameterize_truth(&hset, &joint, cfg.true_hypothesis)?.subtrees()[args.hypothesis].clone()
    } else {
        hset.subtree(args.hypothesis).clone()
    };
    writeln!(stdout, "{}", formats::tree_to_json(&tree)?).context("stdout")?;
    Ok(())
}
