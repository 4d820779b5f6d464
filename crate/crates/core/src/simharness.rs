//! Ground-truth distributions, the active-learning episode loop and
//! multi-restart aggregation.

use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gain::GainOptions;
use crate::hypotheses::{CausalOrder, ContextSwapSpec, HypothesisSet, HypothesisSpec};
use crate::inference::BeliefState;
use crate::numeric::mean_and_stderr;
use crate::ptree::{Assignment, Intervention, PTree, Statement, VariableSpace};
use crate::strategies::{candidates, select, StrategyKind};

/// Tolerance on the total mass of a joint table.
pub const JOINT_SUM_TOLERANCE: f64 = 1e-12;

/// A joint distribution over a full assignment grid, indexed like
/// [`VariableSpace::assignment_index`].
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    space: VariableSpace,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(space: VariableSpace, probs: Vec<f64>) -> Result<Self> {
        if probs.len() as u128 != space.num_assignments() {
            return Err(Error::param(
                "joint",
                format!(
                    "{} cells for {} assignments",
                    probs.len(),
                    space.num_assignments()
                ),
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::param(
                "joint",
                "probabilities must be finite and nonnegative",
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > JOINT_SUM_TOLERANCE {
            return Err(Error::param("joint", format!("probabilities sum to {sum}")));
        }
        Ok(Self { space, probs })
    }

    /// Normalizes nonnegative weights into a joint table.
    pub fn from_weights(space: VariableSpace, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::param(
                "joint",
                "weights must have positive finite total",
            ));
        }
        Self::new(space, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: &Assignment) -> f64 {
        self.probs[self.space.assignment_index(x)]
    }

    /// `p[a][b]` for a two-variable table.
    pub fn as_matrix(&self) -> Option<Vec<Vec<f64>>> {
        if self.space.len() != 2 {
            return None;
        }
        let k2 = self.space.cardinality(1);
        Some(self.probs.chunks(k2).map(<[f64]>::to_vec).collect())
    }

    /// Mass of each value of `variable` jointly with `context`.
    fn masses(&self, context: &[Statement], variable: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.space.cardinality(variable)];
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let x = self.space.assignment_at(i);
            if context.iter().all(|&s| x.satisfies(s)) {
                out[x.get(variable)] += p;
            }
        }
        out
    }
}

/// `p(x1, x2) = rho / K` on the diagonal and `(1 - rho) / (K (K - 1))` off it.
pub fn make_joint_symmetric(k: usize, rho: f64) -> Result<JointTable> {
    check_rho(rho)?;
    if k < 2 {
        return Err(Error::param("k", format!("must be at least 2, got {k}")));
    }
    let space = VariableSpace::with_cardinalities(&[k, k])?;
    let kf = k as f64;
    let probs = (0..k * k)
        .map(|i| {
            if i / k == i % k {
                rho / kf
            } else {
                (1.0 - rho) / (kf * (kf - 1.0))
            }
        })
        .collect();
    JointTable::new(space, probs)
}

/// Four values per variable. The whole first row of `X1` and the cell
/// (last row, first column) carry `rho / 5` each; the remaining eleven cells
/// carry `(1 - rho) / 11`.
pub fn make_joint_asymmetric(rho: f64) -> Result<JointTable> {
    check_rho(rho)?;
    let space = VariableSpace::with_cardinalities(&[4, 4])?;
    let probs = (0..16)
        .map(|i| {
            let (a, b) = (i / 4, i % 4);
            if a == 0 || (a == 3 && b == 0) {
                rho / 5.0
            } else {
                (1.0 - rho) / 11.0
            }
        })
        .collect();
    JointTable::new(space, probs)
}

/// `p = rho / M` on the `M` cells of `pattern`, `(1 - rho) / (C - M)` on the
/// other `C - M` cells.
pub fn make_joint_sparse(space: &VariableSpace, rho: f64, pattern: &[bool]) -> Result<JointTable> {
    check_rho(rho)?;
    let cells = space.num_assignments() as usize;
    if pattern.len() != cells {
        return Err(Error::param(
            "pattern",
            format!("{} cells for {cells} assignments", pattern.len()),
        ));
    }
    let m = pattern.iter().filter(|&&b| b).count();
    if m == 0 || m == cells {
        return Err(Error::param(
            "pattern",
            "must mark at least one cell and leave at least one unmarked",
        ));
    }
    let heavy = rho / m as f64;
    let light = (1.0 - rho) / (cells - m) as f64;
    let probs = pattern
        .iter()
        .map(|&b| if b { heavy } else { light })
        .collect();
    JointTable::new(space.clone(), probs)
}

/// Three variables of equal cardinality; see [`make_joint_sparse`].
pub fn make_joint_three(cardinality: usize, rho: f64, pattern: &[bool]) -> Result<JointTable> {
    let space = VariableSpace::with_cardinalities(&[cardinality; 3])?;
    make_joint_sparse(&space, rho, pattern)
}

/// Marks the cells where every variable takes the same value.
pub fn diagonal_pattern(space: &VariableSpace) -> Vec<bool> {
    space
        .assignments()
        .map(|x| x.values().windows(2).all(|w| w[0] == w[1]))
        .collect()
}

/// Marks `heavy_cells` distinct cells chosen uniformly at random.
pub fn random_pattern<R: rand::Rng + ?Sized>(
    space: &VariableSpace,
    heavy_cells: usize,
    rng: &mut R,
) -> Result<Vec<bool>> {
    let cells = space.num_assignments() as usize;
    if heavy_cells == 0 || heavy_cells >= cells {
        return Err(Error::param(
            "heavy_cells",
            format!("must lie in 1..{cells}, got {heavy_cells}"),
        ));
    }
    let mut pattern = vec![false; cells];
    for i in sample_indices(rng, cells, heavy_cells) {
        pattern[i] = true;
    }
    Ok(pattern)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::param(
            "rho",
            format!("must lie in [0, 1], got {rho}"),
        ));
    }
    Ok(())
}

/// The data-generating model: every hypothesis subtree carries the exact
/// conditionals of `joint`, and data is drawn from subtree `true_hypothesis`.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub true_hypothesis: usize,
    subtrees: Vec<PTree>,
    joint: JointTable,
}

impl GroundTruth {
    pub fn subtrees(&self) -> &[PTree] {
        &self.subtrees
    }

    pub fn true_tree(&self) -> &PTree {
        &self.subtrees[self.true_hypothesis]
    }

    pub fn joint(&self) -> &JointTable {
        &self.joint
    }

    pub fn sample<R: rand::Rng + ?Sized>(
        &self,
        j: &Intervention,
        rng: &mut R,
    ) -> Result<Assignment> {
        self.true_tree().sample(j, rng)
    }
}

/// Sets every node of every subtree to the conditional of `joint` given the
/// statements on its path. Contexts of probability zero get uniform
/// transitions; sampling never reaches them.
pub fn parameterize_truth(
    hset: &HypothesisSet,
    joint: &JointTable,
    true_hypothesis: usize,
) -> Result<GroundTruth> {
    if true_hypothesis >= hset.len() {
        return Err(Error::param(
            "true_hypothesis",
            format!("{true_hypothesis} is not below {}", hset.len()),
        ));
    }
    if joint.space().cardinalities() != hset.space().cardinalities() {
        return Err(Error::SpaceMismatch);
    }
    let subtrees = hset
        .subtrees()
        .iter()
        .map(|tree| {
            tree.map_theta(|node, context| {
                let v = node.split_variable().expect("internal node");
                let masses = joint.masses(context, v);
                let total: f64 = masses.iter().sum();
                node.children
                    .iter()
                    .map(|&c| {
                        let value = tree.node(c).statement.expect("child statement").value;
                        if total > 0.0 {
                            masses[value] / total
                        } else {
                            1.0 / node.num_children() as f64
                        }
                    })
                    .collect::<Vec<f64>>()
            })
            .map(renormalize)
        })
        .collect::<Result<Result<Vec<_>>>>()??;
    Ok(GroundTruth {
        true_hypothesis,
        subtrees,
        joint: joint.clone(),
    })
}

fn renormalize(tree: PTree) -> Result<PTree> {
    // exact division can leave sums a few ulps from one; keep them exact
    tree.map_theta(|node, _| {
        let s: f64 = node.theta.iter().sum();
        node.theta.iter().map(|t| t / s).collect()
    })
}

/// The experiment setups.
#[derive(Clone, Debug, PartialEq)]
pub enum Setup {
    /// Two variables, `K` values, correlation `rho` on the diagonal.
    Symmetric { k: usize, rho: f64 },
    /// Two four-valued variables with the asymmetric heavy-cell layout.
    Asymmetric { rho: f64 },
    /// All six orderings of three variables; the joint uses a random sparsity
    /// pattern drawn per restart.
    ThreeVar {
        cardinality: usize,
        rho: f64,
        heavy_cells: Option<usize>,
    },
    /// One chain and two context-swap hypotheses over three variables, with
    /// the diagonal sparsity pattern.
    Context { cardinality: usize, rho: f64 },
    /// User-provided hypotheses; random sparsity pattern per restart.
    Custom {
        space: VariableSpace,
        hypotheses: Vec<HypothesisSpec>,
        rho: f64,
        heavy_cells: Option<usize>,
    },
    /// Both orientations of two variables with a fixed empirical joint.
    Empirical { joint: JointTable },
}

impl Setup {
    pub fn hypothesis_set(&self) -> Result<HypothesisSet> {
        match self {
            Setup::Symmetric { k, .. } => {
                HypothesisSet::all_chains(&VariableSpace::with_cardinalities(&[*k, *k])?)
            }
            Setup::Asymmetric { .. } => {
                HypothesisSet::all_chains(&VariableSpace::with_cardinalities(&[4, 4])?)
            }
            Setup::ThreeVar { cardinality, .. } => {
                HypothesisSet::all_chains(&VariableSpace::with_cardinalities(&[*cardinality; 3])?)
            }
            Setup::Context { cardinality, .. } => {
                let space = VariableSpace::with_cardinalities(&[*cardinality; 3])?;
                if *cardinality < 3 {
                    return Err(Error::param(
                        "k",
                        "the context setup needs at least 3 values per variable",
                    ));
                }
                HypothesisSet::from_specs(&space, &context_hypotheses())
            }
            Setup::Custom {
                space, hypotheses, ..
            } => HypothesisSet::from_specs(space, hypotheses),
            Setup::Empirical { joint } => {
                if joint.space().len() != 2 {
                    return Err(Error::param("joint", "empirical setups are two-variable"));
                }
                HypothesisSet::all_chains(joint.space())
            }
        }
    }

    /// Whether the joint table is redrawn for every restart.
    pub fn varies_per_restart(&self) -> bool {
        matches!(self, Setup::ThreeVar { .. } | Setup::Custom { .. })
    }

    /// Joint table for one restart; `rng` only drives random sparsity patterns.
    pub fn joint<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<JointTable> {
        match self {
            Setup::Symmetric { k, rho } => make_joint_symmetric(*k, *rho),
            Setup::Asymmetric { rho } => make_joint_asymmetric(*rho),
            Setup::ThreeVar {
                cardinality,
                rho,
                heavy_cells,
            } => {
                let space = VariableSpace::with_cardinalities(&[*cardinality; 3])?;
                let m = heavy_cells.unwrap_or(cardinality * cardinality);
                make_joint_sparse(&space, *rho, &random_pattern(&space, m, rng)?)
            }
            Setup::Context { cardinality, rho } => {
                let space = VariableSpace::with_cardinalities(&[*cardinality; 3])?;
                make_joint_sparse(&space, *rho, &diagonal_pattern(&space))
            }
            Setup::Custom {
                space,
                rho,
                heavy_cells,
                ..
            } => {
                let cells = space.num_assignments() as usize;
                let default = space
                    .cardinalities()
                    .iter()
                    .max()
                    .copied()
                    .unwrap_or(2)
                    .pow(2)
                    .min(cells - 1);
                make_joint_sparse(
                    space,
                    *rho,
                    &random_pattern(space, heavy_cells.unwrap_or(default), rng)?,
                )
            }
            Setup::Empirical { joint } => Ok(joint.clone()),
        }
    }
}

/// `X1>X2>X3`, then `X1` reversing `X2, X3` at value 1, then at value 2.
pub fn context_hypotheses() -> Vec<HypothesisSpec> {
    let swap = |v: usize| {
        HypothesisSpec::ContextSwap(ContextSwapSpec {
            pivot: 0,
            swap_values: [v].into(),
            base_order: [1, 2],
        })
    };
    vec![
        HypothesisSpec::Chain(CausalOrder::new(vec![0, 1, 2]).expect("valid order")),
        swap(1),
        swap(2),
    ]
}

#[derive(Clone, Debug)]
pub struct EpisodeConfig {
    pub hypotheses: Arc<HypothesisSet>,
    pub truth: Arc<GroundTruth>,
    /// Observational records drawn before the first intervention.
    pub n_obs: usize,
    pub max_interventions: usize,
    pub alpha: f64,
    pub strategy: StrategyKind,
    pub threshold: f64,
    pub seed: u64,
    pub gain: GainOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub true_hypothesis: usize,
    /// Posterior after the observational records (entry 0) and after each
    /// intervention.
    pub posteriors: Vec<Vec<f64>>,
    pub chosen: Vec<Intervention>,
    /// First step whose posterior on the truth reaches the threshold, or
    /// `max_interventions` if none does.
    pub steps_to_certainty: usize,
}

impl EpisodeResult {
    pub fn posterior_true(&self, step: usize) -> f64 {
        self.posteriors[step][self.true_hypothesis]
    }

    pub fn final_posterior(&self) -> &[f64] {
        self.posteriors
            .last()
            .expect("at least the initial posterior")
    }
}

pub fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.5 && threshold < 1.0) {
        return Err(Error::param(
            "threshold",
            format!("must lie in (0.5, 1), got {threshold}"),
        ));
    }
    Ok(())
}

pub fn run_episode(cfg: &EpisodeConfig) -> Result<EpisodeResult> {
    check_threshold(cfg.threshold)?;
    let k_true = cfg.truth.true_hypothesis;
    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut choice_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    choice_rng.set_stream(1);

    let mut state = BeliefState::new(Arc::clone(&cfg.hypotheses), cfg.alpha)?;
    for _ in 0..cfg.n_obs {
        let x = cfg.truth.sample(&Intervention::OBSERVE, &mut data_rng)?;
        state.observe(&x, &Intervention::OBSERVE)?;
    }

    let cands = candidates(cfg.hypotheses.space());
    let mut posteriors = Vec::with_capacity(cfg.max_interventions + 1);
    let mut chosen = Vec::with_capacity(cfg.max_interventions);
    let mut steps_to_certainty = None;

    let initial = state.posterior().probabilities;
    if initial[k_true] >= cfg.threshold {
        steps_to_certainty = Some(0);
    }
    posteriors.push(initial);

    for step in 1..=cfg.max_interventions {
        let opts = GainOptions {
            seed: cfg.gain.seed ^ cfg.seed.rotate_left(17) ^ step as u64,
            ..cfg.gain
        };
        let j = select(
            cfg.strategy,
            &state,
            &cands,
            &mut choice_rng,
            Some(cfg.truth.subtrees()),
            &opts,
        )?;
        let x = cfg.truth.sample(&j, &mut data_rng)?;
        state.observe(&x, &j)?;
        let post = state.posterior().probabilities;
        if steps_to_certainty.is_none() && post[k_true] >= cfg.threshold {
            steps_to_certainty = Some(step);
        }
        posteriors.push(post);
        chosen.push(j);
    }

    Ok(EpisodeResult {
        true_hypothesis: k_true,
        posteriors,
        chosen,
        steps_to_certainty: steps_to_certainty.unwrap_or(cfg.max_interventions),
    })
}

/// Experiment parameters shared by every strategy and restart.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub setup: Setup,
    pub true_hypothesis: usize,
    pub n_obs: usize,
    pub max_interventions: usize,
    pub alpha: f64,
    pub threshold: f64,
    pub seed: u64,
    pub gain: GainOptions,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub strategy: StrategyKind,
    pub episodes: Vec<EpisodeResult>,
    /// Per-step mean posterior on the true hypothesis, and its standard error.
    pub mean_curve: Vec<f64>,
    pub stderr_curve: Vec<f64>,
    pub mean_steps: f64,
    pub stderr_steps: f64,
}

/// Seed of restart `r`; identical across strategies so that each restart
/// sees the same observational data and truth.
pub fn restart_seed(base: u64, restart: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = base.wrapping_add((restart as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    strategy: StrategyKind,
    restarts: usize,
) -> Result<ExperimentResult> {
    if restarts == 0 {
        return Err(Error::param("restarts", "must be at least 1"));
    }
    check_threshold(cfg.threshold)?;
    let hset = Arc::new(cfg.setup.hypothesis_set()?);
    let fixed_truth = if cfg.setup.varies_per_restart() {
        None
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let joint = cfg.setup.joint(&mut rng)?;
        Some(Arc::new(parameterize_truth(
            &hset,
            &joint,
            cfg.true_hypothesis,
        )?))
    };

    let episodes = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let seed = restart_seed(cfg.seed, r);
            let truth = match &fixed_truth {
                Some(t) => Arc::clone(t),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(2);
                    let joint = cfg.setup.joint(&mut rng)?;
                    Arc::new(parameterize_truth(&hset, &joint, cfg.true_hypothesis)?)
                }
            };
            run_episode(&EpisodeConfig {
                hypotheses: Arc::clone(&hset),
                truth,
                n_obs: cfg.n_obs,
                max_interventions: cfg.max_interventions,
                alpha: cfg.alpha,
                strategy,
                threshold: cfg.threshold,
                seed,
                gain: cfg.gain,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(aggregate(strategy, episodes))
}

pub fn aggregate(strategy: StrategyKind, episodes: Vec<EpisodeResult>) -> ExperimentResult {
    let steps = episodes.first().map_or(0, |e| e.posteriors.len());
    let (mean_curve, stderr_curve) = (0..steps)
        .map(|t| {
            let vals: Vec<f64> = episodes.iter().map(|e| e.posterior_true(t)).collect();
            mean_and_stderr(&vals)
        })
        .unzip();
    let certainty: Vec<f64> = episodes
        .iter()
        .map(|e| e.steps_to_certainty as f64)
        .collect();
    let (mean_steps, stderr_steps) = mean_and_stderr(&certainty);
    ExperimentResult {
        strategy,
        episodes,
        mean_curve,
        stderr_curve,
        mean_steps,
        stderr_steps,
    }
}
