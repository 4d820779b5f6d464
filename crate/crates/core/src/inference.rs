//! Exact Bayesian inference over the hypothesis variable.
//!
//! Each hypothesis keeps its own transition counts, since one record follows a
//! different path in every subtree. A record observed under `do(X = x)` is not
//! counted at nodes whose children assign `X`: that choice was forced, not
//! generated by the mechanism. Evidence is the Dirichlet-multinomial marginal
//! likelihood, computed in nats with log-gamma.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hypotheses::{assign_priors, HypothesisSet, PriorTable};
use crate::numeric::{ln_gamma, normalize_log_weights};
use crate::ptree::{Assignment, Intervention, NodeId, PTree};

/// Default cap on the number of outcomes enumerated for a distribution.
pub const DEFAULT_MAX_OUTCOMES: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub assignment: Assignment,
    pub intervention: Intervention,
}

impl Record {
    pub fn new(assignment: Assignment, intervention: Intervention) -> Self {
        Self {
            assignment,
            intervention,
        }
    }

    pub fn observed(assignment: Assignment) -> Self {
        Self::new(assignment, Intervention::OBSERVE)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(records: Vec<Record>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }
}

/// Transition counts `N_{j|n}` per hypothesis, node and child.
///
/// Counts are stored as reals so that fractional pseudo-data (for example
/// `N * p(x)` for an exact joint table) can be loaded; records add 1.
#[derive(Clone, Debug, PartialEq)]
pub struct CountTable {
    counts: Vec<Vec<Vec<f64>>>,
    total_records: f64,
}

impl CountTable {
    pub fn new(hset: &HypothesisSet) -> Self {
        let counts = hset
            .subtrees()
            .iter()
            .map(|t| {
                t.nodes()
                    .iter()
                    .map(|n| vec![0.0; n.num_children()])
                    .collect()
            })
            .collect();
        Self {
            counts,
            total_records: 0.0,
        }
    }

    pub fn from_dataset(hset: &HypothesisSet, data: &Dataset) -> Result<Self> {
        let mut table = Self::new(hset);
        for r in &data.records {
            table.update(hset, &r.assignment, &r.intervention)?;
        }
        Ok(table)
    }

    pub fn count(&self, k: usize, n: NodeId, child: usize) -> f64 {
        self.counts[k][n][child]
    }

    pub fn node_counts(&self, k: usize, n: NodeId) -> &[f64] {
        &self.counts[k][n]
    }

    /// Total weight of records added so far.
    pub fn total_records(&self) -> f64 {
        self.total_records
    }

    /// Adds one record.
    pub fn update(&mut self, hset: &HypothesisSet, x: &Assignment, j: &Intervention) -> Result<()> {
        self.add_weighted(hset, x, j, 1.0)
    }

    /// Adds a record with weight `w`; the count at every non-forced node on
    /// the record's path grows by `w`.
    pub fn add_weighted(
        &mut self,
        hset: &HypothesisSet,
        x: &Assignment,
        j: &Intervention,
        w: f64,
    ) -> Result<()> {
        hset.space().check_assignment(x)?;
        hset.space().check_intervention(j)?;
        j.check_record(x)?;
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::param(
                "weight",
                format!("must be finite and nonnegative, got {w}"),
            ));
        }
        let forced = j.variable();
        for (k, tree) in hset.subtrees().iter().enumerate() {
            let counts = &mut self.counts[k];
            walk_path(tree, x, |id, v, c| {
                if forced != Some(v) {
                    counts[id][c] += w;
                }
            });
        }
        self.total_records += w;
        Ok(())
    }

    /// A copy with one more record.
    pub fn with_record(
        &self,
        hset: &HypothesisSet,
        x: &Assignment,
        j: &Intervention,
    ) -> Result<Self> {
        let mut t = self.clone();
        t.update(hset, x, j)?;
        Ok(t)
    }
}

/// Calls `f(node, split_variable, child_index)` for every internal node on
/// the realization path of `x`. `x` must already be validated.
#[inline]
pub(crate) fn walk_path<F: FnMut(NodeId, usize, usize)>(tree: &PTree, x: &Assignment, mut f: F) {
    let mut id = 0;
    while let Some(v) = tree.node(id).split_variable() {
        let node = tree.node(id);
        let c = node.child_index_for(x.get(v));
        f(id, v, c);
        id = node.children[c];
    }
}

/// Log Dirichlet-multinomial evidence of hypothesis `k`, including the prior
/// normalizer `Gamma(|ch| a) / Gamma(a)^|ch|` at every node. Zero for an
/// empty table.
pub fn log_marginal_likelihood(
    hset: &HypothesisSet,
    table: &CountTable,
    priors: &PriorTable,
    k: usize,
) -> f64 {
    log_evidence(hset, table, priors, k, true)
}

/// The same product without the per-node prior normalizer. For hypotheses
/// sharing a space and using [`assign_priors`], it differs from
/// [`log_marginal_likelihood`] by a constant independent of `k`.
pub fn log_marginal_likelihood_unnormalized(
    hset: &HypothesisSet,
    table: &CountTable,
    priors: &PriorTable,
    k: usize,
) -> f64 {
    log_evidence(hset, table, priors, k, false)
}

fn log_evidence(
    hset: &HypothesisSet,
    table: &CountTable,
    priors: &PriorTable,
    k: usize,
    normalized: bool,
) -> f64 {
    let tree = hset.subtree(k);
    let mut total = 0.0;
    for node in tree.nodes().iter().filter(|n| !n.is_leaf()) {
        let a = priors.concentration(k, node.id);
        let width = node.num_children() as f64;
        let counts = table.node_counts(k, node.id);
        let n: f64 = counts.iter().sum();
        if normalized {
            if n == 0.0 {
                continue;
            }
            total += ln_gamma(width * a) - width * ln_gamma(a);
        }
        total += counts.iter().map(|&c| ln_gamma(c + a)).sum::<f64>() - ln_gamma(n + width * a);
    }
    total
}

/// Posterior over hypotheses.
#[derive(Clone, Debug, PartialEq)]
pub struct Posterior {
    /// Normalized log probabilities.
    pub log_weights: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Posterior {
    /// Normalizes unnormalized log weights with log-sum-exp.
    pub fn from_log_weights(mut log_weights: Vec<f64>) -> Self {
        let probabilities = normalize_log_weights(&mut log_weights);
        Self {
            log_weights,
            probabilities,
        }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Index of the most probable hypothesis (lowest index on ties).
    pub fn map_index(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = k;
            }
        }
        best
    }
}

pub fn posterior(hset: &HypothesisSet, table: &CountTable, priors: &PriorTable) -> Posterior {
    let log_weights = (0..hset.len())
        .map(|k| hset.prior_g()[k].ln() + log_marginal_likelihood(hset, table, priors, k))
        .collect();
    Posterior::from_log_weights(log_weights)
}

/// Log posterior-predictive probability of a record under hypothesis `k`:
/// the sum, over non-forced nodes on the record's path, of
/// `ln((N_c + a) / (N + |ch| a))`. Returns `-inf` when `x` contradicts `j`.
pub fn log_predictive(
    hset: &HypothesisSet,
    table: &CountTable,
    priors: &PriorTable,
    k: usize,
    x: &Assignment,
    j: &Intervention,
) -> f64 {
    if !j.admits(x) {
        return f64::NEG_INFINITY;
    }
    let forced = j.variable();
    let mut total = 0.0;
    walk_path(hset.subtree(k), x, |id, v, c| {
        if forced != Some(v) {
            let a = priors.concentration(k, id);
            let counts = table.node_counts(k, id);
            let n: f64 = counts.iter().sum();
            total += ((counts[c] + a) / (n + counts.len() as f64 * a)).ln();
        }
    });
    total
}

/// Posterior-predictive distribution of hypothesis `k` under `j`, dense over
/// assignment indices of the space.
pub fn predictive(
    hset: &HypothesisSet,
    table: &CountTable,
    priors: &PriorTable,
    k: usize,
    j: &Intervention,
) -> Result<Vec<f64>> {
    let space = hset.space();
    space.check_intervention(j)?;
    let total = space.num_assignments();
    if total > DEFAULT_MAX_OUTCOMES as u128 {
        return Err(Error::Capacity {
            outcomes: total,
            cap: DEFAULT_MAX_OUTCOMES,
        });
    }
    Ok(space
        .assignments()
        .map(|x| log_predictive(hset, table, priors, k, &x, j).exp())
        .collect())
}

/// The agent's state: hypotheses, their priors, and the counts gathered so far.
#[derive(Clone, Debug)]
pub struct BeliefState {
    hset: Arc<HypothesisSet>,
    priors: Arc<PriorTable>,
    counts: CountTable,
}

impl BeliefState {
    pub fn new(hset: Arc<HypothesisSet>, alpha: f64) -> Result<Self> {
        let priors = Arc::new(assign_priors(&hset, alpha)?);
        let counts = CountTable::new(&hset);
        Ok(Self {
            hset,
            priors,
            counts,
        })
    }

    pub fn with_counts(
        hset: Arc<HypothesisSet>,
        priors: Arc<PriorTable>,
        counts: CountTable,
    ) -> Self {
        Self {
            hset,
            priors,
            counts,
        }
    }

    pub fn hypotheses(&self) -> &HypothesisSet {
        &self.hset
    }

    pub fn hypotheses_arc(&self) -> &Arc<HypothesisSet> {
        &self.hset
    }

    pub fn priors(&self) -> &PriorTable {
        &self.priors
    }

    pub fn priors_arc(&self) -> &Arc<PriorTable> {
        &self.priors
    }

    pub fn counts(&self) -> &CountTable {
        &self.counts
    }

    pub fn counts_mut(&mut self) -> &mut CountTable {
        &mut self.counts
    }

    pub fn observe(&mut self, x: &Assignment, j: &Intervention) -> Result<()> {
        self.counts.update(&self.hset, x, j)
    }

    pub fn observe_all(&mut self, data: &Dataset) -> Result<()> {
        for r in &data.records {
            self.observe(&r.assignment, &r.intervention)?;
        }
        Ok(())
    }

    /// A copy with one more record; `self` is unchanged.
    pub fn with_record(&self, x: &Assignment, j: &Intervention) -> Result<Self> {
        Ok(Self {
            hset: Arc::clone(&self.hset),
            priors: Arc::clone(&self.priors),
            counts: self.counts.with_record(&self.hset, x, j)?,
        })
    }

    pub fn posterior(&self) -> Posterior {
        posterior(&self.hset, &self.counts, &self.priors)
    }

    pub fn log_marginal_likelihood(&self, k: usize) -> f64 {
        log_marginal_likelihood(&self.hset, &self.counts, &self.priors, k)
    }

    pub fn log_predictive(&self, k: usize, x: &Assignment, j: &Intervention) -> f64 {
        log_predictive(&self.hset, &self.counts, &self.priors, k, x, j)
    }

    pub fn predictive(&self, k: usize, j: &Intervention) -> Result<Vec<f64>> {
        predictive(&self.hset, &self.counts, &self.priors, k, j)
    }

    /// Posterior after a hypothetical extra record, without copying counts:
    /// each hypothesis's evidence grows by its log predictive of the record.
    pub fn posterior_after(
        &self,
        current: &Posterior,
        x: &Assignment,
        j: &Intervention,
    ) -> Posterior {
        let log_weights = current
            .log_weights
            .iter()
            .enumerate()
            .map(|(k, lw)| lw + self.log_predictive(k, x, j))
            .collect();
        Posterior::from_log_weights(log_weights)
    }
}
