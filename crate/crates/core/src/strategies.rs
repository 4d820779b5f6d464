//! Intervention-selection policies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gain::{actual_gain, expected_gain, GainOptions};
use crate::hypotheses::chain_order;
use crate::inference::{BeliefState, Posterior};
use crate::numeric::entropy;
use crate::ptree::{Intervention, PTree, VariableSpace};

/// Scores closer than this (relative to the best score, floor 1) count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    ExpectedGain,
    ActualGain,
    Random,
    Entropy,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::ActualGain,
        StrategyKind::ExpectedGain,
        StrategyKind::Entropy,
        StrategyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::ExpectedGain => "expected",
            StrategyKind::ActualGain => "actual",
            StrategyKind::Random => "random",
            StrategyKind::Entropy => "entropy",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "expected" => Ok(StrategyKind::ExpectedGain),
            "actual" => Ok(StrategyKind::ActualGain),
            "random" => Ok(StrategyKind::Random),
            "entropy" => Ok(StrategyKind::Entropy),
            other => Err(Error::param(
                "strategy",
                format!(
                    "unknown strategy `{other}`; expected one of expected, actual, random, entropy"
                ),
            )),
        }
    }
}

/// Every single-variable intervention, ordered by (variable, value).
pub fn candidates(space: &VariableSpace) -> Vec<Intervention> {
    (0..space.len())
        .flat_map(|v| (0..space.cardinality(v)).map(move |x| Intervention::on(v, x)))
        .collect()
}

/// Index of the best score; near-ties resolve to the smallest intervention.
fn best_index(cands: &[Intervention], scores: &[f64], maximize: bool) -> usize {
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by_key(|&i| cands[i]);
    let mut best = order[0];
    for &i in &order[1..] {
        let (s, b) = (scores[i], scores[best]);
        let tol = TIE_TOLERANCE * b.abs().max(1.0);
        let better = if maximize { s > b + tol } else { s < b - tol };
        if better || b.is_nan() {
            best = i;
        }
    }
    best
}

/// Chooses the next intervention. `truth` (the truth-parameterized subtree of
/// every hypothesis) is required by [`StrategyKind::ActualGain`].
pub fn select<R: Rng + ?Sized>(
    strategy: StrategyKind,
    state: &BeliefState,
    cands: &[Intervention],
    rng: &mut R,
    truth: Option<&[PTree]>,
    opts: &GainOptions,
) -> Result<Intervention> {
    if cands.is_empty() {
        return Err(Error::param("candidates", "no candidate interventions"));
    }
    match strategy {
        StrategyKind::Random => Ok(cands[rng.random_range(0..cands.len())]),
        StrategyKind::ExpectedGain => {
            let scores = cands
                .par_iter()
                .map(|j| expected_gain(state, j, opts).map(|g| g.score))
                .collect::<Result<Vec<_>>>()?;
            Ok(cands[best_index(cands, &scores, true)])
        }
        StrategyKind::ActualGain => {
            let truth = truth.ok_or_else(|| Error::UnsupportedStrategy {
                strategy: "actual",
                reason: "requires the ground-truth model".into(),
            })?;
            let scores = cands
                .par_iter()
                .map(|j| actual_gain(state, j, truth, opts).map(|g| g.score))
                .collect::<Result<Vec<_>>>()?;
            Ok(cands[best_index(cands, &scores, true)])
        }
        StrategyKind::Entropy => {
            let orders = hypothesis_orders(state)?;
            let scores = cands
                .par_iter()
                .map(|j| expected_entropy_with(state, &orders, j, opts))
                .collect::<Result<Vec<_>>>()?;
            Ok(cands[best_index(cands, &scores, false)])
        }
    }
}

/// For each unordered pair `(i, j)`, `i < j`, the probabilities of
/// `[i -> j, j -> i, no edge]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeBeliefs {
    pub pairs: Vec<((usize, usize), [f64; 3])>,
}

impl EdgeBeliefs {
    pub fn get(&self, i: usize, j: usize) -> Option<[f64; 3]> {
        self.pairs
            .iter()
            .find(|(p, _)| *p == (i, j))
            .map(|(_, b)| *b)
    }
}

fn hypothesis_orders(state: &BeliefState) -> Result<Vec<Vec<usize>>> {
    state
        .hypotheses()
        .subtrees()
        .iter()
        .zip(state.hypotheses().labels())
        .map(|(t, label)| {
            chain_order(t).ok_or_else(|| Error::UnsupportedStrategy {
                strategy: "entropy",
                reason: format!("hypothesis `{label}` has a context-dependent order and is not a causal Bayesian network"),
            })
        })
        .collect()
}

fn beliefs_from(orders: &[Vec<usize>], probabilities: &[f64]) -> EdgeBeliefs {
    let m = orders.first().map_or(0, Vec::len);
    let positions: Vec<Vec<usize>> = orders
        .iter()
        .map(|o| {
            let mut pos = vec![0; m];
            for (p, &v) in o.iter().enumerate() {
                pos[v] = p;
            }
            pos
        })
        .collect();
    let mut pairs = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            let mut b = [0.0; 3];
            for (pos, &p) in positions.iter().zip(probabilities) {
                if pos[i] < pos[j] {
                    b[0] += p;
                } else {
                    b[1] += p;
                }
            }
            // fully connected hypotheses never leave a pair unlinked
            b[2] = 0.0;
            pairs.push(((i, j), b));
        }
    }
    EdgeBeliefs { pairs }
}

pub fn edge_beliefs(state: &BeliefState) -> Result<EdgeBeliefs> {
    let orders = hypothesis_orders(state)?;
    Ok(beliefs_from(&orders, &state.posterior().probabilities))
}

/// Sum over variable pairs of the Shannon entropy (nats) of the pair's edge
/// distribution.
pub fn entropy_cost(beliefs: &EdgeBeliefs) -> f64 {
    beliefs.pairs.iter().map(|(_, b)| entropy(b)).sum()
}

pub fn entropy_cost_of(state: &BeliefState) -> Result<f64> {
    Ok(entropy_cost(&edge_beliefs(state)?))
}

/// Expected edge-entropy cost after performing `j`, with outcomes weighted
/// by the posterior predictives.
pub fn expected_entropy_after(
    state: &BeliefState,
    j: &Intervention,
    opts: &GainOptions,
) -> Result<f64> {
    let orders = hypothesis_orders(state)?;
    expected_entropy_with(state, &orders, j, opts)
}

fn expected_entropy_with(
    state: &BeliefState,
    orders: &[Vec<usize>],
    j: &Intervention,
    opts: &GainOptions,
) -> Result<f64> {
    let space = state.hypotheses().space();
    if j.is_observational() {
        return Err(Error::param(
            "intervention",
            "expected entropy is defined for interventions only",
        ));
    }
    space.check_intervention(j)?;
    let outcomes = space.num_consistent(j);
    if outcomes > opts.max_outcomes as u128 {
        return Err(Error::Capacity {
            outcomes,
            cap: opts.max_outcomes,
        });
    }
    let post = state.posterior();
    let s = post.len();
    let mut total = 0.0;
    for x in space.consistent_assignments(j) {
        let lp: Vec<f64> = (0..s).map(|k| state.log_predictive(k, &x, j)).collect();
        // outcome probability under the agent's mixture
        let px: f64 = (0..s).map(|k| post.probabilities[k] * lp[k].exp()).sum();
        if px == 0.0 {
            continue;
        }
        let updated = Posterior::from_log_weights(
            post.log_weights
                .iter()
                .zip(&lp)
                .map(|(w, l)| w + l)
                .collect(),
        );
        total += px * entropy_cost(&beliefs_from(orders, &updated.probabilities));
    }
    Ok(total)
}
