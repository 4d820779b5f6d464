//! Information-gain scores for candidate interventions.
//!
//! The gain of observing `(x, do(X=v))` for hypothesis `k` is the change in
//! the evidence `log(p_k / (1 - p_k))`. Adding one record multiplies each
//! hypothesis's marginal likelihood by its posterior predictive probability
//! of that record, so the updated posterior is obtained from the current log
//! weights and the predictive alone; no count table is copied or mutated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::inference::{BeliefState, CountTable, Posterior, DEFAULT_MAX_OUTCOMES};
use crate::numeric::{clamp_prob, log_sum_exp, PROB_EPSILON};
use crate::ptree::{draw_index, Assignment, Intervention, PTree};

/// Log posterior odds of a hypothesis against all the others, in nats.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct EvidenceNats(pub f64);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainScore {
    pub intervention: Intervention,
    pub score: f64,
}

/// How outcome sums are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GainOptions {
    /// Largest outcome space that may be enumerated exhaustively.
    pub max_outcomes: usize,
    /// When set, each inner sum over outcomes is replaced by the mean over
    /// this many outcomes drawn from the relevant distribution.
    pub sampled_outcomes: Option<usize>,
    /// Seed for sampled outcomes; combined with the intervention so scores
    /// are reproducible.
    pub seed: u64,
}

impl Default for GainOptions {
    fn default() -> Self {
        Self {
            max_outcomes: DEFAULT_MAX_OUTCOMES,
            sampled_outcomes: None,
            seed: 0,
        }
    }
}

pub fn evidence_in_favor(post: &Posterior, k: usize) -> EvidenceNats {
    EvidenceNats(evidence_from_log_weights(&post.log_weights, k))
}

fn evidence_from_log_weights(log_weights: &[f64], k: usize) -> f64 {
    let others: Vec<f64> = log_weights
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, &w)| w)
        .collect();
    let p = clamp_prob(log_weights[k].exp());
    let rest = clamp_prob(log_sum_exp(&others).exp());
    p.ln() - rest.ln()
}

/// Increase in evidence for `k` after observing `x` under `j`.
pub fn information_gain(
    state: &BeliefState,
    x: &Assignment,
    j: &Intervention,
    k: usize,
) -> Result<f64> {
    let space = state.hypotheses().space();
    space.check_assignment(x)?;
    space.check_intervention(j)?;
    j.check_record(x)?;
    let before = state.posterior();
    let after = state.posterior_after(&before, x, j);
    Ok(evidence_in_favor(&after, k).0 - evidence_in_favor(&before, k).0)
}

fn check_candidate(
    state: &BeliefState,
    j: &Intervention,
    opts: &GainOptions,
) -> Result<Vec<Assignment>> {
    let space = state.hypotheses().space();
    if j.is_observational() {
        return Err(Error::param(
            "intervention",
            "gain is defined for interventions only",
        ));
    }
    space.check_intervention(j)?;
    let outcomes = space.num_consistent(j);
    if opts.sampled_outcomes.is_some() {
        return Ok(Vec::new());
    }
    if outcomes > opts.max_outcomes as u128 {
        return Err(Error::Capacity {
            outcomes,
            cap: opts.max_outcomes,
        });
    }
    Ok(space.consistent_assignments(j).collect())
}

/// Gains `I(k | x)` for every hypothesis given one outcome, from the current
/// log weights and the per-hypothesis log predictives of that outcome.
fn gains_for_outcome(log_weights: &[f64], before: &[f64], log_pred: &[f64]) -> Vec<f64> {
    let mut updated: Vec<f64> = log_weights
        .iter()
        .zip(log_pred)
        .map(|(w, l)| w + l)
        .collect();
    let z = log_sum_exp(&updated);
    for w in updated.iter_mut() {
        *w -= z;
    }
    (0..log_weights.len())
        .map(|k| evidence_from_log_weights(&updated, k) - before[k])
        .collect()
}

/// Expected evidence gain of `j` under the agent's own beliefs: outcomes are
/// weighted by each hypothesis's posterior predictive, hypotheses by their
/// posterior.
pub fn expected_gain(
    state: &BeliefState,
    j: &Intervention,
    opts: &GainOptions,
) -> Result<GainScore> {
    let outcomes = check_candidate(state, j, opts)?;
    let post = state.posterior();
    let s = post.len();
    let before: Vec<f64> = (0..s).map(|k| evidence_in_favor(&post, k).0).collect();

    let score = match opts.sampled_outcomes {
        Some(n) => {
            let mut rng = outcome_rng(opts.seed, j);
            let mut total = 0.0;
            for k in 0..s {
                if post.probabilities[k] == 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for _ in 0..n {
                    let x = sample_predictive(state, k, j, &mut rng);
                    let lp: Vec<f64> = (0..s).map(|h| state.log_predictive(h, &x, j)).collect();
                    acc += gains_for_outcome(&post.log_weights, &before, &lp)[k];
                }
                total += post.probabilities[k] * acc / n.max(1) as f64;
            }
            total
        }
        None => {
            let mut total = 0.0;
            for x in &outcomes {
                let lp: Vec<f64> = (0..s).map(|h| state.log_predictive(h, x, j)).collect();
                let gains = gains_for_outcome(&post.log_weights, &before, &lp);
                for k in 0..s {
                    total += post.probabilities[k] * lp[k].exp() * gains[k];
                }
            }
            total
        }
    };
    Ok(GainScore {
        intervention: *j,
        score,
    })
}

/// Posterior over hypotheses when each subtree's likelihood uses the true
/// transition probabilities of `truth[k]` rather than the Dirichlet evidence.
pub fn truth_posterior(state: &BeliefState, truth: &[PTree]) -> Result<Posterior> {
    let hset = state.hypotheses();
    check_truth(state, truth)?;
    let counts = state.counts();
    let log_weights = (0..hset.len())
        .map(|k| hset.prior_g()[k].ln() + true_log_likelihood(&truth[k], counts, k))
        .collect();
    Ok(Posterior::from_log_weights(log_weights))
}

fn check_truth(state: &BeliefState, truth: &[PTree]) -> Result<()> {
    let hset = state.hypotheses();
    if truth.len() != hset.len()
        || truth
            .iter()
            .zip(hset.subtrees())
            .any(|(t, h)| t.len() != h.len() || t.space() != h.space())
    {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

fn true_log_likelihood(tree: &PTree, counts: &CountTable, k: usize) -> f64 {
    let mut total = 0.0;
    for node in tree.nodes().iter().filter(|n| !n.is_leaf()) {
        for (&n, &theta) in counts.node_counts(k, node.id).iter().zip(&node.theta) {
            if n > 0.0 {
                total += n * theta.ln();
            }
        }
    }
    total
}

/// Evidence gain of `j` averaged under the true model: hypotheses weighted by
/// their true-likelihood posterior, outcomes by the true intervened subtree.
/// The gain itself is still the agent's.
pub fn actual_gain(
    state: &BeliefState,
    j: &Intervention,
    truth: &[PTree],
    opts: &GainOptions,
) -> Result<GainScore> {
    let outcomes = check_candidate(state, j, opts)?;
    let true_post = truth_posterior(state, truth)?;
    let post = state.posterior();
    let s = post.len();
    let before: Vec<f64> = (0..s).map(|k| evidence_in_favor(&post, k).0).collect();

    let mut total = 0.0;
    for (k, tree) in truth.iter().enumerate() {
        let weight = true_post.probabilities[k];
        if weight == 0.0 {
            continue;
        }
        let intervened = tree.intervene(j)?;
        let inner = match opts.sampled_outcomes {
            Some(n) => {
                let mut rng = outcome_rng(opts.seed ^ 0xA5A5_A5A5, j);
                let mut acc = 0.0;
                for _ in 0..n {
                    let x = intervened.sample(j, &mut rng)?;
                    let lp: Vec<f64> = (0..s).map(|h| state.log_predictive(h, &x, j)).collect();
                    acc += gains_for_outcome(&post.log_weights, &before, &lp)[k];
                }
                acc / n.max(1) as f64
            }
            None => {
                let mut acc = 0.0;
                for x in &outcomes {
                    let p = intervened.realization_probability(x)?;
                    if p == 0.0 {
                        continue;
                    }
                    let lp: Vec<f64> = (0..s).map(|h| state.log_predictive(h, x, j)).collect();
                    acc += p * gains_for_outcome(&post.log_weights, &before, &lp)[k];
                }
                acc
            }
        };
        total += weight * inner;
    }
    Ok(GainScore {
        intervention: *j,
        score: total,
    })
}

fn outcome_rng(seed: u64, j: &Intervention) -> ChaCha8Rng {
    let (v, x) = j
        .target
        .map_or((0, 0), |s| (s.variable as u64 + 1, s.value as u64 + 1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(v.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ x);
    rng
}

/// Draws an outcome from hypothesis `k`'s posterior predictive under `j`.
pub fn sample_predictive<R: rand::Rng + ?Sized>(
    state: &BeliefState,
    k: usize,
    j: &Intervention,
    rng: &mut R,
) -> Assignment {
    let tree = state.hypotheses().subtree(k);
    let priors = state.priors();
    let counts = state.counts();
    let mut values = vec![0; tree.space().len()];
    let mut id = 0;
    while let Some(v) = tree.node(id).split_variable() {
        let node = tree.node(id);
        let c = match j.target {
            Some(s) if s.variable == v => node.child_index_for(s.value),
            _ => {
                let a = priors.concentration(k, id);
                let weights: Vec<f64> = counts.node_counts(k, id).iter().map(|n| n + a).collect();
                let total: f64 = weights.iter().sum();
                let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
                draw_index(&probs, rng)
            }
        };
        id = node.children[c];
        let s = tree
            .node(id)
            .statement
            .expect("non-root node carries a statement");
        values[s.variable] = s.value;
    }
    Assignment::new(values)
}

/// `sum_x (p(x) - q(x)) ln(p(x) / q(x))`, with entries clamped to `[eps, 1]`
/// before the logarithm.
pub fn jeffrey_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::param(
            "distributions",
            format!("supports differ in size: {} vs {}", p.len(), q.len()),
        ));
    }
    Ok(p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let (a, b) = (a.clamp(PROB_EPSILON, 1.0), b.clamp(PROB_EPSILON, 1.0));
            (a - b) * (a / b).ln()
        })
        .sum())
}

/// Closed forms for two variables `X1, X2` with the hypotheses `X1 -> X2`
/// and `X2 -> X1`. `counts[a][b]` is the number of observations with
/// `X1 = a, X2 = b`.
pub mod two_var {
    use super::*;

    fn shape(counts: &[Vec<f64>]) -> Result<(usize, usize)> {
        let k1 = counts.len();
        let k2 = counts.first().map_or(0, Vec::len);
        if k1 < 2 || k2 < 2 || counts.iter().any(|r| r.len() != k2) {
            return Err(Error::param(
                "counts",
                "expected a rectangular table of at least 2x2",
            ));
        }
        Ok((k1, k2))
    }

    /// `Q(x2 | x1, D) = (n(x1, x2) + a) / (sum_x2 n(x1, x2) + |V2| a)`.
    pub fn conditional(counts: &[Vec<f64>], x1: usize, alpha: f64) -> Result<Vec<f64>> {
        let (k1, k2) = shape(counts)?;
        if x1 >= k1 {
            return Err(Error::ValueOutOfRange {
                variable: 0,
                value: x1,
                cardinality: k1,
            });
        }
        let row = &counts[x1];
        let total: f64 = row.iter().sum::<f64>() + k2 as f64 * alpha;
        Ok(row.iter().map(|n| (n + alpha) / total).collect())
    }

    /// `Q(x2 | D) = (sum_x1 n(x1, x2) + |V1| a) / (N + |V1| |V2| a)`.
    pub fn marginal(counts: &[Vec<f64>], alpha: f64) -> Result<Vec<f64>> {
        let (k1, k2) = shape(counts)?;
        let n: f64 = counts.iter().flatten().sum();
        let denom = n + (k1 * k2) as f64 * alpha;
        Ok((0..k2)
            .map(|b| (counts.iter().map(|r| r[b]).sum::<f64>() + k1 as f64 * alpha) / denom)
            .collect())
    }

    /// Actual gain of `do(X1 = x1)` when the data is observational and the
    /// true joint is `truth[a][b]`:
    /// `1/2 sum_x2 [P(x2 | x1) - P(x2)] ln(Q(x2 | x1, D) / Q(x2 | D))`.
    pub fn actual_gain_closed_form(
        counts: &[Vec<f64>],
        truth: &[Vec<f64>],
        x1: usize,
        alpha: f64,
    ) -> Result<f64> {
        let (k1, k2) = shape(counts)?;
        if shape(truth)? != (k1, k2) {
            return Err(Error::param(
                "truth",
                "joint table shape differs from the counts",
            ));
        }
        let q_cond = conditional(counts, x1, alpha)?;
        let q_marg = marginal(counts, alpha)?;
        let row_mass: f64 = truth[x1].iter().sum();
        if row_mass <= 0.0 {
            return Err(Error::param("truth", format!("P(X1 = {x1}) is zero")));
        }
        Ok(0.5
            * (0..k2)
                .map(|b| {
                    let p_cond = truth[x1][b] / row_mass;
                    let p_marg: f64 = truth.iter().map(|r| r[b]).sum();
                    (p_cond - p_marg) * (q_cond[b] / q_marg[b]).ln()
                })
                .sum::<f64>())
    }

    /// First-intervention actual gain for the binary symmetric problem with
    /// counts exactly `N * p`: `1/2 (rho - 1/2) ln((N rho + 2a) / (N (1 - rho) + 2a))`.
    pub fn symmetric_binary_gain(n: f64, rho: f64, alpha: f64) -> f64 {
        0.5 * (rho - 0.5) * ((n * rho + 2.0 * alpha) / (n * (1.0 - rho) + 2.0 * alpha)).ln()
    }
}
