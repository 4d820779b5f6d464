//! Slow reference computations used to check the fast paths in `ptree-learn`.
//!
//! Nothing here reads the library's count tables or prior tables. Evidence is
//! replayed record by record through Pólya urns, and every posterior after a
//! hypothetical outcome is recomputed from scratch.

use std::collections::HashMap;

use ptree_learn::{Assignment, Dataset, HypothesisSet, Intervention, PTree, Record};

/// Probability clamp applied before taking log odds.
pub const ODDS_EPSILON: f64 = 1e-12;

fn leaves_below(tree: &PTree, id: usize) -> usize {
    let n = tree.node(id);
    if n.children.is_empty() {
        1
    } else {
        n.children.iter().map(|&c| leaves_below(tree, c)).sum()
    }
}

/// Log evidence of `data` under `tree`. Each record multiplies in, at every
/// node on its path not forced by the record's intervention,
/// `(n_c + a) / (n + |ch| a)` with `a = leaves / |ch| * alpha`, and then
/// increments the counts.
pub fn urn_log_evidence(tree: &PTree, alpha: f64, data: &Dataset) -> f64 {
    let mut counts: HashMap<(usize, usize), f64> = HashMap::new();
    let mut totals: HashMap<usize, f64> = HashMap::new();
    let mut log_p = 0.0;
    for r in &data.records {
        let mut id = tree.root().id;
        loop {
            let node = tree.node(id);
            if node.children.is_empty() {
                break;
            }
            let var = tree.node(node.children[0]).statement.unwrap().variable;
            let c = node
                .children
                .iter()
                .position(|&ch| tree.node(ch).statement.unwrap().value == r.assignment.get(var))
                .unwrap();
            if r.intervention.variable() != Some(var) {
                let ch = node.children.len() as f64;
                let a = leaves_below(tree, id) as f64 / ch * alpha;
                let n_c = counts.get(&(id, c)).copied().unwrap_or(0.0);
                let n = totals.get(&id).copied().unwrap_or(0.0);
                log_p += ((n_c + a) / (n + ch * a)).ln();
                *counts.entry((id, c)).or_default() += 1.0;
                *totals.entry(id).or_default() += 1.0;
            }
            id = node.children[c];
        }
    }
    log_p
}

/// Posterior over hypotheses and the per-hypothesis log evidence.
pub fn urn_posterior(hset: &HypothesisSet, alpha: f64, data: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let lml: Vec<f64> = hset
        .subtrees()
        .iter()
        .map(|t| urn_log_evidence(t, alpha, data))
        .collect();
    let logw: Vec<f64> = lml
        .iter()
        .zip(hset.prior_g())
        .map(|(l, p)| l + p.ln())
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    (w.iter().map(|x| x / z).collect(), lml)
}

/// `ln P(k) - ln sum_{i != k} P(i)` with both probabilities clamped.
pub fn log_odds(p: &[f64], k: usize) -> f64 {
    let rest: f64 = p
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, &q)| q)
        .sum();
    let clamp = |x: f64| x.clamp(ODDS_EPSILON, 1.0 - ODDS_EPSILON);
    clamp(p[k]).ln() - clamp(rest).ln()
}

/// Expected evidence gain of `j`, enumerating every admissible outcome and
/// recomputing each updated posterior from the extended dataset.
pub fn brute_force_expected_gain(
    hset: &HypothesisSet,
    alpha: f64,
    data: &Dataset,
    j: &Intervention,
) -> f64 {
    let (post, lml) = urn_posterior(hset, alpha, data);
    let mut total = 0.0;
    for x in hset.space().assignments().filter(|x| j.admits(x)) {
        let mut extended = data.clone();
        extended.push(Record::new(x.clone(), *j));
        let (post_x, lml_x) = urn_posterior(hset, alpha, &extended);
        for k in 0..hset.len() {
            let q = (lml_x[k] - lml[k]).exp();
            total += post[k] * q * (log_odds(&post_x, k) - log_odds(&post, k));
        }
    }
    total
}

/// `sum_x (p(x) - q(x)) ln(p(x) / q(x))` without any clamping.
pub fn jeffrey(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a / b).ln()).sum()
}

/// Two-variable observational dataset with `counts[a][b]` copies of `(a, b)`.
pub fn dataset_from_counts(counts: &[Vec<usize>]) -> Dataset {
    let mut records = Vec::new();
    for (a, row) in counts.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            records.extend((0..c).map(|_| Record::observed(Assignment::new(vec![a, b]))));
        }
    }
    Dataset::new(records)
}

/// Standard error of a difference of two independent means.
pub fn combined_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ptree_learn::VariableSpace;

    #[test]
    fn urn_single_record() {
        let space = VariableSpace::with_cardinalities(&[2, 3]).unwrap();
        let hset = HypothesisSet::all_chains(&space).unwrap();
        let data = dataset_from_counts(&[vec![1, 0, 0], vec![0, 0, 0]]);
        // root: 3 leaves under each of 2 children, a = 3; next level a = 1
        let e = urn_log_evidence(hset.subtree(0), 1.0, &data);
        assert!((e - (0.5f64 * (1.0 / 3.0)).ln()).abs() < 1e-15);
    }

    #[test]
    fn log_odds_of_certainty_is_clamped() {
        let lo = log_odds(&[1.0, 0.0], 0);
        assert!((lo - ((1.0 - ODDS_EPSILON).ln() - ODDS_EPSILON.ln())).abs() < 1e-9);
    }
}
