#![allow(dead_code)]

use std::collections::HashMap;

use ptree_learn::hypotheses::{ContextSwapSpec, HypothesisSpec};
use ptree_learn::{
    Assignment, CausalOrder, Dataset, HypothesisSet, Intervention, PTree, Record, VariableSpace,
};
use rand::Rng;

pub fn random_space<R: Rng>(rng: &mut R, max_vars: usize, max_card: usize) -> VariableSpace {
    let m = rng.random_range(2..=max_vars);
    let cards: Vec<usize> = (0..m).map(|_| rng.random_range(2..=max_card)).collect();
    VariableSpace::with_cardinalities(&cards).unwrap()
}

/// All chains, plus for three variables with at least three values a pair of
/// context-swap trees.
pub fn random_hypotheses<R: Rng>(rng: &mut R, space: &VariableSpace) -> HypothesisSet {
    if space.len() == 3 && space.cardinality(0) >= 3 && rng.random_bool(0.5) {
        let specs = vec![
            HypothesisSpec::Chain(CausalOrder::new(vec![0, 1, 2]).unwrap()),
            HypothesisSpec::ContextSwap(ContextSwapSpec {
                pivot: 0,
                swap_values: [1].into(),
                base_order: [1, 2],
            }),
            HypothesisSpec::ContextSwap(ContextSwapSpec {
                pivot: 0,
                swap_values: [2].into(),
                base_order: [1, 2],
            }),
        ];
        HypothesisSet::from_specs(space, &specs).unwrap()
    } else {
        HypothesisSet::all_chains(space).unwrap()
    }
}

/// Same structure, transition probabilities drawn uniformly and normalized.
pub fn random_theta<R: Rng>(tree: &PTree, rng: &mut R) -> PTree {
    tree.map_theta(|node, _| {
        let w: Vec<f64> = (0..node.children.len())
            .map(|_| rng.random_range(0.05..1.0))
            .collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    })
    .unwrap()
}

pub fn random_intervention<R: Rng>(
    rng: &mut R,
    space: &VariableSpace,
    p_intervene: f64,
) -> Intervention {
    if rng.random_bool(p_intervene) {
        let v = rng.random_range(0..space.len());
        Intervention::on(v, rng.random_range(0..space.cardinality(v)))
    } else {
        Intervention::OBSERVE
    }
}

pub fn random_dataset<R: Rng>(rng: &mut R, source: &PTree, n: usize, p_intervene: f64) -> Dataset {
    let space = source.space().clone();
    Dataset::new(
        (0..n)
            .map(|_| {
                let j = random_intervention(rng, &space, p_intervene);
                Record::new(source.sample(&j, rng).unwrap(), j)
            })
            .collect(),
    )
}

fn leaves_below(tree: &PTree, id: usize) -> usize {
    let n = tree.node(id);
    if n.children.is_empty() {
        1
    } else {
        n.children.iter().map(|&c| leaves_below(tree, c)).sum()
    }
}

/// Sequential urn evidence: each record multiplies in, at every unforced node
/// on its path, `(n_c + a) / (n + |ch| a)` with `a = leaves / |ch| * alpha`,
/// and then increments the counts.
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

/// Upper 0.1% point of the chi-square distribution (Wilson-Hilferty).
pub fn chi_square_critical(df: usize) -> f64 {
    let z = 3.090_232;
    let d = df as f64;
    d * (1.0 - 2.0 / (9.0 * d) + z * (2.0 / (9.0 * d)).sqrt()).powi(3)
}

pub fn chi_square(counts: &[f64], probs: &[f64], n: f64) -> (f64, usize) {
    let mut stat = 0.0;
    let mut cells: usize = 0;
    for (&o, &p) in counts.iter().zip(probs) {
        if p > 0.0 {
            let e = n * p;
            stat += (o - e).powi(2) / e;
            cells += 1;
        } else {
            assert_eq!(o, 0.0, "sample in a zero-probability cell");
        }
    }
    (stat, cells.saturating_sub(1).max(1))
}

pub fn assignments_of(space: &VariableSpace) -> Vec<Assignment> {
    space.assignments().collect()
}
