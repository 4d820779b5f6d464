mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use ptree_learn::gain::{
    actual_gain, evidence_in_favor, expected_gain, information_gain, two_var, GainOptions,
};
use ptree_learn::hypotheses::assign_priors;
use ptree_learn::inference::log_marginal_likelihood;
use ptree_learn::simharness::{parameterize_truth, JointTable};
use ptree_learn::strategies::{candidates, select, StrategyKind};
use ptree_learn::{
    Assignment, BeliefState, CountTable, Dataset, HypothesisSet, Intervention, PTree, VariableSpace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-12;

fn clamp(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

fn log_odds(p: &[f64], k: usize) -> f64 {
    let rest: f64 = p
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, &q)| q)
        .sum();
    clamp(p[k]).ln() - clamp(rest).ln()
}

/// Posterior recomputed from a fresh count table of `data`.
fn scratch_posterior(hset: &HypothesisSet, alpha: f64, data: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let priors = assign_priors(hset, alpha).unwrap();
    let table = CountTable::from_dataset(hset, data).unwrap();
    let lml: Vec<f64> = (0..hset.len())
        .map(|k| log_marginal_likelihood(hset, &table, &priors, k))
        .collect();
    let max = lml.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lml.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    (w.iter().map(|x| x / z).collect(), lml)
}

fn with_record(data: &Dataset, x: &Assignment, j: &Intervention) -> Dataset {
    let mut d = data.clone();
    d.push(ptree_learn::Record::new(x.clone(), *j));
    d
}

/// Expected gain by brute force: predictives as ratios of evidences, every
/// updated posterior recomputed from scratch.
fn oracle_expected(hset: &HypothesisSet, alpha: f64, data: &Dataset, j: &Intervention) -> f64 {
    let (post, lml) = scratch_posterior(hset, alpha, data);
    let mut total = 0.0;
    for x in hset.space().assignments().filter(|x| j.admits(x)) {
        let (post_x, lml_x) = scratch_posterior(hset, alpha, &with_record(data, &x, j));
        for k in 0..hset.len() {
            let q = (lml_x[k] - lml[k]).exp();
            total += post[k] * q * (log_odds(&post_x, k) - log_odds(&post, k));
        }
    }
    total
}

fn truth_tree_probability(tree: &PTree, x: &Assignment, j: &Intervention) -> f64 {
    match j.target {
        None => tree.realization_probability(x).unwrap(),
        Some(_) => tree
            .intervene(j)
            .unwrap()
            .realization_probability(x)
            .unwrap(),
    }
}

fn oracle_actual(
    hset: &HypothesisSet,
    alpha: f64,
    data: &Dataset,
    j: &Intervention,
    truth: &[PTree],
) -> f64 {
    let weights: Vec<f64> = truth
        .iter()
        .map(|t| {
            data.records
                .iter()
                .map(|r| truth_tree_probability(t, &r.assignment, &r.intervention))
                .product()
        })
        .collect();
    let z: f64 = weights.iter().sum();
    let (post, _) = scratch_posterior(hset, alpha, data);
    let mut total = 0.0;
    for x in hset.space().assignments().filter(|x| j.admits(x)) {
        let (post_x, _) = scratch_posterior(hset, alpha, &with_record(data, &x, j));
        for k in 0..hset.len() {
            let p = truth_tree_probability(&truth[k], &x, j);
            total += weights[k] / z * p * (log_odds(&post_x, k) - log_odds(&post, k));
        }
    }
    total
}

struct Instance {
    hset: Arc<HypothesisSet>,
    data: Dataset,
    alpha: f64,
    truth: Vec<PTree>,
    rng: ChaCha8Rng,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = random_space(&mut rng, 3, 4);
    let hset = random_hypotheses(&mut rng, &space);
    let weights: Vec<f64> = (0..space.num_assignments())
        .map(|_| rng.random_range(0.01..1.0))
        .collect();
    let joint = JointTable::from_weights(space.clone(), weights).unwrap();
    let k_true = rng.random_range(0..hset.len());
    let truth = parameterize_truth(&hset, &joint, k_true).unwrap();
    let n = rng.random_range(0..12);
    let data = random_dataset(&mut rng, truth.true_tree(), n, 0.5);
    let alpha = rng.random_range(0.5..2.5);
    Instance {
        hset: Arc::new(hset),
        data,
        alpha,
        truth: truth.subtrees().to_vec(),
        rng,
    }
}

fn state_of(inst: &Instance) -> BeliefState {
    let mut s = BeliefState::new(Arc::clone(&inst.hset), inst.alpha).unwrap();
    s.observe_all(&inst.data).unwrap();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn expected_gain_matches_brute_force(seed in any::<u64>()) {
        let mut inst = instance(seed);
        let state = state_of(&inst);
        let j = random_intervention(&mut inst.rng, &inst.hset.space().clone(), 1.0);
        let lib = expected_gain(&state, &j, &GainOptions::default()).unwrap().score;
        let oracle = oracle_expected(&inst.hset, inst.alpha, &inst.data, &j);
        prop_assert!((lib - oracle).abs() < 1e-9, "lib {} oracle {}", lib, oracle);
    }

    #[test]
    fn actual_gain_matches_brute_force(seed in any::<u64>()) {
        let mut inst = instance(seed);
        let state = state_of(&inst);
        let j = random_intervention(&mut inst.rng, &inst.hset.space().clone(), 1.0);
        let lib = actual_gain(&state, &j, &inst.truth, &GainOptions::default()).unwrap().score;
        let oracle = oracle_actual(&inst.hset, inst.alpha, &inst.data, &j, &inst.truth);
        prop_assert!((lib - oracle).abs() < 1e-9, "lib {} oracle {}", lib, oracle);
    }

    #[test]
    fn two_hypothesis_evidence_is_antisymmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = random_space(&mut rng, 2, 5);
        let hset = Arc::new(HypothesisSet::all_chains(&space).unwrap());
        let source = random_theta(hset.subtree(1), &mut rng);
        let mut state = BeliefState::new(hset, 1.0).unwrap();
        state.observe_all(&random_dataset(&mut rng, &source, 15, 0.6)).unwrap();
        let post = state.posterior();
        prop_assert!((evidence_in_favor(&post, 0).0 + evidence_in_favor(&post, 1).0).abs() < 1e-9);
        let j = random_intervention(&mut rng, &space, 1.0);
        let x = source.sample(&j, &mut rng).unwrap();
        let g0 = information_gain(&state, &x, &j, 0).unwrap();
        let g1 = information_gain(&state, &x, &j, 1).unwrap();
        prop_assert!((g0 + g1).abs() < 1e-9);
    }

    #[test]
    fn two_variable_expected_gain_is_half_jeffrey(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k1, k2) = (rng.random_range(2..=5), rng.random_range(2..=5));
        let alpha = rng.random_range(0.5..3.0);
        let space = VariableSpace::with_cardinalities(&[k1, k2]).unwrap();
        let mut state = BeliefState::new(Arc::new(HypothesisSet::all_chains(&space).unwrap()), alpha).unwrap();
        let counts: Vec<Vec<f64>> = (0..k1).map(|_| (0..k2).map(|_| rng.random_range(0..8) as f64).collect()).collect();
        for (a, row) in counts.iter().enumerate() {
            for (b, &c) in row.iter().enumerate() {
                for _ in 0..c as usize {
                    state.observe(&Assignment::new(vec![a, b]), &Intervention::OBSERVE).unwrap();
                }
            }
        }
        let n: f64 = counts.iter().flatten().sum();
        let a = rng.random_range(0..k1);
        let row: f64 = counts[a].iter().sum();
        let cond: Vec<f64> = (0..k2).map(|b| (counts[a][b] + alpha) / (row + k2 as f64 * alpha)).collect();
        let marg: Vec<f64> = (0..k2)
            .map(|b| (counts.iter().map(|r| r[b]).sum::<f64>() + k1 as f64 * alpha) / (n + (k1 * k2) as f64 * alpha))
            .collect();
        let dj: f64 = cond.iter().zip(&marg).map(|(p, q)| (p - q) * (p / q).ln()).sum();
        let g = expected_gain(&state, &Intervention::on(0, a), &GainOptions::default()).unwrap().score;
        prop_assert!((g - 0.5 * dj).abs() < 1e-9, "gain {} half D_J {}", g, 0.5 * dj);
    }

    #[test]
    fn closed_form_actual_gain(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (k1, k2) = (rng.random_range(2..=4), rng.random_range(2..=4));
        let space = VariableSpace::with_cardinalities(&[k1, k2]).unwrap();
        let weights: Vec<f64> = (0..k1 * k2).map(|_| rng.random_range(0.05..1.0)).collect();
        let joint = JointTable::from_weights(space.clone(), weights).unwrap();
        let hset = Arc::new(HypothesisSet::all_chains(&space).unwrap());
        let truth = parameterize_truth(&hset, &joint, 0).unwrap();
        let alpha = rng.random_range(0.5..2.0);
        let mut state = BeliefState::new(Arc::clone(&hset), alpha).unwrap();
        let data = random_dataset(&mut rng, truth.true_tree(), 30, 0.0);
        state.observe_all(&data).unwrap();
        let mut counts = vec![vec![0.0; k2]; k1];
        for r in &data.records {
            counts[r.assignment.get(0)][r.assignment.get(1)] += 1.0;
        }
        let a = rng.random_range(0..k1);
        let general = actual_gain(&state, &Intervention::on(0, a), truth.subtrees(), &GainOptions::default()).unwrap().score;
        let closed = two_var::actual_gain_closed_form(&counts, &joint.as_matrix().unwrap(), a, alpha).unwrap();
        prop_assert!((general - closed).abs() < 1e-9);
    }

    #[test]
    fn expected_gain_choice_survives_affine_rescaling(seed in any::<u64>()) {
        let inst = instance(seed);
        let state = state_of(&inst);
        let cands = candidates(inst.hset.space());
        let opts = GainOptions::default();
        let scores: Vec<f64> = cands.iter().map(|j| expected_gain(&state, j, &opts).unwrap().score).collect();
        let chosen = select(StrategyKind::ExpectedGain, &state, &cands, &mut ChaCha8Rng::seed_from_u64(0), None, &opts).unwrap();
        let pick = |f: &dyn Fn(f64) -> f64| {
            let mut best = 0;
            for i in 1..scores.len() {
                if f(scores[i]) > f(scores[best]) + 1e-9 {
                    best = i;
                }
            }
            best
        };
        let plain = pick(&|s| s);
        let scaled = pick(&|s| 3.5 * s + 2.0);
        prop_assert_eq!(plain, scaled);
        prop_assert!((scores[cands.iter().position(|c| *c == chosen).unwrap()] - scores[plain]).abs() < 1e-9);
    }
}

#[test]
fn symmetric_binary_gain_grid() {
    for rho in [0.5, 0.7, 0.9] {
        for n in [10.0, 100.0, 1000.0] {
            for alpha in [1.0, 2.0] {
                let counts = vec![
                    vec![n * rho / 2.0, n * (1.0 - rho) / 2.0],
                    vec![n * (1.0 - rho) / 2.0, n * rho / 2.0],
                ];
                let truth = vec![
                    vec![rho / 2.0, (1.0 - rho) / 2.0],
                    vec![(1.0 - rho) / 2.0, rho / 2.0],
                ];
                let closed = two_var::actual_gain_closed_form(&counts, &truth, 0, alpha).unwrap();
                let formula = two_var::symmetric_binary_gain(n, rho, alpha);
                assert!(
                    (closed - formula).abs() < 1e-12,
                    "rho {rho} n {n} alpha {alpha}"
                );
            }
        }
    }
}
