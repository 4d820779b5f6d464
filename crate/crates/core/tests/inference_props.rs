mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use ptree_learn::hypotheses::assign_priors;
use ptree_learn::inference::{
    log_marginal_likelihood, log_marginal_likelihood_unnormalized, posterior,
};
use ptree_learn::{
    BeliefState, CountTable, Dataset, HypothesisSet, Intervention, Record, VariableSpace,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    hset: HypothesisSet,
    data: Dataset,
    alpha: f64,
}

fn instance(seed: u64, p_intervene: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = random_space(&mut rng, 3, 4);
    let hset = random_hypotheses(&mut rng, &space);
    let k = rng.random_range(0..hset.len());
    let source = random_theta(hset.subtree(k), &mut rng);
    let n = rng.random_range(0..40);
    let data = random_dataset(&mut rng, &source, n, p_intervene);
    let alpha = rng.random_range(0.2..3.0);
    Instance { hset, data, alpha }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evidence_matches_sequential_urn(seed in any::<u64>()) {
        let inst = instance(seed, 0.5);
        let priors = assign_priors(&inst.hset, inst.alpha).unwrap();
        let table = CountTable::from_dataset(&inst.hset, &inst.data).unwrap();
        for k in 0..inst.hset.len() {
            let lib = log_marginal_likelihood(&inst.hset, &table, &priors, k);
            let urn = urn_log_evidence(inst.hset.subtree(k), inst.alpha, &inst.data);
            prop_assert!((lib - urn).abs() < 1e-10, "k={} lib={} urn={}", k, lib, urn);
        }
    }

    #[test]
    fn observational_data_leaves_posterior_uniform(seed in any::<u64>()) {
        let inst = instance(seed, 0.0);
        let priors = assign_priors(&inst.hset, inst.alpha).unwrap();
        let table = CountTable::from_dataset(&inst.hset, &inst.data).unwrap();
        let post = posterior(&inst.hset, &table, &priors);
        let s = inst.hset.len() as f64;
        for p in post.probabilities {
            prop_assert!((p - 1.0 / s).abs() < 1e-10);
        }
    }

    #[test]
    fn evidence_ignores_record_order(seed in any::<u64>()) {
        let inst = instance(seed, 0.5);
        let priors = assign_priors(&inst.hset, inst.alpha).unwrap();
        let mut shuffled = inst.data.clone();
        shuffled.records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let a = CountTable::from_dataset(&inst.hset, &inst.data).unwrap();
        let b = CountTable::from_dataset(&inst.hset, &shuffled).unwrap();
        for k in 0..inst.hset.len() {
            let (la, lb) = (
                log_marginal_likelihood(&inst.hset, &a, &priors, k),
                log_marginal_likelihood(&inst.hset, &b, &priors, k),
            );
            prop_assert!((la - lb).abs() < 1e-9);
        }
    }

    #[test]
    fn prior_normalizer_cancels(seed in any::<u64>()) {
        let inst = instance(seed, 0.5);
        let priors = assign_priors(&inst.hset, inst.alpha).unwrap();
        let table = CountTable::from_dataset(&inst.hset, &inst.data).unwrap();
        let gap: Vec<f64> = (0..inst.hset.len())
            .map(|k| {
                log_marginal_likelihood(&inst.hset, &table, &priors, k)
                    - log_marginal_likelihood_unnormalized(&inst.hset, &table, &priors, k)
            })
            .collect();
        for g in &gap {
            prop_assert!((g - gap[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn forced_nodes_are_not_counted(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = random_space(&mut rng, 3, 4);
        let hset = HypothesisSet::all_chains(&space).unwrap();
        let source = random_theta(hset.subtree(0), &mut rng);
        let j = random_intervention(&mut rng, &space, 1.0);
        let x = source.sample(&j, &mut rng).unwrap();
        let table = CountTable::from_dataset(&hset, &Dataset::new(vec![Record::new(x, j)])).unwrap();
        // one increment per variable other than the target, on every hypothesis
        for k in 0..hset.len() {
            let total: f64 = hset.subtree(k).nodes().iter().filter(|n| !n.is_leaf())
                .map(|n| table.node_counts(k, n.id).iter().sum::<f64>()).sum();
            prop_assert_eq!(total, (space.len() - 1) as f64);
        }
    }

    #[test]
    fn predictive_is_a_distribution(seed in any::<u64>()) {
        let inst = instance(seed, 0.5);
        let mut state = BeliefState::new(Arc::new(inst.hset.clone()), inst.alpha).unwrap();
        state.observe_all(&inst.data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = random_intervention(&mut rng, &inst.hset.space().clone(), 0.5);
        for k in 0..inst.hset.len() {
            let q = state.predictive(k, &j).unwrap();
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn single_record_evidence_by_hand() {
    // two binary variables, alpha = 1: the root has concentration 2 and each
    // second-level node 1, so one observation has evidence (1/2)(1/2)
    let space = VariableSpace::with_cardinalities(&[2, 2]).unwrap();
    let hset = HypothesisSet::all_chains(&space).unwrap();
    let mut state = BeliefState::new(Arc::new(hset), 1.0).unwrap();
    state
        .observe(
            &ptree_learn::Assignment::new(vec![0, 1]),
            &Intervention::OBSERVE,
        )
        .unwrap();
    for k in 0..2 {
        assert!((state.log_marginal_likelihood(k) - 0.25f64.ln()).abs() < 1e-14);
    }
}
