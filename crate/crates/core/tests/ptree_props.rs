mod common;

use common::*;
use proptest::prelude::*;
use ptree_learn::hypotheses::{chain_tree, context_swap_tree};
use ptree_learn::{CausalOrder, ContextSwapSpec, Intervention, PTree, Statement};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tree(seed: u64) -> (PTree, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = random_space(&mut rng, 4, 4);
    let tree = if space.len() == 3 && space.cardinality(0) >= 3 && rng.random_bool(0.3) {
        context_swap_tree(
            &space,
            &ContextSwapSpec {
                pivot: 0,
                swap_values: [2].into(),
                base_order: [2, 1],
            },
        )
        .unwrap()
    } else {
        let mut order: Vec<usize> = (0..space.len()).collect();
        order.shuffle(&mut rng);
        chain_tree(&space, &CausalOrder::new(order).unwrap()).unwrap()
    };
    let tree = random_theta(&tree, &mut rng);
    (tree, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realizations_sum_to_one(seed in any::<u64>()) {
        let (tree, _) = random_tree(seed);
        let total: f64 = tree.space().assignments().map(|x| tree.realization_probability(&x).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_statement_events_match_realizations(seed in any::<u64>()) {
        let (tree, mut rng) = random_tree(seed);
        let space = tree.space();
        let v = rng.random_range(0..space.len());
        let s = Statement::new(v, rng.random_range(0..space.cardinality(v)));
        let direct: f64 = space
            .assignments()
            .filter(|x| x.satisfies(s))
            .map(|x| tree.realization_probability(&x).unwrap())
            .sum();
        prop_assert!((tree.event_probability(&[s]).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn intervention_is_idempotent(seed in any::<u64>()) {
        let (tree, mut rng) = random_tree(seed);
        let j = random_intervention(&mut rng, &tree.space().clone(), 1.0);
        let once = tree.intervene(&j).unwrap();
        let twice = once.intervene(&j).unwrap();
        prop_assert_eq!(once.nodes(), twice.nodes());
    }

    #[test]
    fn intervention_is_local(seed in any::<u64>()) {
        let (tree, mut rng) = random_tree(seed);
        let j = random_intervention(&mut rng, &tree.space().clone(), 1.0);
        let target = j.target.unwrap();
        let done = tree.intervene(&j).unwrap();
        // nodes that do not split on the target keep their transitions
        for (a, b) in tree.nodes().iter().zip(done.nodes()) {
            if a.split_variable() != Some(target.variable) {
                prop_assert_eq!(&a.theta, &b.theta);
            }
        }
        // P_do(x) is the product of the untouched factors on the path of x
        for x in tree.space().assignments() {
            let p = done.realization_probability(&x).unwrap();
            if !x.satisfies(target) {
                prop_assert_eq!(p, 0.0);
                continue;
            }
            let factors: f64 = tree
                .realization_path(&x)
                .unwrap()
                .iter()
                .filter_map(|step| {
                    let node = tree.node(step.node);
                    let c = step.child?;
                    (node.split_variable() != Some(target.variable)).then(|| node.theta[c])
                })
                .product();
            prop_assert!((p - factors).abs() < 1e-12);
        }
    }
}

#[test]
fn sampling_matches_realization_probabilities() {
    for seed in 0..4u64 {
        let (tree, mut rng) = random_tree(seed);
        let space = tree.space().clone();
        let j = random_intervention(&mut rng, &space, 0.5);
        let probs = outcome_probabilities(&tree, &j);
        let n = 100_000;
        let mut counts = vec![0.0; space.num_assignments() as usize];
        for _ in 0..n {
            counts[space.assignment_index(&tree.sample(&j, &mut rng).unwrap())] += 1.0;
        }
        let (stat, df) = chi_square(&counts, &probs, n as f64);
        assert!(
            stat < chi_square_critical(df),
            "seed {seed}: chi-square {stat} with {df} dof"
        );
    }
}

fn outcome_probabilities(tree: &PTree, j: &Intervention) -> Vec<f64> {
    let t = if j.is_observational() {
        tree.clone()
    } else {
        tree.intervene(j).unwrap()
    };
    t.space()
        .assignments()
        .map(|x| t.realization_probability(&x).unwrap())
        .collect()
}

#[test]
fn empty_intervention_is_rejected() {
    let (tree, _) = random_tree(1);
    assert!(tree.intervene(&Intervention::OBSERVE).is_err());
}
