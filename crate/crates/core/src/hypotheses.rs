//! Causal hypotheses as probability trees, and the hypothesis set that joins
//! them under a single hypothesis variable `G`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ptree::{NodeId, NodeSpec, PTree, Statement, VariableSpace};

/// A full variable ordering; each variable depends on all of its predecessors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct CausalOrder(Vec<usize>);

impl CausalOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &v in &order {
            if v >= order.len() || seen[v] {
                return Err(Error::param(
                    "order",
                    format!("{order:?} is not a permutation of 0..{}", order.len()),
                ));
            }
            seen[v] = true;
        }
        Ok(Self(order))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Every ordering of `m` variables, in lexicographic order.
    pub fn all(m: usize) -> Vec<CausalOrder> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(m);
        let mut used = vec![false; m];
        fn rec(m: usize, current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<CausalOrder>) {
            if current.len() == m {
                out.push(CausalOrder(current.clone()));
                return;
            }
            for v in 0..m {
                if !used[v] {
                    used[v] = true;
                    current.push(v);
                    rec(m, current, used, out);
                    current.pop();
                    used[v] = false;
                }
            }
        }
        rec(m, &mut current, &mut used, &mut out);
        out
    }

    pub fn label(&self, space: &VariableSpace) -> String {
        self.0
            .iter()
            .map(|&v| space.name(v))
            .collect::<Vec<_>>()
            .join(">")
    }
}

impl TryFrom<Vec<usize>> for CausalOrder {
    type Error = Error;

    fn try_from(order: Vec<usize>) -> Result<Self> {
        Self::new(order)
    }
}

impl From<CausalOrder> for Vec<usize> {
    fn from(order: CausalOrder) -> Self {
        order.0
    }
}

/// Three-variable tree where the pivot is decided first and its value
/// selects the order of the two remaining variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSwapSpec {
    pub pivot: usize,
    pub swap_values: BTreeSet<usize>,
    pub base_order: [usize; 2],
}

impl ContextSwapSpec {
    pub fn label(&self, space: &VariableSpace) -> String {
        let values: Vec<String> = self.swap_values.iter().map(|v| v.to_string()).collect();
        format!(
            "ctx({}:{}; {}>{})",
            space.name(self.pivot),
            values.join(","),
            space.name(self.base_order[0]),
            space.name(self.base_order[1])
        )
    }
}

/// One entry of a hypothesis-set description.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisSpec {
    Chain(CausalOrder),
    ContextSwap(ContextSwapSpec),
}

impl HypothesisSpec {
    pub fn build(&self, space: &VariableSpace) -> Result<PTree> {
        match self {
            HypothesisSpec::Chain(order) => chain_tree(space, order),
            HypothesisSpec::ContextSwap(spec) => context_swap_tree(space, spec),
        }
    }

    pub fn label(&self, space: &VariableSpace) -> String {
        match self {
            HypothesisSpec::Chain(order) => order.label(space),
            HypothesisSpec::ContextSwap(spec) => spec.label(space),
        }
    }
}

/// Full tree over `space` that branches on `order[d]` at depth `d`, with
/// uniform transition probabilities.
pub fn chain_tree(space: &VariableSpace, order: &CausalOrder) -> Result<PTree> {
    if order.as_slice().len() != space.len() {
        return Err(Error::param(
            "order",
            format!(
                "{} variables ordered, space has {}",
                order.as_slice().len(),
                space.len()
            ),
        ));
    }
    let root = NodeSpec::uniform(None, chain_children(space, order.as_slice()));
    PTree::from_spec(space.clone(), root)
}

fn chain_children(space: &VariableSpace, order: &[usize]) -> Vec<NodeSpec> {
    let Some((&v, rest)) = order.split_first() else {
        return Vec::new();
    };
    (0..space.cardinality(v))
        .map(|value| {
            let s = Statement::new(v, value);
            if rest.is_empty() {
                NodeSpec::leaf(s)
            } else {
                NodeSpec::uniform(Some(s), chain_children(space, rest))
            }
        })
        .collect()
}

pub fn context_swap_tree(space: &VariableSpace, spec: &ContextSwapSpec) -> Result<PTree> {
    if space.len() != 3 {
        return Err(Error::param(
            "context_swap",
            format!("defined for three variables, space has {}", space.len()),
        ));
    }
    space.check_variable(spec.pivot)?;
    let [a, b] = spec.base_order;
    let mut vars = [spec.pivot, a, b];
    vars.sort_unstable();
    if vars != [0, 1, 2] {
        return Err(Error::param(
            "base_order",
            "must list the two variables other than the pivot",
        ));
    }
    if let Some(&v) = spec
        .swap_values
        .iter()
        .find(|&&v| v >= space.cardinality(spec.pivot))
    {
        return Err(Error::ValueOutOfRange {
            variable: spec.pivot,
            value: v,
            cardinality: space.cardinality(spec.pivot),
        });
    }
    let children = (0..space.cardinality(spec.pivot))
        .map(|value| {
            let order = if spec.swap_values.contains(&value) {
                [b, a]
            } else {
                [a, b]
            };
            NodeSpec::uniform(
                Some(Statement::new(spec.pivot, value)),
                chain_children(space, &order),
            )
        })
        .collect();
    PTree::from_spec(space.clone(), NodeSpec::uniform(None, children))
}

/// Variable order shared by every root-to-leaf path, if there is one. Trees
/// with such an order are exactly the fully connected causal Bayesian networks.
pub fn chain_order(tree: &PTree) -> Option<Vec<usize>> {
    let mut order: Vec<Option<usize>> = vec![None; tree.space().len()];
    let mut stack = vec![(0usize, 0usize)];
    while let Some((id, depth)) = stack.pop() {
        let node = tree.node(id);
        let Some(v) = node.split_variable() else {
            continue;
        };
        match order[depth] {
            Some(w) if w != v => return None,
            _ => order[depth] = Some(v),
        }
        stack.extend(node.children.iter().map(|&c| (c, depth + 1)));
    }
    order.into_iter().collect()
}

/// The competing causal hypotheses, joined as the children of a root that
/// branches on the hypothesis variable `G`.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisSet {
    space: VariableSpace,
    subtrees: Vec<PTree>,
    labels: Vec<String>,
    prior_g: Vec<f64>,
}

impl HypothesisSet {
    pub fn from_specs(space: &VariableSpace, specs: &[HypothesisSpec]) -> Result<Self> {
        let trees = specs
            .iter()
            .map(|s| s.build(space))
            .collect::<Result<Vec<_>>>()?;
        let labels = specs.iter().map(|s| s.label(space)).collect();
        build_hypothesis_set(trees, labels)
    }

    /// Every chain ordering of the space's variables.
    pub fn all_chains(space: &VariableSpace) -> Result<Self> {
        let specs: Vec<_> = CausalOrder::all(space.len())
            .into_iter()
            .map(HypothesisSpec::Chain)
            .collect();
        Self::from_specs(space, &specs)
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.subtrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtrees.is_empty()
    }

    pub fn subtree(&self, k: usize) -> &PTree {
        &self.subtrees[k]
    }

    pub fn subtrees(&self) -> &[PTree] {
        &self.subtrees
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn prior_g(&self) -> &[f64] {
        &self.prior_g
    }

    /// Replaces each subtree's transition probabilities; structure must match.
    pub fn with_subtrees(&self, subtrees: Vec<PTree>) -> Result<Self> {
        if subtrees.len() != self.subtrees.len()
            || subtrees
                .iter()
                .zip(&self.subtrees)
                .any(|(a, b)| a.len() != b.len() || a.space() != b.space())
        {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self {
            subtrees,
            ..self.clone()
        })
    }

    /// The single tree whose root branches on `G` (variable 0, named `G`)
    /// and whose `k`-th child holds hypothesis `k`.
    pub fn meta_tree(&self) -> Result<PTree> {
        let mut names = vec!["G".to_string()];
        names.extend(self.space.names().iter().cloned());
        let mut cards = vec![self.subtrees.len()];
        cards.extend_from_slice(self.space.cardinalities());
        let meta_space = VariableSpace::new(names, cards)?;
        let children = self
            .subtrees
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let mut spec = shift_variables(t.to_spec());
                spec.statement = Some(Statement::new(0, k));
                spec
            })
            .collect();
        let root = NodeSpec {
            statement: None,
            theta: self.prior_g.clone(),
            children,
        };
        PTree::from_spec(meta_space, root)
    }
}

fn shift_variables(mut spec: NodeSpec) -> NodeSpec {
    if let Some(s) = spec.statement.as_mut() {
        s.variable += 1;
    }
    spec.children = spec.children.into_iter().map(shift_variables).collect();
    spec
}

/// Joins `trees` under a uniform prior over hypotheses.
pub fn build_hypothesis_set(trees: Vec<PTree>, labels: Vec<String>) -> Result<HypothesisSet> {
    if trees.len() < 2 {
        return Err(Error::param(
            "hypotheses",
            "at least two hypotheses are required",
        ));
    }
    if labels.len() != trees.len() {
        return Err(Error::param(
            "labels",
            format!("{} labels for {} hypotheses", labels.len(), trees.len()),
        ));
    }
    let space = trees[0].space().clone();
    if trees.iter().any(|t| t.space() != &space) {
        return Err(Error::SpaceMismatch);
    }
    let s = trees.len();
    Ok(HypothesisSet {
        space,
        subtrees: trees,
        labels,
        prior_g: vec![1.0 / s as f64; s],
    })
}

/// Dirichlet concentrations `alpha_n` for every node of every hypothesis.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorTable {
    alpha: f64,
    per_node: Vec<Vec<f64>>,
}

impl PriorTable {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Concentration of node `n` in hypothesis `k`; 0 at leaves.
    pub fn concentration(&self, k: usize, n: NodeId) -> f64 {
        self.per_node[k][n]
    }

    pub fn hypothesis(&self, k: usize) -> &[f64] {
        &self.per_node[k]
    }
}

/// Sets `alpha_n = leaves(n) / |ch(n)| * alpha` at every internal node. With
/// these concentrations, purely observational data carries no evidence about
/// `G` for hypotheses that share a leaf set.
pub fn assign_priors(hset: &HypothesisSet, alpha: f64) -> Result<PriorTable> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(
            "alpha",
            format!("must be a positive number, got {alpha}"),
        ));
    }
    let per_node = hset
        .subtrees
        .iter()
        .map(|t| {
            t.nodes()
                .iter()
                .map(|n| {
                    if n.is_leaf() {
                        0.0
                    } else {
                        t.leaf_count(n.id) as f64 / n.num_children() as f64 * alpha
                    }
                })
                .collect()
        })
        .collect();
    Ok(PriorTable { alpha, per_node })
}
