//! Discrete probability trees.
//!
//! A tree is stored as an arena of nodes in depth-first preorder, so a node's
//! id is also its index. Every internal node branches on exactly one variable
//! and has one child per value of that variable; along any root-to-leaf path
//! each variable is assigned exactly once. Trees are immutable once built:
//! [`PTree::intervene`] and [`PTree::map_theta`] return transformed copies.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Tolerance on `sum(theta) == 1` when a tree is validated.
pub const THETA_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpace {
    names: Vec<String>,
    cardinalities: Vec<usize>,
}

impl VariableSpace {
    pub fn new(names: Vec<String>, cardinalities: Vec<usize>) -> Result<Self> {
        if cardinalities.is_empty() {
            return Err(Error::param(
                "cardinalities",
                "at least one variable is required",
            ));
        }
        if names.len() != cardinalities.len() {
            return Err(Error::param(
                "names",
                format!(
                    "{} names for {} variables",
                    names.len(),
                    cardinalities.len()
                ),
            ));
        }
        if let Some(c) = cardinalities.iter().find(|&&c| c < 2) {
            return Err(Error::param(
                "cardinalities",
                format!("cardinality {c} is below 2"),
            ));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::param(
                    "names",
                    format!("duplicate variable name `{n}`"),
                ));
            }
        }
        Ok(Self {
            names,
            cardinalities,
        })
    }

    /// Variables named `X1..Xm`.
    pub fn with_cardinalities(cardinalities: &[usize]) -> Result<Self> {
        let names = (1..=cardinalities.len()).map(|i| format!("X{i}")).collect();
        Self::new(names, cardinalities.to_vec())
    }

    pub fn len(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cardinalities.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, variable: usize) -> &str {
        &self.names[variable]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn cardinality(&self, variable: usize) -> usize {
        self.cardinalities[variable]
    }

    /// Number of complete assignments.
    pub fn num_assignments(&self) -> u128 {
        self.cardinalities.iter().map(|&c| c as u128).product()
    }

    pub fn check_variable(&self, variable: usize) -> Result<()> {
        if variable >= self.len() {
            return Err(Error::UnknownVariable {
                variable,
                num_variables: self.len(),
            });
        }
        Ok(())
    }

    pub fn check_statement(&self, s: Statement) -> Result<()> {
        self.check_variable(s.variable)?;
        let cardinality = self.cardinalities[s.variable];
        if s.value >= cardinality {
            return Err(Error::ValueOutOfRange {
                variable: s.variable,
                value: s.value,
                cardinality,
            });
        }
        Ok(())
    }

    pub fn check_assignment(&self, x: &Assignment) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::AssignmentLength {
                got: x.len(),
                expected: self.len(),
            });
        }
        for (variable, &value) in x.values().iter().enumerate() {
            self.check_statement(Statement { variable, value })?;
        }
        Ok(())
    }

    pub fn check_intervention(&self, j: &Intervention) -> Result<()> {
        match j.target {
            Some(s) => self.check_statement(s),
            None => Ok(()),
        }
    }

    /// Mixed-radix index of an assignment; the first variable is the most
    /// significant digit.
    pub fn assignment_index(&self, x: &Assignment) -> usize {
        x.values()
            .iter()
            .zip(&self.cardinalities)
            .fold(0, |acc, (&v, &c)| acc * c + v)
    }

    pub fn assignment_at(&self, mut index: usize) -> Assignment {
        let mut values = vec![0; self.len()];
        for (slot, &c) in values.iter_mut().zip(&self.cardinalities).rev() {
            *slot = index % c;
            index /= c;
        }
        Assignment::new(values)
    }

    /// All complete assignments in index order.
    pub fn assignments(&self) -> impl Iterator<Item = Assignment> + '_ {
        let total = self.num_assignments() as usize;
        (0..total).map(move |i| self.assignment_at(i))
    }

    /// Number of complete assignments that agree with `j`.
    pub fn num_consistent(&self, j: &Intervention) -> u128 {
        match j.target {
            Some(s) => self.num_assignments() / self.cardinalities[s.variable] as u128,
            None => self.num_assignments(),
        }
    }

    /// Complete assignments that agree with the intervention target, in
    /// index order.
    pub fn consistent_assignments<'a>(
        &'a self,
        j: &'a Intervention,
    ) -> impl Iterator<Item = Assignment> + 'a {
        self.assignments().filter(move |x| j.admits(x))
    }

    pub fn describe(&self, s: Statement) -> String {
        format!("{}={}", self.names[s.variable], s.value)
    }
}

/// `X_variable = value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Statement {
    pub variable: usize,
    pub value: usize,
}

impl Statement {
    pub fn new(variable: usize, value: usize) -> Self {
        Self { variable, value }
    }
}

/// A complete assignment of every variable in a [`VariableSpace`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment(Vec<usize>);

impl Assignment {
    pub fn new(values: Vec<usize>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, variable: usize) -> usize {
        self.0[variable]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn satisfies(&self, s: Statement) -> bool {
        self.0.get(s.variable) == Some(&s.value)
    }
}

impl From<Vec<usize>> for Assignment {
    fn from(values: Vec<usize>) -> Self {
        Self(values)
    }
}

/// A single-variable intervention `do(X = x)`, or passive observation when
/// `target` is `None`.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Intervention {
    pub target: Option<Statement>,
}

impl Intervention {
    pub const OBSERVE: Intervention = Intervention { target: None };

    pub fn on(variable: usize, value: usize) -> Self {
        Self {
            target: Some(Statement { variable, value }),
        }
    }

    pub fn is_observational(&self) -> bool {
        self.target.is_none()
    }

    pub fn variable(&self) -> Option<usize> {
        self.target.map(|s| s.variable)
    }

    /// Whether a complete assignment is possible under this intervention.
    pub fn admits(&self, x: &Assignment) -> bool {
        self.target.is_none_or(|s| x.satisfies(s))
    }

    pub(crate) fn check_record(&self, x: &Assignment) -> Result<()> {
        if let Some(s) = self.target {
            if x.get(s.variable) != s.value {
                return Err(Error::InconsistentRecord {
                    variable: s.variable,
                    value: x.get(s.variable),
                    forced: s.value,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Intervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.target {
            Some(s) => write!(f, "do(X{}={})", s.variable + 1, s.value),
            None => write!(f, "observe"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PNode {
    pub id: NodeId,
    /// `None` marks the root, which carries the dummy statement `O = 1`.
    pub statement: Option<Statement>,
    pub children: Vec<NodeId>,
    pub theta: Vec<f64>,
    /// Variable assigned by the children of this node.
    split: Option<usize>,
    /// `by_value[v]` is the index into `children` of the child assigning `v`.
    by_value: Vec<usize>,
    leaves: usize,
}

impl PNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn num_children(&self) -> usize {
        self.children.len()
    }

    /// The variable this node's children assign, if internal.
    pub fn split_variable(&self) -> Option<usize> {
        self.split
    }

    /// Position in `children` of the child assigning `value` to the split variable.
    pub fn child_index_for(&self, value: usize) -> usize {
        self.by_value[value]
    }
}

/// Nested description of a tree, used to build a [`PTree`].
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSpec {
    pub statement: Option<Statement>,
    pub theta: Vec<f64>,
    pub children: Vec<NodeSpec>,
}

impl NodeSpec {
    pub fn leaf(statement: Statement) -> Self {
        Self {
            statement: Some(statement),
            theta: Vec::new(),
            children: Vec::new(),
        }
    }

    /// An internal node with uniform transition probabilities.
    pub fn uniform(statement: Option<Statement>, children: Vec<NodeSpec>) -> Self {
        let n = children.len();
        Self {
            statement,
            theta: vec![1.0 / n as f64; n],
            children,
        }
    }
}

/// One step of a realization path: the node visited and, unless it is the
/// leaf, the index of the child taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathStep {
    pub node: NodeId,
    pub child: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PTree {
    space: VariableSpace,
    nodes: Vec<PNode>,
}

impl PTree {
    /// Builds a tree from a nested spec, assigning preorder ids and checking
    /// every structural invariant.
    pub fn from_spec(space: VariableSpace, root: NodeSpec) -> Result<Self> {
        if root.statement.is_some() {
            return Err(Error::MalformedTree(
                "the root must not carry a statement".into(),
            ));
        }
        let mut nodes = Vec::new();
        let mut assigned = vec![false; space.len()];
        flatten(&space, root, &mut nodes, &mut assigned)?;
        Ok(Self { space, nodes })
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn root(&self) -> &PNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &PNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[PNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of leaves below `id`; 1 for a leaf.
    pub fn leaf_count(&self, id: NodeId) -> usize {
        self.nodes[id].leaves
    }

    /// The unique root-to-leaf path whose statements agree with `x`.
    pub fn realization_path(&self, x: &Assignment) -> Result<Vec<PathStep>> {
        self.space.check_assignment(x)?;
        let mut path = Vec::with_capacity(self.space.len() + 1);
        let mut id = 0;
        loop {
            let node = &self.nodes[id];
            match node.split {
                None => {
                    path.push(PathStep {
                        node: id,
                        child: None,
                    });
                    return Ok(path);
                }
                Some(v) => {
                    let c = node.by_value[x.get(v)];
                    path.push(PathStep {
                        node: id,
                        child: Some(c),
                    });
                    id = node.children[c];
                }
            }
        }
    }

    pub fn realization_probability(&self, x: &Assignment) -> Result<f64> {
        Ok(self
            .realization_path(x)?
            .iter()
            .filter_map(|s| s.child.map(|c| self.nodes[s.node].theta[c]))
            .product())
    }

    /// Total probability of the realizations satisfying every statement in
    /// `event`. Contradictory events have probability 0.
    pub fn event_probability(&self, event: &[Statement]) -> Result<f64> {
        let mut required: Vec<Option<usize>> = vec![None; self.space.len()];
        for &s in event {
            self.space.check_statement(s)?;
            match required[s.variable] {
                Some(v) if v != s.value => return Ok(0.0),
                _ => required[s.variable] = Some(s.value),
            }
        }
        Ok(self.event_mass(0, &required))
    }

    fn event_mass(&self, id: NodeId, required: &[Option<usize>]) -> f64 {
        let node = &self.nodes[id];
        let Some(v) = node.split else {
            return 1.0;
        };
        match required[v] {
            Some(value) => {
                let c = node.by_value[value];
                node.theta[c] * self.event_mass(node.children[c], required)
            }
            None => node
                .children
                .iter()
                .zip(&node.theta)
                .map(|(&child, &t)| t * self.event_mass(child, required))
                .sum(),
        }
    }

    /// The intervened tree: every node whose children assign the target
    /// variable puts probability 1 on the child with the target value.
    pub fn intervene(&self, j: &Intervention) -> Result<PTree> {
        let Some(target) = j.target else {
            return Err(Error::param("intervention", "intervene requires a target"));
        };
        self.space.check_statement(target)?;
        if !self.nodes.iter().any(|n| n.split == Some(target.variable)) {
            return Err(Error::UnassignedVariable(target.variable));
        }
        let mut out = self.clone();
        for node in out.nodes.iter_mut() {
            if node.split == Some(target.variable) {
                let forced = node.by_value[target.value];
                for (c, t) in node.theta.iter_mut().enumerate() {
                    *t = if c == forced { 1.0 } else { 0.0 };
                }
            }
        }
        Ok(out)
    }

    /// Draws a complete assignment from the (possibly intervened) generative
    /// process.
    pub fn sample<R: Rng + ?Sized>(&self, j: &Intervention, rng: &mut R) -> Result<Assignment> {
        self.space.check_intervention(j)?;
        let mut values = vec![0; self.space.len()];
        let mut id = 0;
        while let Some(v) = self.nodes[id].split {
            let node = &self.nodes[id];
            let c = match j.target {
                Some(s) if s.variable == v => node.by_value[s.value],
                _ => draw_index(&node.theta, rng),
            };
            id = node.children[c];
            let s = self.nodes[id]
                .statement
                .expect("non-root node carries a statement");
            values[s.variable] = s.value;
        }
        Ok(Assignment::new(values))
    }

    /// Copies the tree with new transition probabilities. `f` receives each
    /// internal node together with the statements on the path from the root
    /// to it (inclusive of the node's own statement).
    pub fn map_theta<F>(&self, mut f: F) -> Result<PTree>
    where
        F: FnMut(&PNode, &[Statement]) -> Vec<f64>,
    {
        let mut out = self.clone();
        let mut context = Vec::with_capacity(self.space.len());
        self.map_theta_rec(0, &mut context, &mut out, &mut f)?;
        Ok(out)
    }

    fn map_theta_rec<F>(
        &self,
        id: NodeId,
        context: &mut Vec<Statement>,
        out: &mut PTree,
        f: &mut F,
    ) -> Result<()>
    where
        F: FnMut(&PNode, &[Statement]) -> Vec<f64>,
    {
        let node = &self.nodes[id];
        if node.is_leaf() {
            return Ok(());
        }
        if let Some(s) = node.statement {
            context.push(s);
        }
        let theta = f(node, context);
        check_theta(id, &theta, node.children.len())?;
        out.nodes[id].theta = theta;
        for &child in &node.children {
            self.map_theta_rec(child, context, out, f)?;
        }
        if node.statement.is_some() {
            context.pop();
        }
        Ok(())
    }

    /// Nested form of the tree, suitable for rebuilding or serialization.
    pub fn to_spec(&self) -> NodeSpec {
        self.spec_at(0)
    }

    fn spec_at(&self, id: NodeId) -> NodeSpec {
        let node = &self.nodes[id];
        NodeSpec {
            statement: node.statement,
            theta: node.theta.clone(),
            children: node.children.iter().map(|&c| self.spec_at(c)).collect(),
        }
    }
}

pub(crate) fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

fn check_theta(id: NodeId, theta: &[f64], children: usize) -> Result<()> {
    if theta.len() != children {
        return Err(Error::MalformedTree(format!(
            "node {id} has {children} children but {} transition probabilities",
            theta.len()
        )));
    }
    if theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::MalformedTree(format!(
            "node {id} has a transition probability outside [0, 1]"
        )));
    }
    let sum: f64 = theta.iter().sum();
    if (sum - 1.0).abs() > THETA_SUM_TOLERANCE {
        return Err(Error::MalformedTree(format!(
            "transition probabilities of node {id} sum to {sum}"
        )));
    }
    Ok(())
}

fn flatten(
    space: &VariableSpace,
    spec: NodeSpec,
    nodes: &mut Vec<PNode>,
    assigned: &mut [bool],
) -> Result<usize> {
    let id = nodes.len();
    if let Some(s) = spec.statement {
        space.check_statement(s)?;
    }
    if spec.children.is_empty() {
        if let Some(v) = assigned.iter().position(|a| !a) {
            return Err(Error::MalformedTree(format!(
                "leaf {id} is reached without assigning {}",
                space.name(v)
            )));
        }
        if !spec.theta.is_empty() {
            return Err(Error::MalformedTree(format!(
                "leaf {id} carries transition probabilities"
            )));
        }
        nodes.push(PNode {
            id,
            statement: spec.statement,
            children: Vec::new(),
            theta: Vec::new(),
            split: None,
            by_value: Vec::new(),
            leaves: 1,
        });
        return Ok(1);
    }

    check_theta(id, &spec.theta, spec.children.len())?;
    let split = spec.children[0]
        .statement
        .ok_or_else(|| Error::MalformedTree(format!("a child of node {id} has no statement")))?
        .variable;
    space.check_variable(split)?;
    if assigned[split] {
        return Err(Error::MalformedTree(format!(
            "{} is assigned twice on the path through node {id}",
            space.name(split)
        )));
    }
    let cardinality = space.cardinality(split);
    if spec.children.len() != cardinality {
        return Err(Error::MalformedTree(format!(
            "node {id} has {} children but {} has {cardinality} values",
            spec.children.len(),
            space.name(split)
        )));
    }
    let mut by_value = vec![usize::MAX; cardinality];
    for (c, child) in spec.children.iter().enumerate() {
        match child.statement {
            Some(s) if s.variable == split => {
                space.check_statement(s)?;
                if by_value[s.value] != usize::MAX {
                    return Err(Error::MalformedTree(format!(
                        "node {id} has two children assigning {}",
                        space.describe(s)
                    )));
                }
                by_value[s.value] = c;
            }
            _ => {
                return Err(Error::MalformedTree(format!(
                    "children of node {id} do not all assign {}",
                    space.name(split)
                )))
            }
        }
    }

    nodes.push(PNode {
        id,
        statement: spec.statement,
        children: Vec::with_capacity(cardinality),
        theta: spec.theta,
        split: Some(split),
        by_value,
        leaves: 0,
    });
    assigned[split] = true;
    let mut leaves = 0;
    for child in spec.children {
        let child_id = nodes.len();
        leaves += flatten(space, child, nodes, assigned)?;
        nodes[id].children.push(child_id);
    }
    assigned[split] = false;
    nodes[id].leaves = leaves;
    Ok(leaves)
}
