//! On-disk formats: probability trees as JSON and datasets as CSV.
//!
//! Tree documents list every node with its id, the variable name and value it
//! assigns (absent at the root), its transition probabilities as decimal
//! strings, and the ids of its children. Probabilities are written in the
//! shortest form that parses back to the same `f64`.
//!
//! Dataset CSVs have the header `step,intervened_var,intervened_val,x_1..x_m`.
//! Variable indices and values are zero-based; observational rows leave both
//! intervention cells empty.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Dataset, Record};
use crate::ptree::{Assignment, Intervention, NodeId, NodeSpec, PTree, Statement, VariableSpace};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDoc {
    pub name: String,
    pub cardinality: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: NodeId,
    pub variable: Option<String>,
    pub value: Option<usize>,
    pub theta: Vec<String>,
    pub children: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDoc {
    pub variables: Vec<VariableDoc>,
    pub nodes: Vec<NodeDoc>,
}

impl TreeDoc {
    pub fn from_tree(tree: &PTree) -> Self {
        let space = tree.space();
        let variables = space
            .names()
            .iter()
            .zip(space.cardinalities())
            .map(|(name, &cardinality)| VariableDoc {
                name: name.clone(),
                cardinality,
            })
            .collect();
        let nodes = tree
            .nodes()
            .iter()
            .map(|n| NodeDoc {
                id: n.id,
                variable: n.statement.map(|s| space.name(s.variable).to_string()),
                value: n.statement.map(|s| s.value),
                theta: n.theta.iter().map(|t| t.to_string()).collect(),
                children: n.children.clone(),
            })
            .collect();
        Self { variables, nodes }
    }

    /// Node ids may appear in any order but must be unique, and every node
    /// other than the root (id 0) must be the child of exactly one node.
    pub fn to_tree(&self) -> Result<PTree> {
        let space = VariableSpace::new(
            self.variables.iter().map(|v| v.name.clone()).collect(),
            self.variables.iter().map(|v| v.cardinality).collect(),
        )?;
        let mut by_id = HashMap::with_capacity(self.nodes.len());
        for n in &self.nodes {
            if by_id.insert(n.id, n).is_some() {
                return Err(Error::MalformedTree(format!("duplicate node id {}", n.id)));
            }
        }
        let mut seen = HashMap::with_capacity(self.nodes.len());
        let root = build_spec(&space, &by_id, 0, &mut seen)?;
        if seen.len() != self.nodes.len() {
            return Err(Error::MalformedTree(format!(
                "{} nodes are not reachable from the root",
                self.nodes.len() - seen.len()
            )));
        }
        PTree::from_spec(space, root)
    }
}

fn build_spec(
    space: &VariableSpace,
    by_id: &HashMap<NodeId, &NodeDoc>,
    id: NodeId,
    seen: &mut HashMap<NodeId, ()>,
) -> Result<NodeSpec> {
    let doc = by_id
        .get(&id)
        .ok_or_else(|| Error::MalformedTree(format!("missing node id {id}")))?;
    if seen.insert(id, ()).is_some() {
        return Err(Error::MalformedTree(format!(
            "node {id} has more than one parent"
        )));
    }
    let statement = match (&doc.variable, doc.value) {
        (None, None) => None,
        (Some(name), Some(value)) => {
            let variable = space.index_of(name).ok_or_else(|| {
                Error::MalformedTree(format!("node {id}: unknown variable `{name}`"))
            })?;
            Some(Statement::new(variable, value))
        }
        _ => {
            return Err(Error::MalformedTree(format!(
                "node {id}: variable and value must be given together"
            )))
        }
    };
    let theta = doc
        .theta
        .iter()
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::MalformedTree(format!("node {id}: bad probability `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let children = doc
        .children
        .iter()
        .map(|&c| build_spec(space, by_id, c, seen))
        .collect::<Result<Vec<_>>>()?;
    Ok(NodeSpec {
        statement,
        theta,
        children,
    })
}

pub fn tree_to_json(tree: &PTree) -> Result<String> {
    Ok(serde_json::to_string_pretty(&TreeDoc::from_tree(tree))?)
}

pub fn tree_from_json(text: &str) -> Result<PTree> {
    serde_json::from_str::<TreeDoc>(text)?.to_tree()
}

fn dataset_header(space: &VariableSpace) -> Vec<String> {
    let mut h = vec![
        "step".to_string(),
        "intervened_var".into(),
        "intervened_val".into(),
    ];
    h.extend((1..=space.len()).map(|i| format!("x_{i}")));
    h
}

pub fn write_dataset<W: Write>(out: W, space: &VariableSpace, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(dataset_header(space))?;
    for (step, r) in data.records.iter().enumerate() {
        let mut row = vec![step.to_string()];
        match r.intervention.target {
            Some(s) => row.extend([s.variable.to_string(), s.value.to_string()]),
            None => row.extend([String::new(), String::new()]),
        }
        row.extend(r.assignment.values().iter().map(usize::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Parses and validates every record against `space`.
pub fn read_dataset<R: Read>(input: R, space: &VariableSpace) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let expected = dataset_header(space);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(Error::param(
            "dataset",
            format!("header {:?} does not match {:?}", header, expected),
        ));
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let int = |col: usize| -> Result<usize> {
            row[col].parse::<usize>().map_err(|_| {
                Error::param(
                    "dataset",
                    format!("line {line}: `{}` is not an integer", &row[col]),
                )
            })
        };
        int(0)?;
        let intervention = match (row[1].is_empty(), row[2].is_empty()) {
            (true, true) => Intervention::OBSERVE,
            (false, false) => Intervention::on(int(1)?, int(2)?),
            _ => return Err(Error::param(
                "dataset",
                format!(
                    "line {line}: intervened_var and intervened_val must both be set or both empty"
                ),
            )),
        };
        let assignment = Assignment::new((3..row.len()).map(int).collect::<Result<Vec<_>>>()?);
        space.check_assignment(&assignment)?;
        space.check_intervention(&intervention)?;
        if !intervention.admits(&assignment) {
            let s = intervention.target.expect("interventional row");
            return Err(Error::InconsistentRecord {
                variable: s.variable,
                value: assignment.get(s.variable),
                forced: s.value,
            });
        }
        records.push(Record::new(assignment, intervention));
    }
    Ok(Dataset::new(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::{chain_tree, CausalOrder};

    fn sample_tree() -> PTree {
        let space = VariableSpace::with_cardinalities(&[2, 3]).unwrap();
        let t = chain_tree(&space, &CausalOrder::new(vec![1, 0]).unwrap()).unwrap();
        t.map_theta(|n, _| match n.theta.len() {
            3 => vec![0.1, 0.2, 0.7],
            _ => vec![1.0 / 3.0, 2.0 / 3.0],
        })
        .unwrap()
    }

    #[test]
    fn tree_json_round_trip() {
        let t = sample_tree();
        let json = tree_to_json(&t).unwrap();
        let back = tree_from_json(&json).unwrap();
        assert_eq!(back.nodes(), t.nodes());
        assert_eq!(back.space(), t.space());
        assert_eq!(tree_to_json(&back).unwrap(), json);
        assert!(json.contains("\"0.1\""));
    }

    #[test]
    fn tree_json_rejects_bad_ids() {
        let mut doc = TreeDoc::from_tree(&sample_tree());
        doc.nodes[2].id = doc.nodes[1].id;
        assert!(doc.to_tree().is_err());

        let mut doc = TreeDoc::from_tree(&sample_tree());
        doc.nodes[0].children[0] = 99;
        assert!(doc.to_tree().is_err());

        let mut doc = TreeDoc::from_tree(&sample_tree());
        doc.nodes[0].theta[0] = "abc".into();
        assert!(doc.to_tree().is_err());

        let mut doc = TreeDoc::from_tree(&sample_tree());
        doc.nodes.push(NodeDoc {
            id: 50,
            variable: None,
            value: None,
            theta: vec![],
            children: vec![],
        });
        assert!(doc.to_tree().is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let space = VariableSpace::with_cardinalities(&[2, 3]).unwrap();
        let data = Dataset::new(vec![
            Record::observed(Assignment::new(vec![1, 2])),
            Record::new(Assignment::new(vec![0, 1]), Intervention::on(1, 1)),
        ]);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &space, &data).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "step,intervened_var,intervened_val,x_1,x_2\n0,,,1,2\n1,1,1,0,1\n"
        );
        assert_eq!(read_dataset(&buf[..], &space).unwrap(), data);
    }

    #[test]
    fn dataset_errors() {
        let space = VariableSpace::with_cardinalities(&[2, 3]).unwrap();
        let bad = [
            "step,var,val,x_1,x_2\n",
            "step,intervened_var,intervened_val,x_1,x_2\n0,,,1,3\n",
            "step,intervened_var,intervened_val,x_1,x_2\n0,1,,1,2\n",
            "step,intervened_var,intervened_val,x_1,x_2\n0,1,0,1,2\n",
            "step,intervened_var,intervened_val,x_1,x_2\n0,,,a,2\n",
            "step,intervened_var,intervened_val,x_1,x_2\n0,,,1\n",
        ];
        for text in bad {
            assert!(read_dataset(text.as_bytes(), &space).is_err(), "{text}");
        }
    }
}
