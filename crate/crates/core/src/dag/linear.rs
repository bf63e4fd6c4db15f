use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DagNode, NodeKind, SynthesisDag};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LinearItem {
    Block { pool_index: usize, smiles: String },
    Product { smiles: String },
}

/// Head, tail, product, then (tail, product) repeated. Each product consumes
/// the previous product (or the head) and the block just before it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearList {
    pub items: Vec<LinearItem>,
}

impl LinearList {
    pub fn block_indices(&self) -> Vec<usize> {
        self.items
            .iter()
            .filter_map(|i| match i {
                LinearItem::Block { pool_index, .. } => Some(*pool_index),
                LinearItem::Product { .. } => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not a linear route: {0}")]
pub struct NotLinear(pub String);

pub fn to_linear_list(dag: &SynthesisDag) -> Result<LinearList, NotLinear> {
    let violations = dag.validate();
    if let Some(v) = violations.first() {
        return Err(NotLinear(v.to_string()));
    }
    let n = dag.nodes.len();
    if n < 3 || n % 2 == 0 {
        return Err(NotLinear(format!("{n} nodes")));
    }
    let mut items = Vec::with_capacity(n);
    for (i, node) in dag.nodes.iter().enumerate() {
        let want = if i == 0 || i % 2 == 1 {
            NodeKind::Block
        } else {
            NodeKind::Product
        };
        if node.kind != want {
            return Err(NotLinear(format!("node {i} is a {:?}", node.kind)));
        }
        match node.kind {
            NodeKind::Block => items.push(LinearItem::Block {
                pool_index: node.pool_index.expect("validated"),
                smiles: node.smiles.clone(),
            }),
            NodeKind::Product => {
                let prev = if i == 2 { 0 } else { i - 2 };
                if dag.reactants(i) != [prev, i - 1] {
                    return Err(NotLinear(format!(
                        "product {i} consumes {:?}",
                        dag.reactants(i)
                    )));
                }
                items.push(LinearItem::Product {
                    smiles: node.smiles.clone(),
                });
            }
        }
    }
    Ok(LinearList { items })
}

pub fn from_linear_list(list: &LinearList) -> Result<SynthesisDag, NotLinear> {
    let n = list.items.len();
    if n < 3 || n % 2 == 0 {
        return Err(NotLinear(format!("{n} items")));
    }
    let mut dag = SynthesisDag::default();
    for (i, item) in list.items.iter().enumerate() {
        let block_slot = i == 0 || i % 2 == 1;
        match (item, block_slot) {
            (LinearItem::Block { pool_index, smiles }, true) => {
                dag.nodes.push(DagNode::block(i, *pool_index, smiles.clone()))
            }
            (LinearItem::Product { smiles }, false) => {
                let prev = if i == 2 { 0 } else { i - 2 };
                dag.edges.push((prev, i));
                dag.edges.push((i - 1, i));
                dag.nodes.push(DagNode::product(i, smiles.clone(), i == n - 1));
            }
            _ => return Err(NotLinear(format!("item {i} is out of place"))),
        }
    }
    Ok(dag)
}
