//! Synthesis routes as DAGs of building-block and product nodes, their
//! action-sequence serialization and the linear-list form.

mod actions;
mod linear;

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use actions::{
    check_grammar, deserialize, serialize, Action, ActionSequence, DeserializeError,
    GrammarError, ProductSource,
};
pub use linear::{from_linear_list, to_linear_list, LinearItem, LinearList, NotLinear};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Block,
    Product,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagNode {
    pub id: usize,
    pub kind: NodeKind,
    pub smiles: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_index: Option<usize>,
    #[serde(default, rename = "final", skip_serializing_if = "Option::is_none")]
    pub is_final: Option<bool>,
}

impl DagNode {
    pub fn block(id: usize, pool_index: usize, smiles: impl Into<String>) -> Self {
        DagNode {
            id,
            kind: NodeKind::Block,
            smiles: smiles.into(),
            pool_index: Some(pool_index),
            is_final: None,
        }
    }

    pub fn product(id: usize, smiles: impl Into<String>, is_final: bool) -> Self {
        DagNode {
            id,
            kind: NodeKind::Product,
            smiles: smiles.into(),
            pool_index: None,
            is_final: Some(is_final),
        }
    }

    pub fn is_final(&self) -> bool {
        self.is_final == Some(true)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisDag {
    pub nodes: Vec<DagNode>,
    pub edges: Vec<(usize, usize)>,
}

/// A broken invariant, named by `rule`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

impl SynthesisDag {
    /// Reactant ids of `node`, ascending.
    pub fn reactants(&self, node: usize) -> Vec<usize> {
        let mut r: Vec<usize> = self.edges.iter().filter(|e| e.1 == node).map(|e| e.0).collect();
        r.sort_unstable();
        r
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == node).count()
    }

    pub fn final_product(&self) -> Option<&DagNode> {
        self.nodes.iter().find(|n| n.is_final())
    }

    pub fn blocks(&self) -> impl Iterator<Item = &DagNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Block)
    }

    pub fn products(&self) -> impl Iterator<Item = &DagNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Product)
    }

    /// Pool indices of the block nodes in id order.
    pub fn block_indices(&self) -> Vec<usize> {
        self.blocks().filter_map(|n| n.pool_index).collect()
    }

    /// Every invariant violation; empty means the DAG is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let n = self.nodes.len();
        let mut push = |rule, detail: String| v.push(Violation { rule, detail });
        if n == 0 {
            push("non-empty", "DAG has no nodes".into());
            return v;
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                push("dense ids", format!("node at position {i} has id {}", node.id));
            }
            match node.kind {
                NodeKind::Block => {
                    if node.pool_index.is_none() {
                        push("block pool index", format!("block {i} has no pool index"));
                    }
                    if node.is_final.is_some() {
                        push("block final flag", format!("block {i} carries a final flag"));
                    }
                }
                NodeKind::Product => {
                    if node.pool_index.is_some() {
                        push("product pool index", format!("product {i} carries a pool index"));
                    }
                    if node.is_final.is_none() {
                        push("product final flag", format!("product {i} lacks a final flag"));
                    }
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in &self.edges {
            if a >= n || b >= n {
                push("edge endpoints", format!("edge {a}->{b} leaves the node list"));
                continue;
            }
            if !seen.insert((a, b)) {
                push("duplicate edge", format!("edge {a}->{b} repeated"));
            }
            if a >= b {
                push("edge order", format!("edge {a}->{b} does not point forward"));
            }
        }
        if has_cycle(n, &self.edges) {
            push("acyclicity", "edges contain a cycle".into());
        }
        let finals: Vec<usize> = self.nodes.iter().filter(|x| x.is_final()).map(|x| x.id).collect();
        match finals.len() {
            1 => {
                let f = finals[0];
                if self.out_degree(f) != 0 {
                    push("final out-degree", format!("final product {f} is consumed"));
                }
                if f != n - 1 {
                    push("final last", format!("final product {f} is not the last node"));
                }
            }
            0 => push("unique final", "no final product".into()),
            k => push("unique final", format!("{k} final products")),
        }
        for node in &self.nodes {
            let indeg = self.edges.iter().filter(|e| e.1 == node.id).count();
            match node.kind {
                NodeKind::Block if indeg != 0 => {
                    push("block in-degree", format!("block {} has {indeg} reactants", node.id))
                }
                NodeKind::Product if indeg < 2 => {
                    push("product in-degree", format!("product {} has {indeg} reactants", node.id))
                }
                _ => {}
            }
        }
        v
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("DAG serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

fn has_cycle(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0usize; n];
    for &(a, b) in edges {
        if a < n && b < n {
            indeg[b] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut visited = 0;
    while let Some(u) = stack.pop() {
        visited += 1;
        for &(a, b) in edges {
            if a == u && b < n {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    stack.push(b);
                }
            }
        }
    }
    visited < n
}

#[derive(Debug, Error)]
pub enum DagFileError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn read_dags<R: BufRead>(reader: R) -> Result<Vec<SynthesisDag>, DagFileError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(SynthesisDag::from_json_line(&line).map_err(|e| DagFileError::Format {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_dags<'a, W: Write>(
    mut w: W,
    dags: impl IntoIterator<Item = &'a SynthesisDag>,
) -> io::Result<()> {
    for d in dags {
        w.write_all(d.to_json_line().as_bytes())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
