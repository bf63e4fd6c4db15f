use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DagNode, NodeKind, SynthesisDag, Violation};
use crate::blocks::BuildingBlockPool;
use crate::molgraph::{canonical_smiles, parse_smiles, Molecule};
use crate::reactions::ReactionPredictor;

/// One step of a route. Blocks are `[NodeAddBlock, Identity]`, products are
/// `[NodeAddProduct, Connect.., Continue | Stop]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Action {
    NodeAddBlock,
    NodeAddProduct,
    Identity(usize),
    Connect(usize),
    Continue,
    Stop,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::NodeAddBlock => f.write_str("add_block"),
            Action::NodeAddProduct => f.write_str("add_product"),
            Action::Identity(i) => write!(f, "identity:{i}"),
            Action::Connect(i) => write!(f, "connect:{i}"),
            Action::Continue => f.write_str("continue"),
            Action::Stop => f.write_str("stop"),
        }
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |x: &str| x.parse::<usize>().map_err(|_| format!("bad index in '{s}'"));
        match s.split_once(':') {
            Some(("identity", n)) => Ok(Action::Identity(num(n)?)),
            Some(("connect", n)) => Ok(Action::Connect(num(n)?)),
            None => match s {
                "add_block" => Ok(Action::NodeAddBlock),
                "add_product" => Ok(Action::NodeAddProduct),
                "continue" => Ok(Action::Continue),
                "stop" => Ok(Action::Stop),
                _ => Err(format!("unknown action '{s}'")),
            },
            _ => Err(format!("unknown action '{s}'")),
        }
    }
}

impl From<Action> for String {
    fn from(a: Action) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for Action {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

pub type ActionSequence = Vec<Action>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("action {position}: {message}")]
pub struct GrammarError {
    pub position: usize,
    pub message: String,
}

fn gerr(position: usize, message: impl Into<String>) -> GrammarError {
    GrammarError {
        position,
        message: message.into(),
    }
}

/// One parsed node of a sequence.
enum Step {
    Block { at: usize, pool_index: usize },
    Product { at: usize, reactants: Vec<usize>, last: bool },
}

fn parse_steps(seq: &[Action]) -> Result<Vec<Step>, GrammarError> {
    let mut steps = Vec::new();
    let mut i = 0;
    let mut stopped = false;
    while i < seq.len() {
        if stopped {
            return Err(gerr(i, "action after stop"));
        }
        let at = i;
        match seq[i] {
            Action::NodeAddBlock => {
                match seq.get(i + 1) {
                    Some(&Action::Identity(p)) => steps.push(Step::Block { at, pool_index: p }),
                    Some(a) => return Err(gerr(i + 1, format!("expected identity, got {a}"))),
                    None => return Err(gerr(i + 1, "sequence ends before identity")),
                }
                i += 2;
            }
            Action::NodeAddProduct => {
                let id = steps.len();
                if id == 0 {
                    return Err(gerr(i, "product before any block"));
                }
                i += 1;
                let mut reactants = Vec::new();
                let mut used = HashSet::new();
                loop {
                    match seq.get(i) {
                        Some(&Action::Connect(n)) => {
                            if n >= id {
                                return Err(gerr(i, format!("connect to missing node {n}")));
                            }
                            if !used.insert(n) {
                                return Err(gerr(i, format!("node {n} connected twice")));
                            }
                            reactants.push(n);
                            i += 1;
                        }
                        Some(&a @ (Action::Continue | Action::Stop)) => {
                            if reactants.is_empty() {
                                return Err(gerr(i, format!("{a} before any connect")));
                            }
                            stopped = a == Action::Stop;
                            i += 1;
                            break;
                        }
                        Some(a) => return Err(gerr(i, format!("unexpected {a} inside product"))),
                        None => return Err(gerr(i, "sequence ends inside product")),
                    }
                }
                steps.push(Step::Product {
                    at,
                    reactants,
                    last: stopped,
                });
            }
            a => return Err(gerr(i, format!("unexpected {a}"))),
        }
    }
    if !stopped {
        return Err(gerr(seq.len(), "sequence does not end with stop"));
    }
    Ok(steps)
}

/// Accepts exactly the sequences `deserialize` can turn into a DAG, given
/// a pool and products for every reaction.
pub fn check_grammar(seq: &[Action]) -> Result<(), GrammarError> {
    parse_steps(seq).map(|_| ())
}

/// The action sequence of a valid DAG, nodes in id order and connects
/// ascending.
pub fn serialize(dag: &SynthesisDag) -> Result<ActionSequence, Vec<Violation>> {
    let violations = dag.validate();
    if !violations.is_empty() {
        return Err(violations);
    }
    let mut out = Vec::new();
    for node in &dag.nodes {
        match node.kind {
            NodeKind::Block => {
                out.push(Action::NodeAddBlock);
                out.push(Action::Identity(node.pool_index.expect("validated")));
            }
            NodeKind::Product => {
                out.push(Action::NodeAddProduct);
                out.extend(dag.reactants(node.id).into_iter().map(Action::Connect));
                out.push(if node.is_final() {
                    Action::Stop
                } else {
                    Action::Continue
                });
            }
        }
    }
    Ok(out)
}

/// Where product structures come from while rebuilding a DAG.
pub enum ProductSource<'a> {
    /// Run each reaction; reactants are passed in ascending node id.
    Predictor(&'a dyn ReactionPredictor),
    /// Recorded product SMILES, one per product node in order.
    Transcript(&'a [String]),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeserializeError {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("action {position}: pool index {index} out of range")]
    UnknownBlock { position: usize, index: usize },
    #[error("action {position}: reaction failed: {message}")]
    Reaction { position: usize, message: String },
    #[error("action {position}: transcript has no product for this node")]
    TranscriptShort { position: usize },
    #[error("transcript has {extra} unused products")]
    TranscriptLong { extra: usize },
}

pub fn deserialize(
    seq: &[Action],
    pool: &BuildingBlockPool,
    source: ProductSource<'_>,
) -> Result<SynthesisDag, DeserializeError> {
    let steps = parse_steps(seq)?;
    let mut dag = SynthesisDag::default();
    let mut mols: Vec<Molecule> = Vec::new();
    let mut products_used = 0;
    for step in steps {
        let id = dag.nodes.len();
        match step {
            Step::Block { at, pool_index } => {
                let block = pool.get(pool_index).ok_or(DeserializeError::UnknownBlock {
                    position: at + 1,
                    index: pool_index,
                })?;
                dag.nodes.push(DagNode::block(id, pool_index, block.smiles.clone()));
                mols.push(block.molecule.clone());
            }
            Step::Product { at, mut reactants, last } => {
                reactants.sort_unstable();
                let mol = match &source {
                    ProductSource::Predictor(p) => {
                        let input: Vec<Molecule> = reactants.iter().map(|&r| mols[r].clone()).collect();
                        let outcome = p.predict(&input);
                        match outcome.main_product() {
                            Some(m) => m.clone(),
                            None => {
                                return Err(DeserializeError::Reaction {
                                    position: at,
                                    message: outcome
                                        .message
                                        .unwrap_or_else(|| outcome.status.as_str().to_string()),
                                })
                            }
                        }
                    }
                    ProductSource::Transcript(t) => {
                        let s = t
                            .get(products_used)
                            .ok_or(DeserializeError::TranscriptShort { position: at })?;
                        parse_smiles(s).map_err(|e| DeserializeError::Reaction {
                            position: at,
                            message: e.to_string(),
                        })?
                    }
                };
                products_used += 1;
                for &r in &reactants {
                    dag.edges.push((r, id));
                }
                dag.nodes.push(DagNode::product(id, canonical_smiles(&mol), last));
                mols.push(mol);
            }
        }
    }
    if let ProductSource::Transcript(t) = source {
        if t.len() > products_used {
            return Err(DeserializeError::TranscriptLong {
                extra: t.len() - products_used,
            });
        }
    }
    Ok(dag)
}
