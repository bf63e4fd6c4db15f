//! Request and response bodies of the reaction service.

use serde::{Deserialize, Serialize};

use super::{OutcomeStatus, ReactionOutcome};
use crate::molgraph::{canonical_smiles, parse_smiles};
use crate::properties::SiteRole;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactRequest {
    pub reactants: Vec<String>,
    #[serde(default = "one")]
    pub max_products: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireOutcome {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub products: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl WireOutcome {
    pub fn error(message: impl Into<String>) -> Self {
        WireOutcome {
            status: "error".to_string(),
            products: None,
            message: Some(message.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRequest {
    pub items: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResponse {
    pub results: Vec<WireOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkaRequest {
    pub smiles: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSite {
    pub atom: usize,
    pub pka: f64,
    pub role: SiteRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkaResponse {
    pub sites: Vec<WireSite>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub smiles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

/// Main product first, then by-products, cut to `max_products`.
pub fn outcome_to_wire(o: &ReactionOutcome, max_products: usize) -> WireOutcome {
    match o.status {
        OutcomeStatus::Ok => WireOutcome {
            status: "ok".to_string(),
            products: Some(
                o.products
                    .iter()
                    .chain(&o.by_products)
                    .take(max_products.max(1))
                    .map(canonical_smiles)
                    .collect(),
            ),
            message: None,
        },
        OutcomeStatus::NoReaction => WireOutcome {
            status: "no_reaction".to_string(),
            products: Some(Vec::new()),
            message: None,
        },
        OutcomeStatus::Error => {
            WireOutcome::error(o.message.clone().unwrap_or_else(|| "reaction failed".to_string()))
        }
    }
}

/// Decodes a reply, re-validating every product SMILES.
pub fn wire_to_outcome(w: WireOutcome) -> ReactionOutcome {
    match w.status.as_str() {
        "ok" => {
            let texts = w.products.unwrap_or_default();
            if texts.is_empty() {
                return ReactionOutcome::error("ok reply without products");
            }
            let mut mols = Vec::with_capacity(texts.len());
            for t in &texts {
                match parse_smiles(t) {
                    Ok(m) => mols.push(m.with_source(t.clone())),
                    Err(e) => return ReactionOutcome::error(format!("invalid product SMILES '{t}': {e}")),
                }
            }
            let by_products = mols.split_off(1);
            ReactionOutcome {
                status: OutcomeStatus::Ok,
                products: mols,
                by_products,
                template: None,
                message: None,
                trace: None,
            }
        }
        "no_reaction" => ReactionOutcome::no_reaction(),
        "error" => ReactionOutcome::error(w.message.unwrap_or_else(|| "remote error".to_string())),
        other => ReactionOutcome::error(format!("unknown status '{other}'")),
    }
}
