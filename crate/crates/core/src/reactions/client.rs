use super::protocol::{wire_to_outcome, BatchRequest, BatchResponse, ReactRequest, WireOutcome};
use super::{ReactionOutcome, ReactionPredictor};
use crate::molgraph::{canonical_smiles, Molecule};
use crate::transport::{JsonClient, TransportError};

/// Predictor backed by a reaction server speaking the JSON protocol.
#[derive(Debug, Clone)]
pub struct RemotePredictor {
    client: JsonClient,
}

fn transport_failure(e: TransportError) -> ReactionOutcome {
    if let TransportError::Rejected { body, status, .. } = &e {
        if let Ok(w) = serde_json::from_str::<WireOutcome>(body) {
            if w.status == "error" {
                let msg = w.message.unwrap_or_default();
                return ReactionOutcome::error(format!("server error {status}: {msg}"));
            }
        }
    }
    ReactionOutcome::error(e.to_string())
}

fn smiles_of(reactants: &[Molecule]) -> Vec<String> {
    reactants.iter().map(canonical_smiles).collect()
}

impl RemotePredictor {
    pub fn new(client: JsonClient) -> Self {
        RemotePredictor { client }
    }

    pub fn client(&self) -> &JsonClient {
        &self.client
    }

    /// Sends raw SMILES without local parsing.
    pub fn predict_smiles(&self, reactants: &[String]) -> ReactionOutcome {
        let req = ReactRequest {
            reactants: reactants.to_vec(),
            max_products: 1,
        };
        match self.client.post::<_, WireOutcome>("/api/v1/react", &req) {
            Ok(w) => wire_to_outcome(w),
            Err(e) => transport_failure(e),
        }
    }

    pub fn healthy(&self) -> bool {
        matches!(self.client.get_text("/healthz"), Ok(t) if t.trim() == "ok")
    }
}

impl ReactionPredictor for RemotePredictor {
    fn predict(&self, reactants: &[Molecule]) -> ReactionOutcome {
        self.predict_smiles(&smiles_of(reactants))
    }

    fn predict_batch(&self, items: &[Vec<Molecule>]) -> Vec<ReactionOutcome> {
        if items.is_empty() {
            return Vec::new();
        }
        let req = BatchRequest {
            items: items.iter().map(|r| smiles_of(r)).collect(),
        };
        match self.client.post::<_, BatchResponse>("/api/v1/react_batch", &req) {
            Ok(resp) if resp.results.len() == items.len() => {
                resp.results.into_iter().map(wire_to_outcome).collect()
            }
            Ok(resp) => {
                let msg = format!(
                    "batch reply has {} results for {} items",
                    resp.results.len(),
                    items.len()
                );
                vec![ReactionOutcome::error(msg); items.len()]
            }
            Err(e) => vec![transport_failure(e); items.len()],
        }
    }
}
