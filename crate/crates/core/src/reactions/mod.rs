//! Reaction prediction: the template engine, its JSON-over-HTTP service and
//! the matching client.

mod client;
mod engine;
mod protocol;
mod server;
mod template;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use client::RemotePredictor;
pub use engine::{apply_template, TemplateEngine};
pub use protocol::{
    outcome_to_wire, wire_to_outcome, BatchRequest, BatchResponse, PkaRequest, PkaResponse,
    ReactRequest, ScoreRequest, ScoreResponse, WireOutcome, WireSite,
};
pub use server::{serve_blocking, spawn_server, Scorer, ServerHandle, Service};
pub use template::{
    default_templates, parse_templates, AtomRef, ReactionTemplate, RewriteOp, SiteKind,
    TemplateError, DEFAULT_TEMPLATES,
};

use crate::molgraph::Molecule;
use crate::transport::{JsonClient, RetryPolicy, TransportError, DEFAULT_MAX_IN_FLIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeStatus {
    Ok,
    NoReaction,
    Error,
}

impl OutcomeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeStatus::Ok => "ok",
            OutcomeStatus::NoReaction => "no_reaction",
            OutcomeStatus::Error => "error",
        }
    }
}

/// Atom bookkeeping of a local rewrite, used to audit conservation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteTrace {
    /// (reactant, atom) pairs named by the rewrite.
    pub touched: Vec<(usize, usize)>,
    /// For the main product and then each by-product: the (reactant, atom)
    /// each of its atoms came from.
    pub provenance: Vec<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionOutcome {
    pub status: OutcomeStatus,
    /// The main product when status is ok, otherwise empty.
    pub products: Vec<Molecule>,
    pub by_products: Vec<Molecule>,
    pub template: Option<String>,
    pub message: Option<String>,
    pub trace: Option<RewriteTrace>,
}

impl ReactionOutcome {
    pub fn no_reaction() -> Self {
        ReactionOutcome {
            status: OutcomeStatus::NoReaction,
            products: Vec::new(),
            by_products: Vec::new(),
            template: None,
            message: None,
            trace: None,
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        ReactionOutcome {
            status: OutcomeStatus::Error,
            message: Some(message.into()),
            ..ReactionOutcome::no_reaction()
        }
    }

    pub fn with_template(mut self, name: &str) -> Self {
        self.template = Some(name.to_string());
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == OutcomeStatus::Ok
    }

    pub fn main_product(&self) -> Option<&Molecule> {
        if self.is_ok() {
            self.products.first()
        } else {
            None
        }
    }
}

/// Predicts the outcome of a binary reaction.
pub trait ReactionPredictor: Send + Sync {
    fn predict(&self, reactants: &[Molecule]) -> ReactionOutcome;

    fn predict_batch(&self, items: &[Vec<Molecule>]) -> Vec<ReactionOutcome> {
        items.iter().map(|r| self.predict(r)).collect()
    }
}

impl<P: ReactionPredictor + ?Sized> ReactionPredictor for Arc<P> {
    fn predict(&self, reactants: &[Molecule]) -> ReactionOutcome {
        (**self).predict(reactants)
    }

    fn predict_batch(&self, items: &[Vec<Molecule>]) -> Vec<ReactionOutcome> {
        (**self).predict_batch(items)
    }
}

impl<P: ReactionPredictor + ?Sized> ReactionPredictor for &P {
    fn predict(&self, reactants: &[Molecule]) -> ReactionOutcome {
        (**self).predict(reactants)
    }

    fn predict_batch(&self, items: &[Vec<Molecule>]) -> Vec<ReactionOutcome> {
        (**self).predict_batch(items)
    }
}

/// Where reactions are predicted: the in-process engine or a server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Builtin,
    Remote(String),
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "builtin" {
            Ok(Endpoint::Builtin)
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(Endpoint::Remote(s.trim_end_matches('/').to_string()))
        } else {
            Err(format!("endpoint must be 'builtin' or an http(s) URL, got '{s}'"))
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Builtin => f.write_str("builtin"),
            Endpoint::Remote(url) => f.write_str(url),
        }
    }
}

impl Endpoint {
    pub fn predictor(
        &self,
        engine: TemplateEngine,
        policy: RetryPolicy,
    ) -> Result<Arc<dyn ReactionPredictor>, TransportError> {
        Ok(match self {
            Endpoint::Builtin => Arc::new(engine),
            Endpoint::Remote(url) => Arc::new(RemotePredictor::new(JsonClient::new(
                url,
                policy,
                DEFAULT_MAX_IN_FLIGHT,
            )?)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_parsing() {
        assert_eq!("builtin".parse::<Endpoint>(), Ok(Endpoint::Builtin));
        assert_eq!(
            "http://127.0.0.1:8080/".parse::<Endpoint>(),
            Ok(Endpoint::Remote("http://127.0.0.1:8080".into()))
        );
        assert!("ftp://x".parse::<Endpoint>().is_err());
    }
}
