use std::collections::{BTreeMap, HashSet};

use super::Candidate;
use crate::molgraph::{
    canonical_smiles, estimate_logp, find_functional_groups, heteroatom_counts,
    longest_aliphatic_chain, molecular_weight, parse_smiles, FunctionalGroupHit, GroupKind,
    Molecule,
};

#[derive(Debug, Clone, PartialEq)]
pub struct HeadCriteria {
    pub max_weight: f64,
    /// Accepted heads have logP strictly below this.
    pub max_logp: f64,
    pub min_reactive: usize,
    pub max_reactive: usize,
}

impl Default for HeadCriteria {
    fn default() -> Self {
        HeadCriteria {
            max_weight: 500.0,
            max_logp: 0.0,
            min_reactive: 1,
            max_reactive: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailCriteria {
    pub min_chain: usize,
}

impl Default for TailCriteria {
    fn default() -> Self {
        TailCriteria { min_chain: 6 }
    }
}

/// Acids, hydroxyls and amines, minus the one amine kept for ionizability.
pub fn reactive_group_count(hits: &[FunctionalGroupHit]) -> usize {
    let amines = hits.iter().filter(|h| h.kind.is_amine()).count();
    let others = hits
        .iter()
        .filter(|h| matches!(h.kind, GroupKind::CarboxylicAcid | GroupKind::Hydroxyl))
        .count();
    others + amines.saturating_sub(1)
}

/// Names of the head criteria `mol` fails; empty means accepted.
pub fn head_failures(mol: &Molecule, c: &HeadCriteria) -> Vec<&'static str> {
    let hits = find_functional_groups(mol);
    let mut failed = Vec::new();
    if molecular_weight(mol) > c.max_weight {
        failed.push("weight");
    }
    if estimate_logp(mol) >= c.max_logp {
        failed.push("logp");
    }
    if !hits.iter().any(|h| h.kind.is_amine()) {
        failed.push("amine");
    }
    let reactive = reactive_group_count(&hits);
    if !(c.min_reactive..=c.max_reactive).contains(&reactive) {
        failed.push("reactive_count");
    }
    failed
}

fn is_tail_reactive(kind: GroupKind) -> bool {
    matches!(
        kind,
        GroupKind::CarboxylicAcid
            | GroupKind::Hydroxyl
            | GroupKind::AminePrimary
            | GroupKind::AmineSecondary
            | GroupKind::AmineAromatic
    )
}

pub fn tail_failures(mol: &Molecule, c: &TailCriteria) -> Vec<&'static str> {
    let mut failed = Vec::new();
    let (n, o, s) = heteroatom_counts(mol);
    if n + o + s == 0 {
        failed.push("heteroatom");
    }
    if !find_functional_groups(mol).iter().any(|h| is_tail_reactive(h.kind)) {
        failed.push("reactive_group");
    }
    if longest_aliphatic_chain(mol) < c.min_chain {
        failed.push("chain");
    }
    failed
}

/// Accepted molecules plus per-criterion rejection counts. A candidate that
/// fails several criteria is counted under each of them.
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub accepted: Vec<Molecule>,
    pub accepted_ids: Vec<Option<String>>,
    pub rejections: BTreeMap<&'static str, usize>,
    pub rejected: usize,
    pub duplicates: usize,
    /// (line, message) for lines that did not parse.
    pub malformed: Vec<(usize, String)>,
}

impl FilterOutcome {
    pub fn accepted_smiles(&self) -> Vec<String> {
        self.accepted.iter().map(canonical_smiles).collect()
    }

    /// Flat key: value report.
    pub fn report(&self) -> String {
        let mut s = format!(
            "accepted: {}\nrejected: {}\nduplicates: {}\nmalformed: {}\n",
            self.accepted.len(),
            self.rejected,
            self.duplicates,
            self.malformed.len()
        );
        for (k, v) in &self.rejections {
            s.push_str(&format!("rejected_{k}: {v}\n"));
        }
        s
    }
}

fn run_filter(
    candidates: &[Candidate],
    check: impl Fn(&Molecule) -> Vec<&'static str> + Sync,
) -> FilterOutcome {
    use rayon::prelude::*;
    let checked: Vec<_> = candidates
        .par_iter()
        .map(|c| match parse_smiles(&c.smiles) {
            Ok(m) => {
                let failed = check(&m);
                Ok((m, failed))
            }
            Err(e) => Err(e.to_string()),
        })
        .collect();
    let mut out = FilterOutcome::default();
    let mut seen = HashSet::new();
    for (c, r) in candidates.iter().zip(checked) {
        match r {
            Err(msg) => out.malformed.push((c.line, msg)),
            Ok((m, failed)) if failed.is_empty() => {
                if seen.insert(canonical_smiles(&m)) {
                    out.accepted.push(m);
                    out.accepted_ids.push(c.id.clone());
                } else {
                    out.duplicates += 1;
                }
            }
            Ok((_, failed)) => {
                out.rejected += 1;
                for f in failed {
                    *out.rejections.entry(f).or_default() += 1;
                }
            }
        }
    }
    out
}

pub fn filter_heads(candidates: &[Candidate], criteria: &HeadCriteria) -> FilterOutcome {
    run_filter(candidates, |m| head_failures(m, criteria))
}

pub fn filter_tails(candidates: &[Candidate], criteria: &TailCriteria) -> FilterOutcome {
    run_filter(candidates, |m| tail_failures(m, criteria))
}
