//! Molecular graphs: SMILES in and out, canonical forms, descriptors,
//! fingerprints, edit distance and functional groups.

mod canon;
mod descriptors;
mod element;
mod fingerprint;
mod ged;
mod groups;
mod mol;
mod smiles;

pub use canon::{canonical_ranks, canonical_smiles, canonicalize, Canonical};
pub use descriptors::{
    aliphatic_chain_atoms, estimate_logp, estimate_logp_with, heteroatom_counts,
    longest_aliphatic_chain, molecular_weight, LogpTable,
};
pub use element::Element;
pub use fingerprint::{
    ecfp_fingerprint, ecfp_identifiers, tanimoto, Fingerprint, WidthMismatch, DEFAULT_RADIUS,
    DEFAULT_WIDTH,
};
pub use ged::{
    graph_edit_distance, graph_edit_distance_capped, EditDistance, NodeLabel, SizeCapExceeded,
    DEFAULT_SIZE_CAP,
};
pub use groups::{count_kind, find_functional_groups, FunctionalGroupHit, GroupKind};
pub use mol::{Atom, Bond, BondOrder, MolError, Molecule};
pub use smiles::{parse_smiles, SmilesError};


/// Canonical SMILES of a parsed string, the key used for every set comparison.
pub fn canonical_from_str(text: &str) -> Result<String, SmilesError> {
    parse_smiles(text).map(|m| canonical_smiles(&m))
}
