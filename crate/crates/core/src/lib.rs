//! Building blocks, reaction templates and an autoregressive synthesis-route
//! generator for ionizable lipids.

pub mod blocks;
pub mod dag;
pub mod datagen;
pub mod generator;
pub mod metrics;
pub mod molgraph;
pub mod optimize;
pub mod properties;
pub mod reactions;
pub mod transport;

pub use molgraph::{canonical_smiles, parse_smiles, Molecule};
