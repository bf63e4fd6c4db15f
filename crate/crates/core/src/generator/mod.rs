//! Autoregressive route generator: a gated recurrent network over action
//! sequences with node-add, identity and connectivity heads.

mod grammar;
mod model;
mod params;
mod route;
mod sample;
mod train;

pub use grammar::{fingerprint_bits, Constraints, Decision, Effect, GrammarState, PoolView};
pub use params::{
    read_checkpoint, write_checkpoint, CheckpointError, CheckpointHeader, Dims, Layout,
    ModelParams, Tensor,
};
pub use route::RunError;
pub use sample::{sample, SampleConfig, SampleOutcome, SampledRoute};
pub use train::{
    encode_paths, fine_tune, sequence_nll, sequence_nll_grad, train, Adam, EncodedPath,
    GeneratorError, Mode, TrainConfig,
};

use crate::molgraph::Molecule;

/// Learned projection of the molecule's fingerprint.
pub fn embed_molecule(mol: &Molecule, params: &ModelParams) -> Vec<f64> {
    params.embed_bits(&fingerprint_bits(mol, params.dims().fp_width))
}
