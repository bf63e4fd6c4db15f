use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::grammar::{fingerprint_bits, Constraints, PoolView};
use super::model::masked_softmax;
use super::params::ModelParams;
use super::route::{pool_embeddings, run_dag, run_linear, Kind, Policy, RunError};
use super::train::Mode;
use crate::blocks::BuildingBlockPool;
use crate::dag::{Action, DagNode, SynthesisDag};
use crate::datagen::stream_rng;
use crate::molgraph::{canonical_smiles, Molecule};
use crate::reactions::ReactionPredictor;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub count: usize,
    /// 0 picks the most likely candidate at every step.
    pub temperature: f64,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            count: 200,
            temperature: 1.0,
            seed: 0,
            mode: Mode::Dag,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledRoute {
    pub dag: SynthesisDag,
    /// Empty in linear mode.
    pub actions: Vec<Action>,
    pub final_product: Molecule,
}

#[derive(Debug, Clone, Default)]
pub struct SampleOutcome {
    /// Successful routes in request order.
    pub routes: Vec<SampledRoute>,
    pub failures: usize,
    /// First few failure messages, for reports.
    pub failure_messages: Vec<String>,
}

impl SampleOutcome {
    pub fn dags(&self) -> Vec<SynthesisDag> {
        self.routes.iter().map(|r| r.dag.clone()).collect()
    }
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    temperature: f64,
    pool: &'a BuildingBlockPool,
    predictor: &'a dyn ReactionPredictor,
    fp_width: usize,
    mols: Vec<Option<Molecule>>,
    dag: SynthesisDag,
}

impl Sampler<'_> {
    fn ensure(&mut self, node: usize) {
        while self.mols.len() <= node {
            self.mols.push(None);
        }
    }
}

impl Policy for Sampler<'_> {
    fn choose(&mut self, _: Kind, valid: &[bool], logits: Option<&[f64]>) -> Result<usize, RunError> {
        let Some(l) = logits else {
            return Ok(valid.iter().position(|&v| v).expect("one valid option"));
        };
        if self.temperature <= 0.0 {
            let mut best = None;
            for (i, (&x, &v)) in l.iter().zip(valid).enumerate() {
                if v && best.is_none_or(|(_, b)| x > b) {
                    best = Some((i, x));
                }
            }
            return Ok(best.expect("valid options").0);
        }
        let probs = masked_softmax(l, valid, self.temperature);
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return Ok(i);
                }
            }
        }
        Ok(last)
    }

    fn block(&mut self, node: usize, pool_index: usize) {
        let b = &self.pool.blocks()[pool_index];
        self.ensure(node);
        self.mols[node] = Some(b.molecule.clone());
        self.dag.nodes.push(DagNode::block(node, pool_index, b.smiles.clone()));
    }

    fn product(&mut self, node: usize, reactants: &[usize]) -> Result<Vec<u32>, RunError> {
        let input: Vec<Molecule> = reactants
            .iter()
            .map(|&r| self.mols[r].clone().expect("reactants exist"))
            .collect();
        let outcome = self.predictor.predict(&input);
        let Some(m) = outcome.main_product().cloned() else {
            return Err(RunError::Reaction(
                outcome.message.unwrap_or_else(|| outcome.status.as_str().to_string()),
            ));
        };
        let bits = fingerprint_bits(&m, self.fp_width);
        for &r in reactants {
            self.dag.edges.push((r, node));
        }
        self.dag.nodes.push(DagNode::product(node, canonical_smiles(&m), false));
        self.ensure(node);
        self.mols[node] = Some(m);
        Ok(bits)
    }
}

/// Draws one route. Sample `index` uses its own random stream.
#[allow(clippy::too_many_arguments)]
fn sample_one(
    params: &ModelParams,
    pool: &BuildingBlockPool,
    view: &PoolView,
    pool_emb: &[f64],
    predictor: &dyn ReactionPredictor,
    c: &Constraints,
    config: &SampleConfig,
    index: usize,
) -> Result<SampledRoute, RunError> {
    let mut s = Sampler {
        rng: stream_rng(config.seed, index as u64),
        temperature: config.temperature,
        pool,
        predictor,
        fp_width: view.fp_width,
        mols: Vec::new(),
        dag: SynthesisDag::default(),
    };
    let tape = match config.mode {
        Mode::Dag => run_dag(params, view, pool_emb, c, &mut s, false)?,
        Mode::Linear => run_linear(params, view, pool_emb, c, &mut s, false)?,
    };
    // nodes were pushed as they were created; blocks and products interleave
    s.dag.nodes.sort_by_key(|n| n.id);
    s.dag.edges.sort_unstable();
    let last = s.dag.nodes.len() - 1;
    s.dag.nodes[last].is_final = Some(true);
    let final_product = s.mols[last].clone().expect("final product");
    Ok(SampledRoute {
        dag: s.dag,
        actions: tape.actions,
        final_product,
    })
}

/// Draws `config.count` routes in parallel. A failed reaction ends that
/// sample and is counted.
pub fn sample(
    params: &ModelParams,
    pool: &BuildingBlockPool,
    view: &PoolView,
    predictor: &dyn ReactionPredictor,
    c: &Constraints,
    config: &SampleConfig,
) -> SampleOutcome {
    let emb = pool_embeddings(params, view);
    let results: Vec<Result<SampledRoute, RunError>> = (0..config.count)
        .into_par_iter()
        .map(|i| sample_one(params, pool, view, &emb, predictor, c, config, i))
        .collect();
    let mut out = SampleOutcome::default();
    for r in results {
        match r {
            Ok(route) => out.routes.push(route),
            Err(e) => {
                out.failures += 1;
                if out.failure_messages.len() < 20 {
                    out.failure_messages.push(e.to_string());
                }
            }
        }
    }
    out
}
