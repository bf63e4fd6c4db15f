//! Iterative fine-tuning toward high-scoring lipids: sample under the
//! two-tail constraint, score, keep the top k, fine-tune, repeat.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::blocks::BuildingBlockPool;
use crate::dag::SynthesisDag;
use crate::datagen::{stream_rng, tail_count};
use crate::generator::{
    fine_tune, sample, write_checkpoint, CheckpointError, Constraints, EncodedPath,
    GeneratorError, Mode, ModelParams, PoolView, SampleConfig, TrainConfig,
};
use crate::molgraph::{
    aliphatic_chain_atoms, canonical_smiles, find_functional_groups, longest_aliphatic_chain,
    GroupKind, Molecule,
};
use crate::properties::PropertyModel;
use crate::reactions::{ReactionPredictor, ScoreRequest, ScoreResponse};
use crate::transport::{JsonClient, TransportError};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("scorer returned {got} scores for {sent} molecules")]
    Length { sent: usize, got: usize },
    #[error("scorer returned a non-finite score")]
    NonFinite,
}

/// Maps molecules to scalar scores, higher is better.
pub trait ProductScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score_batch(&self, mols: &[Molecule]) -> Result<Vec<f64>, ScoreError>;
}

/// Longest run of chain carbons starting at `start`, never entering `block`.
fn chain_from(mol: &Molecule, start: usize, block: usize, allowed: &[bool]) -> usize {
    if !allowed[start] {
        return 0;
    }
    let mut best = 1;
    let mut stack = vec![(start, 1usize)];
    let mut seen = vec![false; mol.atom_count()];
    seen[start] = true;
    while let Some((u, d)) = stack.pop() {
        best = best.max(d);
        for &(v, _) in mol.neighbors(u) {
            if v != block && allowed[v] && !seen[v] {
                seen[v] = true;
                stack.push((v, d + 1));
            }
        }
    }
    best
}

/// Ester and amide linkages with a chain of at least `min_chain` carbons on
/// either side.
pub fn linkage_tail_count(mol: &Molecule, min_chain: usize) -> usize {
    let allowed = aliphatic_chain_atoms(mol);
    find_functional_groups(mol)
        .iter()
        .filter(|h| matches!(h.kind, GroupKind::Ester | GroupKind::Amide))
        .filter(|h| {
            let c = h.atoms[0];
            let x = h.atoms[2];
            let acyl = mol
                .neighbors(c)
                .iter()
                .filter(|&&(v, _)| v != x && v != h.atoms[1])
                .map(|&(v, _)| chain_from(mol, v, c, &allowed) + 1)
                .max()
                .unwrap_or(1);
            let other = mol
                .neighbors(x)
                .iter()
                .filter(|&&(v, _)| v != c)
                .map(|&(v, _)| chain_from(mol, v, x, &allowed))
                .max()
                .unwrap_or(0);
            acyl.max(other) >= min_chain
        })
        .count()
}

/// Charge-window fit plus chain and two-tail bonuses.
#[derive(Debug, Clone, Default)]
pub struct SurrogateScorer {
    pub model: PropertyModel,
}

impl SurrogateScorer {
    pub const CHAIN_WEIGHT: f64 = 0.05;
    pub const CHAIN_CAP: usize = 18;
    pub const TWO_TAIL_BONUS: f64 = 1.0;
    pub const TAIL_MIN_CHAIN: usize = 6;

    pub fn score(&self, mol: &Molecule) -> f64 {
        let charge = match self.model.net_charges(mol) {
            Some((q5, q74)) => q5 - q74.abs(),
            None => 0.0,
        };
        let chain = longest_aliphatic_chain(mol).min(Self::CHAIN_CAP) as f64;
        let tails = linkage_tail_count(mol, Self::TAIL_MIN_CHAIN);
        charge + Self::CHAIN_WEIGHT * chain + if tails == 2 { Self::TWO_TAIL_BONUS } else { 0.0 }
    }
}

impl ProductScorer for SurrogateScorer {
    fn name(&self) -> &str {
        "surrogate"
    }

    fn score_batch(&self, mols: &[Molecule]) -> Result<Vec<f64>, ScoreError> {
        Ok(mols.par_iter().map(|m| self.score(m)).collect())
    }
}

/// Client for `POST /api/v1/score`.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    client: JsonClient,
}

impl RemoteScorer {
    pub fn new(client: JsonClient) -> Self {
        RemoteScorer { client }
    }
}

impl ProductScorer for RemoteScorer {
    fn name(&self) -> &str {
        "remote"
    }

    fn score_batch(&self, mols: &[Molecule]) -> Result<Vec<f64>, ScoreError> {
        let req = ScoreRequest {
            smiles: mols.iter().map(canonical_smiles).collect(),
        };
        let resp: ScoreResponse = self.client.post("/api/v1/score", &req)?;
        if resp.scores.len() != mols.len() {
            return Err(ScoreError::Length {
                sent: mols.len(),
                got: resp.scores.len(),
            });
        }
        if resp.scores.iter().any(|s| !s.is_finite()) {
            return Err(ScoreError::NonFinite);
        }
        Ok(resp.scores)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationConfig {
    pub iterations: usize,
    pub samples_per_iter: usize,
    pub top_k: usize,
    pub fine_tune_rounds: usize,
    pub min_tail_chain: usize,
    pub temperature: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig {
            iterations: 6,
            samples_per_iter: 5000,
            top_k: 1000,
            fine_tune_rounds: 2,
            min_tail_chain: 10,
            temperature: 1.0,
            lr: 1e-4,
            batch_size: 8,
            seed: 0,
            mode: Mode::Dag,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.samples_per_iter == 0 || self.top_k == 0 || self.fine_tune_rounds == 0 {
            return Err(OptimizeError::Config("counts must be positive".into()));
        }
        if self.top_k > self.samples_per_iter {
            return Err(OptimizeError::Config(format!(
                "top_k {} exceeds samples per iteration {}",
                self.top_k, self.samples_per_iter
            )));
        }
        Ok(())
    }

    pub fn constraints(&self) -> Constraints {
        Constraints::two_tails(Some(self.min_tail_chain))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Selected scores, descending.
    pub scores: Vec<f64>,
    pub smiles: Vec<String>,
    pub sampled: usize,
    pub failures: usize,
    /// Fewer than `top_k` successful samples.
    pub short: bool,
    /// Successful routes breaking the tail constraints; zero under the mask.
    pub violations: usize,
    pub checkpoint: Option<PathBuf>,
}

impl IterationRecord {
    pub fn k(&self) -> usize {
        self.scores.len()
    }

    pub fn mean(&self) -> f64 {
        if self.scores.is_empty() {
            return f64::NAN;
        }
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }

    pub fn median(&self) -> f64 {
        let n = self.scores.len();
        match n {
            0 => f64::NAN,
            _ if n % 2 == 1 => self.scores[n / 2],
            _ => 0.5 * (self.scores[n / 2 - 1] + self.scores[n / 2]),
        }
    }

    pub fn max(&self) -> f64 {
        self.scores.first().copied().unwrap_or(f64::NAN)
    }

    /// `rank,score,smiles` for the selected set.
    pub fn scores_csv(&self) -> String {
        let mut s = String::from("rank,score,smiles\n");
        for (i, (x, m)) in self.scores.iter().zip(&self.smiles).enumerate() {
            let _ = writeln!(s, "{},{x:.6},{m}", i + 1);
        }
        s
    }
}

pub fn records_csv(records: &[IterationRecord]) -> String {
    let mut s = String::from("iteration,mean,median,max,k\n");
    for r in records {
        let _ = writeln!(s, "{},{:.6},{:.6},{:.6},{}", r.iteration, r.mean(), r.median(), r.max(), r.k());
    }
    s
}

/// Iteration with the highest mean selected score.
pub fn best_iteration(records: &[IterationRecord]) -> Option<&IterationRecord> {
    records
        .iter()
        .filter(|r| !r.scores.is_empty())
        .max_by(|a, b| a.mean().total_cmp(&b.mean()).then(b.iteration.cmp(&a.iteration)))
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("iteration {0}: no successful samples")]
    NoSamples(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint: {0}")]
    Io(#[from] std::io::Error),
}

/// Whether a route has exactly two tails, each with a chain of at least `min_chain`.
pub fn meets_tail_constraints(dag: &SynthesisDag, pool: &BuildingBlockPool, min_chain: usize) -> bool {
    tail_count(dag) == 2
        && dag
            .block_indices()
            .iter()
            .skip(1)
            .all(|&j| pool.get(j).is_some_and(|b| b.chain >= min_chain))
}

/// Top `k` by score, ties broken by canonical SMILES.
pub fn select_top(scored: Vec<(f64, String, SynthesisDag)>, k: usize) -> Vec<(f64, String, SynthesisDag)> {
    let mut v = scored;
    v.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    v.truncate(k);
    v
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    params: &ModelParams,
    pool: &BuildingBlockPool,
    predictor: &dyn ReactionPredictor,
    scorer: &dyn ProductScorer,
    config: &OptimizationConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<(ModelParams, Vec<IterationRecord>), OptimizeError> {
    let mut params = params.clone();
    let mut records = Vec::with_capacity(config.iterations);
    if config.iterations == 0 {
        return Ok((params, records));
    }
    config.validate()?;
    let fp_width = params.dims().fp_width;
    let view = PoolView::new(pool, fp_width);
    let c = config.constraints();
    let pool_hash = pool.content_hash();
    for it in 0..config.iterations {
        // fresh, independent streams per iteration
        let mut seeds = stream_rng(config.seed, (1 << 32) + it as u64);
        let sample_seed: u64 = seeds.gen();
        let train_seed: u64 = seeds.gen();
        let outcome = sample(
            &params,
            pool,
            &view,
            predictor,
            &c,
            &SampleConfig {
                count: config.samples_per_iter,
                temperature: config.temperature,
                seed: sample_seed,
                mode: config.mode,
            },
        );
        if outcome.routes.is_empty() {
            return Err(OptimizeError::NoSamples(it + 1));
        }
        let violations = outcome
            .routes
            .iter()
            .filter(|r| !meets_tail_constraints(&r.dag, pool, config.min_tail_chain))
            .count();
        let mols: Vec<Molecule> = outcome.routes.iter().map(|r| r.final_product.clone()).collect();
        let scores = scorer.score_batch(&mols)?;
        let scored: Vec<(f64, String, SynthesisDag)> = outcome
            .routes
            .iter()
            .zip(scores)
            .map(|(r, s)| (s, canonical_smiles(&r.final_product), r.dag.clone()))
            .collect();
        let selected = select_top(scored, config.top_k);
        let paths = selected
            .iter()
            .map(|(_, _, d)| EncodedPath::new(d, config.mode, fp_width))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|message| GeneratorError::Path { index: 0, message })?;
        let train_cfg = TrainConfig {
            epochs: config.fine_tune_rounds,
            lr: config.lr,
            batch_size: config.batch_size,
            seed: train_seed,
            mode: config.mode,
        };
        fine_tune(&mut params, &view, &c, &paths, config.fine_tune_rounds, &train_cfg)?;
        let checkpoint = match checkpoint_dir {
            Some(dir) => {
                let path = dir.join(format!("iter_{}.ckpt", it + 1));
                write_checkpoint(BufWriter::new(File::create(&path)?), &params, &pool_hash, config.seed)?;
                Some(path)
            }
            None => None,
        };
        let record = IterationRecord {
            iteration: it + 1,
            short: selected.len() < config.top_k,
            scores: selected.iter().map(|s| s.0).collect(),
            smiles: selected.into_iter().map(|s| s.1).collect(),
            sampled: config.samples_per_iter,
            failures: outcome.failures,
            violations,
            checkpoint,
        };
        log::info!(
            "iteration {}: mean {:.4} max {:.4} k {} failures {}",
            record.iteration,
            record.mean(),
            record.max(),
            record.k(),
            record.failures
        );
        records.push(record);
    }
    Ok((params, records))
}
