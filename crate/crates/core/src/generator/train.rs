use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use super::grammar::{fingerprint_bits, Constraints, PoolView};
use super::params::ModelParams;
use super::route::{backward, pool_embeddings, run_dag, run_linear, scatter_pool, Kind, Policy, RunError, Tape};
use crate::dag::{serialize, to_linear_list, Action, LinearItem, NodeKind, SynthesisDag};
use crate::datagen::stream_rng;
use crate::molgraph::parse_smiles;

/// Which route representation the model reads and writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Dag,
    /// Linear lists with a stop head.
    Linear,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dag" => Ok(Mode::Dag),
            "linear" => Ok(Mode::Linear),
            _ => Err(format!("unknown mode '{s}' (dag or linear)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Dag => "dag",
            Mode::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Choices {
    Actions(Vec<Action>),
    /// Pool entries and stop decisions in the order they are made.
    Indices(Vec<usize>),
}

/// A route prepared for teacher forcing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPath {
    pub mode: Mode,
    choices: Choices,
    /// Fingerprint bits per node id; `None` for blocks.
    prod_bits: Vec<Option<Vec<u32>>>,
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("nothing to train on")]
    Empty,
    #[error("path {index}: {message}")]
    Path { index: usize, message: String },
    #[error("path {index}: {source}")]
    Run {
        index: usize,
        #[source]
        source: RunError,
    },
    #[error("bad configuration: {0}")]
    Config(String),
}

impl EncodedPath {
    pub fn new(dag: &SynthesisDag, mode: Mode, fp_width: usize) -> Result<Self, String> {
        let mut prod_bits = Vec::with_capacity(dag.nodes.len());
        for n in &dag.nodes {
            prod_bits.push(match n.kind {
                NodeKind::Block => None,
                NodeKind::Product => {
                    let m = parse_smiles(&n.smiles).map_err(|e| format!("node {}: {e}", n.id))?;
                    Some(fingerprint_bits(&m, fp_width))
                }
            });
        }
        let choices = match mode {
            Mode::Dag => Choices::Actions(
                serialize(dag).map_err(|v| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "))?,
            ),
            Mode::Linear => {
                let list = to_linear_list(dag).map_err(|e| e.to_string())?;
                let blocks: Vec<usize> = list
                    .items
                    .iter()
                    .filter_map(|i| match i {
                        LinearItem::Block { pool_index, .. } => Some(*pool_index),
                        LinearItem::Product { .. } => None,
                    })
                    .collect();
                let mut idx = vec![blocks[0], blocks[1]];
                for &t in &blocks[2..] {
                    idx.push(0);
                    idx.push(t);
                }
                idx.push(1);
                Choices::Indices(idx)
            }
        };
        Ok(EncodedPath {
            mode,
            choices,
            prod_bits,
        })
    }
}

pub fn encode_paths(dags: &[SynthesisDag], mode: Mode, fp_width: usize) -> Result<Vec<EncodedPath>, GeneratorError> {
    dags.par_iter()
        .enumerate()
        .map(|(index, d)| EncodedPath::new(d, mode, fp_width).map_err(|message| GeneratorError::Path { index, message }))
        .collect()
}

struct Teacher<'a> {
    path: &'a EncodedPath,
    pos: usize,
}

impl Policy for Teacher<'_> {
    fn choose(&mut self, kind: Kind, valid: &[bool], _: Option<&[f64]>) -> Result<usize, RunError> {
        let pos = self.pos;
        self.pos += 1;
        let err = |message: String| RunError::Grammar { position: pos, message };
        match &self.path.choices {
            Choices::Indices(v) => v.get(pos).copied().ok_or_else(|| err("route is shorter than the run".into())),
            Choices::Actions(v) => {
                let a = *v.get(pos).ok_or_else(|| err("route is shorter than the run".into()))?;
                let n = valid.len();
                match (kind, a) {
                    (Kind::NodeAdd, Action::NodeAddBlock) => Ok(0),
                    (Kind::NodeAdd, Action::NodeAddProduct) => Ok(1),
                    (Kind::Identity, Action::Identity(j)) => Ok(j),
                    (Kind::Connect, Action::Connect(k)) if k + 2 < n => Ok(k),
                    (Kind::Connect, Action::Continue) => Ok(n - 2),
                    (Kind::Connect, Action::Stop) => Ok(n - 1),
                    _ => Err(err(format!("{a} is not allowed here"))),
                }
            }
        }
    }

    fn product(&mut self, node: usize, _: &[usize]) -> Result<Vec<u32>, RunError> {
        self.path
            .prod_bits
            .get(node)
            .cloned()
            .flatten()
            .ok_or_else(|| RunError::Reaction(format!("no product recorded for node {node}")))
    }
}

fn teacher_run(
    p: &ModelParams,
    pool: &PoolView,
    pool_emb: &[f64],
    c: &Constraints,
    path: &EncodedPath,
) -> Result<Tape, RunError> {
    let mut t = Teacher { path, pos: 0 };
    let tape = match path.mode {
        Mode::Dag => run_dag(p, pool, pool_emb, c, &mut t, true)?,
        Mode::Linear => run_linear(p, pool, pool_emb, c, &mut t, true)?,
    };
    let len = match &path.choices {
        Choices::Actions(v) => v.len(),
        Choices::Indices(v) => v.len(),
    };
    if t.pos != len {
        return Err(RunError::Grammar {
            position: t.pos,
            message: "route continues after the run ended".into(),
        });
    }
    Ok(tape)
}

/// Teacher-forced negative log-likelihood of a route.
pub fn sequence_nll(p: &ModelParams, pool: &PoolView, c: &Constraints, path: &EncodedPath) -> Result<f64, RunError> {
    let emb = pool_embeddings(p, pool);
    teacher_run(p, pool, &emb, c, path).map(|t| t.loss)
}

/// Loss and its gradient for one route.
pub fn sequence_nll_grad(
    p: &ModelParams,
    pool: &PoolView,
    c: &Constraints,
    path: &EncodedPath,
) -> Result<(f64, ModelParams), RunError> {
    let emb = pool_embeddings(p, pool);
    let tape = teacher_run(p, pool, &emb, c, path)?;
    let mut g = ModelParams::zeros(*p.dims());
    let mut d_pool = vec![0.0; emb.len()];
    backward(&tape, p, &emb, &mut g, &mut d_pool);
    scatter_pool(&mut g, pool, &d_pool);
    Ok((tape.loss, g))
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr: 1e-4,
            batch_size: 8,
            seed: 0,
            mode: Mode::Dag,
        }
    }
}

/// Routes per gradient chunk; chunk sums are added in order so results do
/// not depend on the thread count.
const CHUNK: usize = 4;

/// Minibatch Adam over teacher-forced losses. Returns the mean loss of each
/// epoch. Parameters stay rounded to f32.
pub fn train(
    params: &mut ModelParams,
    pool: &PoolView,
    c: &Constraints,
    paths: &[EncodedPath],
    config: &TrainConfig,
) -> Result<Vec<f64>, GeneratorError> {
    if paths.is_empty() {
        return Err(GeneratorError::Empty);
    }
    if config.batch_size == 0 || !(config.lr > 0.0) {
        return Err(GeneratorError::Config("batch size and learning rate must be positive".into()));
    }
    let mut adam = Adam::new(params.data.len(), config.lr);
    let mut history = Vec::with_capacity(config.epochs);
    let dims = *params.dims();
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..paths.len()).collect();
        order.shuffle(&mut stream_rng(config.seed, epoch as u64));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let emb = pool_embeddings(params, pool);
            let p: &ModelParams = params;
            let parts: Vec<Result<(f64, ModelParams, Vec<f64>), GeneratorError>> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut g = ModelParams::zeros(dims);
                    let mut d_pool = vec![0.0; emb.len()];
                    let mut loss = 0.0;
                    for &i in chunk {
                        let tape = teacher_run(p, pool, &emb, c, &paths[i])
                            .map_err(|source| GeneratorError::Run { index: i, source })?;
                        backward(&tape, p, &emb, &mut g, &mut d_pool);
                        loss += tape.loss;
                    }
                    Ok((loss, g, d_pool))
                })
                .collect();
            let mut grad = ModelParams::zeros(dims);
            let mut d_pool = vec![0.0; emb.len()];
            for part in parts {
                let (loss, g, dp) = part?;
                total += loss;
                grad.add_assign(&g);
                for (a, b) in d_pool.iter_mut().zip(&dp) {
                    *a += b;
                }
            }
            scatter_pool(&mut grad, pool, &d_pool);
            grad.scale(1.0 / batch.len() as f64);
            adam.step(&mut params.data, &grad.data);
            params.round_to_f32();
        }
        let mean = total / paths.len() as f64;
        log::info!("epoch {}: mean nll {mean:.4}", epoch + 1);
        history.push(mean);
    }
    Ok(history)
}

/// Continues training from `params` on selected routes; `rounds` epochs with
/// fresh optimizer state.
pub fn fine_tune(
    params: &mut ModelParams,
    pool: &PoolView,
    c: &Constraints,
    selected: &[EncodedPath],
    rounds: usize,
    config: &TrainConfig,
) -> Result<Vec<f64>, GeneratorError> {
    if rounds == 0 {
        return Ok(Vec::new());
    }
    let cfg = TrainConfig {
        epochs: rounds,
        ..config.clone()
    };
    train(params, pool, c, selected, &cfg)
}
