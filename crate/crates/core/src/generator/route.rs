//! Walks a route through the recurrent model under grammar masks, for
//! teacher forcing and sampling alike, and backpropagates recorded runs.

use thiserror::Error;

use super::grammar::{Constraints, Decision, Effect, GrammarState, PoolView};
use super::model::{
    axpy, binary_backward, binary_logits, dot, gru_backward, gru_forward, masked_xent, query,
    query_backward, GruCache,
};
use super::params::{ModelParams, Tensor};
use crate::dag::Action;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("decision {position}: {message}")]
    Grammar { position: usize, message: String },
    #[error("reaction failed: {0}")]
    Reaction(String),
}

/// Where a step's input or a candidate's embedding comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Src {
    Zero,
    Param(Tensor),
    Pool(usize),
    /// Node by id; blocks resolve to their pool entry.
    Node(usize),
}

/// Linear routes: index 0 continues, 1 stops.
pub(crate) const STOP: usize = 1;

/// Which decision is being made, for policies that need to know.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    NodeAdd,
    Identity,
    Connect,
    Stop,
}

pub(crate) trait Policy {
    /// Picks a candidate index. `logits` is given when several are valid.
    fn choose(&mut self, kind: Kind, valid: &[bool], logits: Option<&[f64]>) -> Result<usize, RunError>;
    fn block(&mut self, _node: usize, _pool_index: usize) {}
    /// Fingerprint bits of product node `node` made from `reactants`.
    fn product(&mut self, node: usize, reactants: &[usize]) -> Result<Vec<u32>, RunError>;
}

enum HeadRec {
    Binary { w: Tensor, b: Tensor, dl: Vec<f64> },
    Identity { q: Vec<f64>, dl: Vec<f64> },
    Connect { q: Vec<f64>, dl: Vec<f64>, cands: Vec<Src> },
}

struct TapeStep {
    src: Src,
    cache: GruCache,
    heads: Vec<HeadRec>,
}

/// Result of a run. With recording on, it holds the teacher-forced loss
/// and everything `backward` needs.
pub(crate) struct Tape {
    pub loss: f64,
    pub actions: Vec<Action>,
    steps: Vec<TapeStep>,
    node_src: Vec<Src>,
    prod_emb: Vec<Option<Vec<f64>>>,
    prod_bits: Vec<Option<Vec<u32>>>,
    record: bool,
}

/// Projection of every pool entry, row-major n x d.
pub(crate) fn pool_embeddings(p: &ModelParams, pool: &PoolView) -> Vec<f64> {
    let d = p.dims().d;
    let mut out = vec![0.0; pool.len() * d];
    for (j, bits) in pool.bits.iter().enumerate() {
        let row = &mut out[j * d..(j + 1) * d];
        for &b in bits {
            axpy(1.0, p.proj_row(b as usize), row);
        }
    }
    out
}

struct Runner<'a> {
    p: &'a ModelParams,
    pool_emb: &'a [f64],
    tape: Tape,
    h: Vec<f64>,
    decisions: usize,
}

fn count(valid: &[bool]) -> usize {
    valid.iter().filter(|&&v| v).count()
}

impl<'a> Runner<'a> {
    fn new(p: &'a ModelParams, pool_emb: &'a [f64], record: bool) -> Self {
        Runner {
            p,
            pool_emb,
            tape: Tape {
                loss: 0.0,
                actions: Vec::new(),
                steps: Vec::new(),
                node_src: Vec::new(),
                prod_emb: Vec::new(),
                prod_bits: Vec::new(),
                record,
            },
            h: vec![0.0; p.dims().h],
            decisions: 0,
        }
    }

    fn emb(&self, s: Src) -> &[f64] {
        emb_of(self.p, self.pool_emb, &self.tape, s)
    }

    fn advance(&mut self, src: Src) {
        let zero;
        let x: &[f64] = if src == Src::Zero {
            zero = vec![0.0; self.p.dims().d];
            &zero
        } else {
            self.emb(src)
        };
        let cache = gru_forward(self.p, x, &self.h);
        self.h.clone_from(&cache.h);
        if self.tape.record {
            self.tape.steps.push(TapeStep {
                src,
                cache,
                heads: Vec::new(),
            });
        }
    }

    /// Scores the candidates (when there is a choice), asks the policy and
    /// checks the answer against the mask.
    fn decide(
        &mut self,
        kind: Kind,
        valid: &[bool],
        policy: &mut dyn Policy,
    ) -> Result<usize, RunError> {
        let position = self.decisions;
        self.decisions += 1;
        let bad = |message: String| RunError::Grammar { position, message };
        let options = count(valid);
        if options == 0 {
            return Err(bad("no valid option".into()));
        }
        if options == 1 {
            let k = policy.choose(kind, valid, None)?;
            if !valid.get(k).copied().unwrap_or(false) {
                return Err(bad(format!("candidate {k} is masked")));
            }
            return Ok(k);
        }
        let (logits, rec): (Vec<f64>, Box<dyn FnOnce(Vec<f64>) -> HeadRec>) = match kind {
            Kind::NodeAdd | Kind::Stop => {
                let (w, b) = if kind == Kind::NodeAdd {
                    (Tensor::NaW, Tensor::NaB)
                } else {
                    (Tensor::StW, Tensor::StB)
                };
                let l = binary_logits(self.p, w, b, &self.h).to_vec();
                (l, Box::new(move |dl| HeadRec::Binary { w, b, dl }))
            }
            Kind::Identity => {
                let d = self.p.dims().d;
                let q = query(self.p, Tensor::IdW, Tensor::IdB, &self.h);
                let l = (0..valid.len())
                    .map(|j| if valid[j] { dot(&q, &self.pool_emb[j * d..(j + 1) * d]) } else { 0.0 })
                    .collect();
                (l, Box::new(move |dl| HeadRec::Identity { q, dl }))
            }
            Kind::Connect => {
                let n = valid.len() - 2;
                let mut cands: Vec<Src> = (0..n).map(Src::Node).collect();
                cands.push(Src::Param(Tensor::HI));
                cands.push(Src::Param(Tensor::HF));
                let q = query(self.p, Tensor::CnW, Tensor::CnB, &self.h);
                let l = cands
                    .iter()
                    .zip(valid)
                    .map(|(&c, &v)| if v { dot(&q, self.emb(c)) } else { 0.0 })
                    .collect();
                (l, Box::new(move |dl| HeadRec::Connect { q, dl, cands }))
            }
        };
        let k = policy.choose(kind, valid, Some(&logits))?;
        if !valid.get(k).copied().unwrap_or(false) {
            return Err(bad(format!("candidate {k} is masked")));
        }
        if self.tape.record {
            let (loss, dl) = masked_xent(&logits, valid, k);
            self.tape.loss += loss;
            let step = self.tape.steps.last_mut().expect("a step precedes every decision");
            step.heads.push(rec(dl));
        }
        Ok(k)
    }

    fn add_block(&mut self, j: usize, policy: &mut dyn Policy) -> usize {
        let id = self.tape.node_src.len();
        self.tape.node_src.push(Src::Pool(j));
        self.tape.prod_emb.push(None);
        self.tape.prod_bits.push(None);
        policy.block(id, j);
        id
    }

    fn open_product(&mut self) -> usize {
        let id = self.tape.node_src.len();
        self.tape.node_src.push(Src::Node(id));
        self.tape.prod_emb.push(None);
        self.tape.prod_bits.push(None);
        id
    }

    fn close_product(&mut self, id: usize, reactants: &[usize], policy: &mut dyn Policy) -> Result<(), RunError> {
        let bits = policy.product(id, reactants)?;
        self.tape.prod_emb[id] = Some(self.p.embed_bits(&bits));
        self.tape.prod_bits[id] = Some(bits);
        Ok(())
    }
}

fn emb_of<'t>(p: &'t ModelParams, pool_emb: &'t [f64], tape: &'t Tape, s: Src) -> &'t [f64] {
    let d = p.dims().d;
    match s {
        Src::Zero => unreachable!("zero input has no embedding"),
        Src::Param(t) => p.get(t),
        Src::Pool(j) => &pool_emb[j * d..(j + 1) * d],
        Src::Node(n) => match tape.node_src[n] {
            Src::Pool(j) => &pool_emb[j * d..(j + 1) * d],
            _ => tape.prod_emb[n].as_deref().expect("product closed before use"),
        },
    }
}

/// Runs the synthesis-DAG action grammar.
pub(crate) fn run_dag(
    p: &ModelParams,
    pool: &PoolView,
    pool_emb: &[f64],
    c: &Constraints,
    policy: &mut dyn Policy,
    record: bool,
) -> Result<Tape, RunError> {
    let mut r = Runner::new(p, pool_emb, record);
    let mut g = GrammarState::new();
    let mut src = Src::Zero;
    while let Some(d) = g.decision(c, pool) {
        r.advance(src);
        let kind = match d {
            Decision::NodeAdd(_) => Kind::NodeAdd,
            Decision::Identity(_) => Kind::Identity,
            Decision::Connect(_) => Kind::Connect,
        };
        let k = r.decide(kind, d.valid(), policy)?;
        let action = d.action_at(k);
        r.tape.actions.push(action);
        if action == Action::NodeAddProduct {
            r.open_product();
        }
        match g.apply_index(&d, k) {
            Effect::Block(j) => {
                r.add_block(j, policy);
            }
            Effect::Closed { product, reactants, .. } => r.close_product(product, &reactants, policy)?,
            Effect::None => {}
        }
        src = match action {
            Action::NodeAddBlock => Src::Param(Tensor::HB),
            Action::NodeAddProduct => Src::Param(Tensor::HP),
            Action::Identity(j) => Src::Pool(j),
            Action::Connect(n) => Src::Node(n),
            Action::Continue => Src::Param(Tensor::HI),
            Action::Stop => Src::Param(Tensor::HF),
        };
    }
    Ok(r.tape)
}

/// Runs the linear-list grammar: head, tail, product, then a stop decision
/// and possibly another tail from each product's context. Node ids follow
/// the same layout as the DAG form.
pub(crate) fn run_linear(
    p: &ModelParams,
    pool: &PoolView,
    pool_emb: &[f64],
    c: &Constraints,
    policy: &mut dyn Policy,
    record: bool,
) -> Result<Tape, RunError> {
    let mut r = Runner::new(p, pool_emb, record);
    r.advance(Src::Zero);
    let head = r.decide(Kind::Identity, &pool.allowed(true, c), policy)?;
    let mut current = r.add_block(head, policy);
    r.advance(Src::Pool(head));
    let tail_mask = pool.allowed(false, c);
    let mut tails = 0;
    loop {
        if tails > 0 {
            let valid = [tails < c.max_tails, tails >= c.min_tails];
            if r.decide(Kind::Stop, &valid, policy)? == STOP {
                break;
            }
        }
        let j = r.decide(Kind::Identity, &tail_mask, policy)?;
        let t = r.add_block(j, policy);
        tails += 1;
        let pid = r.open_product();
        r.close_product(pid, &[current, t], policy)?;
        current = pid;
        r.advance(Src::Node(pid));
    }
    Ok(r.tape)
}

/// Accumulates d(loss)/d(params) of a recorded run into `g`; gradients of
/// pool embeddings go to `d_pool` (n x d) for the caller to project.
pub(crate) fn backward(tape: &Tape, p: &ModelParams, pool_emb: &[f64], g: &mut ModelParams, d_pool: &mut [f64]) {
    debug_assert!(tape.record);
    let d = p.dims().d;
    let mut d_prod: Vec<Option<Vec<f64>>> = vec![None; tape.node_src.len()];
    let mut add = |src: Src, k: f64, v: &[f64], g: &mut ModelParams| {
        let src = match src {
            Src::Node(n) => tape.node_src[n],
            s => s,
        };
        match src {
            Src::Zero => {}
            Src::Param(t) => axpy(k, v, g.get_mut(t)),
            Src::Pool(j) => axpy(k, v, &mut d_pool[j * d..(j + 1) * d]),
            Src::Node(n) => axpy(k, v, d_prod[n].get_or_insert_with(|| vec![0.0; d])),
        }
    };
    let mut dh_next = vec![0.0; p.dims().h];
    for step in tape.steps.iter().rev() {
        let ctx = &step.cache.h;
        let mut dctx = dh_next;
        for head in &step.heads {
            match head {
                HeadRec::Binary { w, b, dl } => binary_backward(p, *w, *b, ctx, dl, g, &mut dctx),
                HeadRec::Identity { q, dl } => {
                    let mut dq = vec![0.0; d];
                    for (j, &x) in dl.iter().enumerate() {
                        if x != 0.0 {
                            axpy(x, &pool_emb[j * d..(j + 1) * d], &mut dq);
                            add(Src::Pool(j), x, q, g);
                        }
                    }
                    query_backward(p, Tensor::IdW, Tensor::IdB, ctx, &dq, g, &mut dctx);
                }
                HeadRec::Connect { q, dl, cands } => {
                    let mut dq = vec![0.0; d];
                    for (&c, &x) in cands.iter().zip(dl) {
                        if x != 0.0 {
                            axpy(x, emb_of(p, pool_emb, tape, c), &mut dq);
                            add(c, x, q, g);
                        }
                    }
                    query_backward(p, Tensor::CnW, Tensor::CnB, ctx, &dq, g, &mut dctx);
                }
            }
        }
        let (dx, dh_prev) = gru_backward(p, &step.cache, &dctx, g);
        add(step.src, 1.0, &dx, g);
        dh_next = dh_prev;
    }
    for (dv, bits) in d_prod.iter().zip(&tape.prod_bits) {
        if let (Some(dv), Some(bits)) = (dv, bits) {
            scatter(g, bits, dv);
        }
    }
}

/// Adds `dv` to the projection row of every bit.
pub(crate) fn scatter(g: &mut ModelParams, bits: &[u32], dv: &[f64]) {
    let d = g.dims().d;
    let proj = g.get_mut(Tensor::Proj);
    for &b in bits {
        let b = b as usize;
        axpy(1.0, dv, &mut proj[b * d..(b + 1) * d]);
    }
}

/// Projects pool-embedding gradients onto the fingerprint projection.
pub(crate) fn scatter_pool(g: &mut ModelParams, pool: &PoolView, d_pool: &[f64]) {
    let d = g.dims().d;
    for (j, bits) in pool.bits.iter().enumerate() {
        let dv = &d_pool[j * d..(j + 1) * d];
        if dv.iter().any(|&x| x != 0.0) {
            scatter(g, bits, dv);
        }
    }
}
