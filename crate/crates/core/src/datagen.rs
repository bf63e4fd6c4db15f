//! Random synthesis routes, the filtered training dataset and splits.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::blocks::{BuildingBlock, BuildingBlockPool};
use crate::dag::{read_dags, write_dags, DagFileError, DagNode, SynthesisDag};
use crate::molgraph::{canonical_smiles, Molecule};
use crate::properties::PropertyModel;
use crate::reactions::ReactionPredictor;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Relative frequencies of one, two and three tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailWeights(pub [f64; 3]);

impl Default for TailWeights {
    fn default() -> Self {
        TailWeights([1.0, 3.6, 6.1])
    }
}

impl TailWeights {
    pub const UNIFORM: TailWeights = TailWeights([1.0, 1.0, 1.0]);

    pub fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        WeightedIndex::new(self.0).expect("weights validated").sample(rng) + 1
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|w| w.is_finite() && *w >= 0.0) && self.0.iter().sum::<f64>() > 0.0
    }
}

impl FromStr for TailWeights {
    type Err = String;

    /// "1:3.6:6.1"
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad weight '{p}'")))
            .collect::<Result<_, _>>()?;
        let w = TailWeights(parts.try_into().map_err(|_| format!("need three weights in '{s}'"))?);
        if !w.is_valid() {
            return Err(format!("weights must be non-negative with a positive sum: '{s}'"));
        }
        Ok(w)
    }
}

impl fmt::Display for TailWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.0[0], self.0[1], self.0[2])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisFailure {
    #[error("pool needs at least one head and one tail")]
    EmptyPool,
    #[error("reaction {step} failed: {message}")]
    Reaction { step: usize, message: String },
}

/// Head, then each tail in turn reacted onto the growing product. Node
/// layout is head, tail, product, tail, product, ...
pub fn react_sequentially(
    head: &BuildingBlock,
    tails: &[&BuildingBlock],
    predictor: &dyn ReactionPredictor,
) -> Result<(SynthesisDag, Molecule), SynthesisFailure> {
    let mut dag = SynthesisDag::default();
    dag.nodes.push(DagNode::block(0, head.pool_index, head.smiles.clone()));
    let mut current = head.molecule.clone();
    let mut current_id = 0;
    for (step, tail) in tails.iter().enumerate() {
        let tail_id = dag.nodes.len();
        dag.nodes.push(DagNode::block(tail_id, tail.pool_index, tail.smiles.clone()));
        let outcome = predictor.predict(&[current, tail.molecule.clone()]);
        let Some(product) = outcome.main_product().cloned() else {
            return Err(SynthesisFailure::Reaction {
                step,
                message: outcome
                    .message
                    .unwrap_or_else(|| outcome.status.as_str().to_string()),
            });
        };
        let pid = dag.nodes.len();
        dag.nodes.push(DagNode::product(pid, canonical_smiles(&product), step + 1 == tails.len()));
        dag.edges.push((current_id, pid));
        dag.edges.push((tail_id, pid));
        current = product;
        current_id = pid;
    }
    Ok((dag, current))
}

/// Uniform head, `n_tails` uniform tails drawn with replacement, reacted in
/// sequence.
pub fn synthesize_random<R: Rng>(
    pool: &BuildingBlockPool,
    n_tails: usize,
    predictor: &dyn ReactionPredictor,
    rng: &mut R,
) -> Result<(SynthesisDag, Molecule), SynthesisFailure> {
    let heads: Vec<&BuildingBlock> = pool.heads().collect();
    let tails: Vec<&BuildingBlock> = pool.tails().collect();
    if heads.is_empty() || tails.is_empty() || n_tails == 0 {
        return Err(SynthesisFailure::EmptyPool);
    }
    let head = heads[rng.gen_range(0..heads.len())];
    let chosen: Vec<&BuildingBlock> = (0..n_tails).map(|_| tails[rng.gen_range(0..tails.len())]).collect();
    react_sequentially(head, &chosen, predictor)
}

/// The two product checks, applied lipid first.
pub trait ProductFilter: Send + Sync {
    fn is_lipid(&self, mol: &Molecule) -> bool;
    fn is_ionizable(&self, mol: &Molecule) -> bool;
}

impl ProductFilter for PropertyModel {
    fn is_lipid(&self, mol: &Molecule) -> bool {
        self.is_lipid_like(mol)
    }

    fn is_ionizable(&self, mol: &Molecule) -> bool {
        self.charge_window_ok(mol)
    }
}

pub struct AcceptAll;

impl ProductFilter for AcceptAll {
    fn is_lipid(&self, _: &Molecule) -> bool {
        true
    }

    fn is_ionizable(&self, _: &Molecule) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub target: usize,
    pub weights: TailWeights,
    pub seed: u64,
    /// Attempts allowed per requested path.
    pub attempts_per_target: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            target: 2000,
            weights: TailWeights::default(),
            seed: 0,
            attempts_per_target: 50,
        }
    }
}

/// attempts = accepted + reaction_failures + not_lipid + not_ionizable + duplicates
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetAudit {
    pub attempts: usize,
    pub accepted: usize,
    pub reaction_failures: usize,
    pub not_lipid: usize,
    pub not_ionizable: usize,
    pub duplicates: usize,
    pub by_tails: [usize; 3],
    pub target: usize,
}

impl DatasetAudit {
    pub fn conserved(&self) -> bool {
        self.attempts
            == self.accepted + self.reaction_failures + self.not_lipid + self.not_ionizable + self.duplicates
    }

    pub fn target_reached(&self) -> bool {
        self.accepted >= self.target
    }

    pub fn report(&self) -> String {
        format!(
            "target: {}\nattempts: {}\naccepted: {}\nreaction_failures: {}\nnot_lipid: {}\nnot_ionizable: {}\nduplicates: {}\none_tail: {}\ntwo_tail: {}\nthree_tail: {}\ntarget_reached: {}\n",
            self.target,
            self.attempts,
            self.accepted,
            self.reaction_failures,
            self.not_lipid,
            self.not_ionizable,
            self.duplicates,
            self.by_tails[0],
            self.by_tails[1],
            self.by_tails[2],
            self.target_reached()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Valid,
    Test,
    Unsplit,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Valid => "valid",
            SplitTag::Test => "test",
            SplitTag::Unsplit => "unsplit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisDataset {
    pub dags: Vec<SynthesisDag>,
    pub split: SplitTag,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("path {index}: {message}")]
    Invalid { index: usize, message: String },
    #[error("dataset is empty")]
    Empty,
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    Fractions([f64; 3]),
    #[error(transparent)]
    File(#[from] DagFileError),
}

/// Blocks in a linear route minus the head.
pub fn tail_count(dag: &SynthesisDag) -> usize {
    dag.blocks().count().saturating_sub(1)
}

impl SynthesisDataset {
    pub fn new(dags: Vec<SynthesisDag>) -> Self {
        SynthesisDataset {
            dags,
            split: SplitTag::Unsplit,
        }
    }

    pub fn len(&self) -> usize {
        self.dags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dags.is_empty()
    }

    /// Paths with one, two and three tails.
    pub fn tail_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for d in &self.dags {
            if let Some(slot) = tail_count(d).checked_sub(1).filter(|&t| t < 3) {
                c[slot] += 1;
            }
        }
        c
    }

    /// Every DAG is valid and its blocks resolve to the same pool entries.
    pub fn check_against(&self, pool: &BuildingBlockPool) -> Result<(), DatasetError> {
        for (index, d) in self.dags.iter().enumerate() {
            if let Some(v) = d.validate().first() {
                return Err(DatasetError::Invalid {
                    index,
                    message: v.to_string(),
                });
            }
            for b in d.blocks() {
                let idx = b.pool_index.expect("validated");
                match pool.get(idx) {
                    Some(block) if block.smiles == b.smiles => {}
                    _ => {
                        return Err(DatasetError::Invalid {
                            index,
                            message: format!("block {} does not match pool entry {idx}", b.id),
                        })
                    }
                }
            }
        }
        Ok(())
    }

    pub fn final_smiles(&self) -> Vec<String> {
        self.dags
            .iter()
            .filter_map(|d| d.final_product().map(|n| n.smiles.clone()))
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, w: W) -> io::Result<()> {
        write_dags(w, &self.dags)
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, DatasetError> {
        Ok(SynthesisDataset::new(read_dags(r)?))
    }
}

enum Attempt {
    Failed,
    NotLipid,
    NotIonizable,
    Passed(SynthesisDag, usize),
}

const CHUNK: usize = 256;

/// Random routes until `target` distinct final products pass both checks or
/// the attempt budget runs out. Attempt `i` draws from stream `i` of the
/// seed, so the result does not depend on the thread count.
pub fn build_dataset(
    pool: &BuildingBlockPool,
    config: &DatasetConfig,
    predictor: &dyn ReactionPredictor,
    filter: &dyn ProductFilter,
) -> (SynthesisDataset, DatasetAudit) {
    let mut audit = DatasetAudit {
        target: config.target,
        ..DatasetAudit::default()
    };
    let mut dags = Vec::new();
    let mut seen = HashSet::new();
    let budget = config.target.saturating_mul(config.attempts_per_target);
    let mut next = 0;
    while audit.accepted < config.target && next < budget {
        let end = (next + CHUNK).min(budget);
        let results: Vec<Attempt> = (next..end)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(config.seed, i as u64);
                let n_tails = config.weights.draw(&mut rng);
                match synthesize_random(pool, n_tails, predictor, &mut rng) {
                    Err(_) => Attempt::Failed,
                    Ok((_, m)) if !filter.is_lipid(&m) => Attempt::NotLipid,
                    Ok((_, m)) if !filter.is_ionizable(&m) => Attempt::NotIonizable,
                    Ok((d, _)) => Attempt::Passed(d, n_tails),
                }
            })
            .collect();
        for r in results {
            if audit.accepted >= config.target {
                break;
            }
            audit.attempts += 1;
            match r {
                Attempt::Failed => audit.reaction_failures += 1,
                Attempt::NotLipid => audit.not_lipid += 1,
                Attempt::NotIonizable => audit.not_ionizable += 1,
                Attempt::Passed(d, n) => {
                    let key = d.final_product().expect("built with a final").smiles.clone();
                    if seen.insert(key) {
                        audit.accepted += 1;
                        audit.by_tails[n - 1] += 1;
                        dags.push(d);
                    } else {
                        audit.duplicates += 1;
                    }
                }
            }
        }
        next = end;
    }
    (SynthesisDataset::new(dags), audit)
}

/// The random baseline: `count` attempts with tail numbers drawn from
/// `weights`. Returns successful routes with their products, and the number
/// of failed attempts.
pub fn sample_random(
    pool: &BuildingBlockPool,
    count: usize,
    weights: TailWeights,
    predictor: &dyn ReactionPredictor,
    seed: u64,
) -> (Vec<(SynthesisDag, Molecule)>, usize) {
    let results: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let n = weights.draw(&mut rng);
            synthesize_random(pool, n, predictor, &mut rng).ok()
        })
        .collect();
    let failures = results.iter().filter(|r| r.is_none()).count();
    (results.into_iter().flatten().collect(), failures)
}

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.9, 0.05, 0.05];

/// Shuffled split into train, valid and test. Valid and test sizes are
/// floored; train takes the remainder. Each part keeps the input order.
pub fn split_dataset(
    ds: &SynthesisDataset,
    fractions: [f64; 3],
    seed: u64,
) -> Result<[SynthesisDataset; 3], DatasetError> {
    if ds.is_empty() {
        return Err(DatasetError::Empty);
    }
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(DatasetError::Fractions(fractions));
    }
    let n = ds.len();
    let n_valid = (n as f64 * fractions[1]).floor() as usize;
    let n_test = ((n as f64 * fractions[2]).floor() as usize).min(n - n_valid);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut valid = order[..n_valid].to_vec();
    let mut test = order[n_valid..n_valid + n_test].to_vec();
    let mut train = order[n_valid + n_test..].to_vec();
    let take = |idx: &mut Vec<usize>, tag| {
        idx.sort_unstable();
        SynthesisDataset {
            dags: idx.iter().map(|&i| ds.dags[i].clone()).collect(),
            split: tag,
        }
    };
    Ok([
        take(&mut train, SplitTag::Train),
        take(&mut valid, SplitTag::Valid),
        take(&mut test, SplitTag::Test),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reactions::{ReactionOutcome, TemplateEngine};

    struct NoReaction;

    impl ReactionPredictor for NoReaction {
        fn predict(&self, _: &[Molecule]) -> ReactionOutcome {
            ReactionOutcome::no_reaction()
        }
    }

    fn small_pool() -> BuildingBlockPool {
        BuildingBlockPool::from_smiles(
            &["OCCN(CCO)CCO", "NCCO", "OCCN(C)CCO"],
            &["CCCCCCCCCC(=O)O", "CCCCCCCCCCCC(=O)O", "CCCCCCCCC(=O)O"],
        )
        .unwrap()
    }

    #[test]
    fn forced_single_tail() {
        let pool = BuildingBlockPool::from_smiles(&["NCCO"], &["CCCCCCCC(=O)O"]).unwrap();
        let engine = TemplateEngine::default();
        let (dag, _) = synthesize_random(&pool, 1, &engine, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(dag.nodes.len(), 3);
        assert_eq!(
            dag.final_product().unwrap().smiles,
            canonical_smiles(&crate::parse_smiles("CCCCCCCC(=O)NCCO").unwrap())
        );
        assert!(dag.is_valid());
    }

    #[test]
    fn three_tails_seven_nodes() {
        let engine = TemplateEngine::default();
        let pool = small_pool();
        let (dag, _) = synthesize_random(
            &BuildingBlockPool::from_smiles(&["OCCN(CCO)CCO"], &["CCCCCCCCCC(=O)O"]).unwrap(),
            3,
            &engine,
            &mut stream_rng(1, 0),
        )
        .unwrap();
        assert_eq!(dag.nodes.len(), 7);
        assert_eq!(dag.edges.len(), 6);
        assert!(dag.is_valid());
        assert!(SynthesisDataset::new(vec![dag]).check_against(&pool).is_err());
    }

    #[test]
    fn failures() {
        let pool = small_pool();
        assert_eq!(
            synthesize_random(&pool, 1, &NoReaction, &mut stream_rng(0, 0)).unwrap_err(),
            SynthesisFailure::Reaction {
                step: 0,
                message: "no_reaction".into()
            }
        );
        let empty = BuildingBlockPool::from_smiles(&["NCCO"], &[]).unwrap();
        assert_eq!(
            synthesize_random(&empty, 1, &NoReaction, &mut stream_rng(0, 0)).unwrap_err(),
            SynthesisFailure::EmptyPool
        );
    }

    #[test]
    fn dataset_audit_and_determinism() {
        let pool = small_pool();
        let engine = TemplateEngine::default();
        let config = DatasetConfig {
            target: 20,
            seed: 3,
            ..DatasetConfig::default()
        };
        let (ds, audit) = build_dataset(&pool, &config, &engine, &AcceptAll);
        assert!(audit.conserved(), "{audit:?}");
        assert_eq!(ds.len(), audit.accepted);
        assert!(ds.check_against(&pool).is_ok());
        let finals: HashSet<String> = ds.final_smiles().into_iter().collect();
        assert_eq!(finals.len(), ds.len());
        let (again, audit2) = build_dataset(&pool, &config, &engine, &AcceptAll);
        assert_eq!(again, ds);
        assert_eq!(audit2, audit);
        assert!(audit.report().contains("attempts: "));
    }

    #[test]
    fn property_filter_applies() {
        let pool = small_pool();
        let engine = TemplateEngine::default();
        let model = PropertyModel::default();
        let config = DatasetConfig {
            target: 5,
            seed: 1,
            ..DatasetConfig::default()
        };
        let (ds, audit) = build_dataset(&pool, &config, &engine, &model);
        assert!(audit.conserved());
        for d in &ds.dags {
            let m = crate::parse_smiles(&d.final_product().unwrap().smiles).unwrap();
            assert!(model.is_ionizable_lipid(&m));
        }
    }

    #[test]
    fn splits() {
        let one = crate::dag::SynthesisDag {
            nodes: vec![
                DagNode::block(0, 0, "N"),
                DagNode::block(1, 1, "O"),
                DagNode::product(2, "NO", true),
            ],
            edges: vec![(0, 2), (1, 2)],
        };
        let ds = SynthesisDataset::new(vec![one; 100]);
        let [tr, va, te] = split_dataset(&ds, DEFAULT_FRACTIONS, 7).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (90, 5, 5));
        let [tr, va, te] = split_dataset(&ds, [1.0, 0.0, 0.0], 7).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (100, 0, 0));
        assert!(split_dataset(&SynthesisDataset::new(vec![]), DEFAULT_FRACTIONS, 0).is_err());
        assert!(split_dataset(&ds, [0.5, 0.1, 0.1], 0).is_err());
    }

    #[test]
    fn weights_parse() {
        assert_eq!("1:3.6:6.1".parse::<TailWeights>().unwrap(), TailWeights::default());
        assert!("1:2".parse::<TailWeights>().is_err());
        assert!("0:0:0".parse::<TailWeights>().is_err());
    }
}
