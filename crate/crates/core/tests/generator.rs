mod common;

use std::fs::File;
use std::io::{BufReader, BufWriter};

use lipidgen::blocks::BuildingBlockPool;
use lipidgen::datagen::{build_dataset, AcceptAll, DatasetConfig, TailWeights};
use lipidgen::generator::{
    encode_paths, read_checkpoint, sample, train, write_checkpoint, Constraints, Dims, Mode, ModelParams,
    PoolView, SampleConfig, TrainConfig,
};
use lipidgen::optimize::{self, meets_tail_constraints, OptimizationConfig, SurrogateScorer};
use lipidgen::properties::PropertyModel;
use lipidgen::reactions::TemplateEngine;

const SMALL: Dims = Dims { d: 8, h: 16, fp_width: 256 };

fn pool() -> BuildingBlockPool {
    BuildingBlockPool::from_smiles(
        &["OCCN(CCO)CCO", "NCCO", "OCCCN(C)C", "NCCN(C)C"],
        &[
            "CCCCCCCCCC(=O)O",
            "CCCCCCCCCCCC(=O)O",
            "CCCCCCCC/C=C\\CCCCCCCC(=O)O",
            "CCCCCCCCO",
            "CCCCCCCCCCCCN",
        ],
    )
    .unwrap()
}

fn trained(pool: &BuildingBlockPool, mode: Mode) -> ModelParams {
    let engine = TemplateEngine::default();
    let (ds, _) = build_dataset(
        pool,
        &DatasetConfig {
            target: 40,
            weights: TailWeights::UNIFORM,
            ..DatasetConfig::default()
        },
        &engine,
        &AcceptAll,
    );
    let view = PoolView::new(pool, SMALL.fp_width);
    let paths = encode_paths(&ds.dags, mode, SMALL.fp_width).unwrap();
    let mut p = ModelParams::init(SMALL, 2);
    let hist = train(
        &mut p,
        &view,
        &Constraints::default(),
        &paths,
        &TrainConfig { epochs: 5, lr: 1e-2, mode, ..TrainConfig::default() },
    )
    .unwrap();
    assert!(hist.last() < hist.first(), "{hist:?}");
    p
}

#[test]
fn checkpoint_round_trip_samples_identically() {
    let pool = pool();
    let p = trained(&pool, Mode::Dag);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    write_checkpoint(BufWriter::new(File::create(&path).unwrap()), &p, &pool.content_hash(), 2).unwrap();
    let (q, header) = read_checkpoint(BufReader::new(File::open(&path).unwrap())).unwrap();
    assert_eq!(header.pool_hash, pool.content_hash());
    assert_eq!(q.data, p.data, "training keeps parameters at f32 precision");
    let view = PoolView::new(&pool, SMALL.fp_width);
    let engine = TemplateEngine::default();
    let cfg = SampleConfig { count: 50, seed: 9, ..SampleConfig::default() };
    let a = sample(&p, &pool, &view, &engine, &Constraints::default(), &cfg);
    let b = sample(&q, &pool, &view, &engine, &Constraints::default(), &cfg);
    assert_eq!(a.dags(), b.dags());
    assert_eq!(a.failures, b.failures);
}

#[test]
fn sampling_is_seeded() {
    let pool = pool();
    let p = ModelParams::init(SMALL, 4);
    let view = PoolView::new(&pool, SMALL.fp_width);
    let engine = TemplateEngine::default();
    let c = Constraints::default();
    let run = |seed| sample(&p, &pool, &view, &engine, &c, &SampleConfig { count: 30, seed, ..SampleConfig::default() }).dags();
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
    let greedy = |seed| {
        sample(&p, &pool, &view, &engine, &c, &SampleConfig { count: 5, seed, temperature: 0.0, ..SampleConfig::default() })
            .dags()
    };
    let g = greedy(1);
    assert!(g.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(g, greedy(7));
}

#[test]
fn linear_mode_trains_and_samples_linear_routes() {
    let pool = pool();
    let p = trained(&pool, Mode::Linear);
    let view = PoolView::new(&pool, SMALL.fp_width);
    let out = sample(
        &p,
        &pool,
        &view,
        &TemplateEngine::default(),
        &Constraints::default(),
        &SampleConfig { count: 40, mode: Mode::Linear, ..SampleConfig::default() },
    );
    assert!(!out.routes.is_empty());
    for r in &out.routes {
        assert!(r.dag.is_valid());
        lipidgen::dag::to_linear_list(&r.dag).unwrap();
    }
}

#[test]
fn two_tail_constraint_holds_in_every_sample() {
    let pool = pool();
    let p = trained(&pool, Mode::Dag);
    let view = PoolView::new(&pool, SMALL.fp_width);
    let out = sample(
        &p,
        &pool,
        &view,
        &TemplateEngine::default(),
        &Constraints::two_tails(Some(10)),
        &SampleConfig { count: 80, ..SampleConfig::default() },
    );
    assert!(!out.routes.is_empty());
    assert!(out.routes.iter().all(|r| meets_tail_constraints(&r.dag, &pool, 10)));
}

#[test]
fn optimization_writes_checkpoints_and_respects_constraints() {
    let pool = pool();
    let p = trained(&pool, Mode::Dag);
    let dir = tempfile::tempdir().unwrap();
    let scorer = SurrogateScorer { model: PropertyModel::default() };
    let cfg = OptimizationConfig {
        iterations: 2,
        samples_per_iter: 60,
        top_k: 10,
        fine_tune_rounds: 1,
        ..OptimizationConfig::default()
    };
    let (_, records) = optimize::run(&p, &pool, &TemplateEngine::default(), &scorer, &cfg, Some(dir.path())).unwrap();
    assert_eq!(records.len(), 2);
    for r in &records {
        assert_eq!(r.violations, 0);
        assert!(r.scores.windows(2).all(|w| w[0] >= w[1]));
        let ckpt = r.checkpoint.as_ref().unwrap();
        let (_, h) = read_checkpoint(BufReader::new(File::open(ckpt).unwrap())).unwrap();
        assert_eq!(h.pool_hash, pool.content_hash());
    }
    // same seed, same run
    let (_, again) = optimize::run(&p, &pool, &TemplateEngine::default(), &scorer, &cfg, None).unwrap();
    assert_eq!(records.iter().map(|r| &r.smiles).collect::<Vec<_>>(), again.iter().map(|r| &r.smiles).collect::<Vec<_>>());
}

#[test]
fn bundled_corpus_builds_full_pool() {
    let pool = common::bundled_pool();
    assert_eq!(pool.heads().count(), 200);
    assert_eq!(pool.tails().count(), 100);
}
