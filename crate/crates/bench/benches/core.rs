use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lipidgen::blocks::BuildingBlockPool;
use lipidgen::datagen::{build_dataset, AcceptAll, DatasetConfig, TailWeights};
use lipidgen::generator::{
    encode_paths, sample, sequence_nll_grad, Constraints, Dims, Mode, ModelParams, PoolView, SampleConfig,
};
use lipidgen::molgraph::{ecfp_fingerprint, graph_edit_distance};
use lipidgen::reactions::TemplateEngine;
use lipidgen::{canonical_smiles, parse_smiles};

const LIPID: &str = "CCCCCCCCCCCCOC(=O)CCN(CCC(=O)OCCCCCCCCCCCC)CCN(C)C";

fn pool() -> BuildingBlockPool {
    BuildingBlockPool::from_smiles(
        &["OCCN(CCO)CCO", "NCCO", "OCCCN(C)C", "NCCN(C)C"],
        &["CCCCCCCCCC(=O)O", "CCCCCCCCCCCC(=O)O", "CCCCCCCC/C=C\\CCCCCCCC(=O)O", "CCCCCCCCO", "CCCCCCCCCCCCN"],
    )
    .unwrap()
}

fn molgraph(c: &mut Criterion) {
    let m = parse_smiles(LIPID).unwrap();
    c.bench_function("parse_smiles", |b| b.iter(|| parse_smiles(black_box(LIPID)).unwrap()));
    c.bench_function("canonical_smiles", |b| b.iter(|| canonical_smiles(black_box(&m))));
    c.bench_function("ecfp_r2_2048", |b| b.iter(|| ecfp_fingerprint(black_box(&m), 2, 2048)));
    let x = parse_smiles("CCCCCCCCC(=O)O").unwrap();
    let y = parse_smiles("CCCCCCCCCN").unwrap();
    c.bench_function("ged_tails", |b| b.iter(|| graph_edit_distance(black_box(&x), black_box(&y), 20).unwrap()));
}

fn reactions(c: &mut Criterion) {
    let engine = TemplateEngine::default();
    let head = parse_smiles("OCCN(CCO)CCO").unwrap();
    let tail = parse_smiles("CCCCCCCCCCCC(=O)O").unwrap();
    c.bench_function("esterification", |b| b.iter(|| engine.react(black_box(&head), black_box(&tail))));
}

fn generator(c: &mut Criterion) {
    let pool = pool();
    let engine = TemplateEngine::default();
    let (ds, _) = build_dataset(
        &pool,
        &DatasetConfig { target: 20, weights: TailWeights::UNIFORM, ..DatasetConfig::default() },
        &engine,
        &AcceptAll,
    );
    let dims = Dims { d: 64, h: 256, fp_width: 1024 };
    let view = PoolView::new(&pool, dims.fp_width);
    let paths = encode_paths(&ds.dags, Mode::Dag, dims.fp_width).unwrap();
    let p = ModelParams::init(dims, 1);
    let cons = Constraints::default();
    c.bench_function("nll_grad_route", |b| b.iter(|| sequence_nll_grad(&p, &view, &cons, black_box(&paths[0])).unwrap()));
    let mut g = c.benchmark_group("sampling");
    g.sample_size(10);
    g.bench_function("sample_20_routes", |b| {
        b.iter(|| sample(&p, &pool, &view, &engine, &cons, &SampleConfig { count: 20, ..SampleConfig::default() }))
    });
    g.finish();
}

criterion_group!(benches, molgraph, reactions, generator);
criterion_main!(benches);
