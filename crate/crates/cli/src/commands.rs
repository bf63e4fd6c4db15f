use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use lipidgen::blocks::{
    extract_tails, filter_heads, filter_tails, find_similar_tails, read_candidates, BuildingBlockPool,
    Candidate, FilterOutcome, HeadCriteria, Provenance, SimilarityCriteria, TailCriteria,
};
use lipidgen::dag::{read_dags, write_dags, SynthesisDag};
use lipidgen::datagen::{
    build_dataset, sample_random, split_dataset, DatasetConfig, SynthesisDataset, TailWeights,
};
use lipidgen::generator::{
    encode_paths, read_checkpoint, sample, train, write_checkpoint, Constraints, Dims, Mode,
    ModelParams, PoolView, SampleConfig, TrainConfig,
};
use lipidgen::metrics::{evaluate, histogram_csv, property_rates, SaModel, CSV_HEADER};
use lipidgen::molgraph::{canonical_smiles, parse_smiles, Molecule};
use lipidgen::optimize::{
    best_iteration, records_csv, run as optimize, OptimizationConfig, ProductScorer, RemoteScorer,
    SurrogateScorer,
};
use lipidgen::properties::{score_corpus, PropertyModel, RulePka};
use lipidgen::reactions::{
    serve_blocking, Endpoint, ReactionPredictor, RemotePredictor, Service, TemplateEngine,
};
use lipidgen::transport::{JsonClient, RetryPolicy, DEFAULT_MAX_IN_FLIGHT};

use crate::config::{Fractions, Settings};
use crate::error::{CliError, Kind, Result};
use crate::{
    BlocksCmd, BuildPoolArgs, Cli, Command, DatasetBuildArgs, DatasetCmd, DatasetSplitArgs, EvalArgs,
    ExtractTailsArgs, FilterHeadsArgs, FilterTailsArgs, MatchTailsArgs, OptimizeArgs, SampleArgs,
    ServeArgs, TrainArgs, ValidateArgs,
};

struct Ctx {
    settings: Settings,
    endpoint: Option<String>,
    ci: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut ctx = Ctx {
        settings: Settings::load(cli.config.as_deref())?,
        endpoint: cli.endpoint,
        ci: cli.ci,
    };
    match cli.command {
        Command::Blocks(BlocksCmd::FilterHeads(a)) => filter_heads_cmd(&mut ctx, a),
        Command::Blocks(BlocksCmd::ExtractTails(a)) => extract_tails_cmd(&mut ctx, a),
        Command::Blocks(BlocksCmd::MatchTails(a)) => match_tails_cmd(&mut ctx, a),
        Command::Blocks(BlocksCmd::FilterTails(a)) => filter_tails_cmd(&mut ctx, a),
        Command::Blocks(BlocksCmd::BuildPool(a)) => build_pool_cmd(&mut ctx, a),
        Command::Dataset(DatasetCmd::Build(a)) => dataset_build_cmd(&mut ctx, a),
        Command::Dataset(DatasetCmd::Split(a)) => dataset_split_cmd(&mut ctx, a),
        Command::Train(a) => train_cmd(&mut ctx, a),
        Command::Sample(a) => sample_cmd(&mut ctx, a),
        Command::Eval(a) => eval_cmd(&mut ctx, a),
        Command::Optimize(a) => optimize_cmd(&mut ctx, a),
        Command::ServeReactions(a) => serve_cmd(&mut ctx, a),
        Command::ValidateClassifier(a) => validate_cmd(&mut ctx, a),
    }
}

impl Ctx {
    fn seed(&mut self, flag: Option<u64>) -> Result<u64> {
        if self.ci && flag.is_none() {
            return Err(CliError::config("--seed is required in CI mode"));
        }
        self.settings.get("seed", flag, 0)
    }

    fn policy(&mut self) -> Result<RetryPolicy> {
        let d = RetryPolicy::default();
        let attempts = self.settings.get("retry_attempts", None, d.max_attempts)?;
        let timeout = self.settings.get("timeout_secs", None, d.timeout.as_secs_f64())?;
        if attempts == 0 || !(timeout > 0.0) {
            return Err(CliError::config("retry_attempts and timeout_secs must be positive"));
        }
        Ok(RetryPolicy {
            max_attempts: attempts,
            timeout: Duration::from_secs_f64(timeout),
            ..d
        })
    }

    fn client(&mut self, url: &str) -> Result<JsonClient> {
        let policy = self.policy()?;
        JsonClient::new(url, policy, DEFAULT_MAX_IN_FLIGHT).map_err(|e| CliError::new(Kind::Endpoint, e.to_string()))
    }

    /// The configured reaction predictor. A remote one must answer its
    /// health check first.
    fn predictor(&mut self) -> Result<Arc<dyn ReactionPredictor>> {
        let text = self.settings.get("endpoint", self.endpoint.clone(), "builtin".to_string())?;
        let endpoint: Endpoint = text.parse().map_err(CliError::config)?;
        match endpoint {
            Endpoint::Builtin => Ok(Arc::new(TemplateEngine::default())),
            Endpoint::Remote(url) => {
                let remote = RemotePredictor::new(self.client(&url)?);
                if !remote.healthy() {
                    return Err(CliError::new(Kind::Endpoint, format!("{url} is not reachable or unhealthy")));
                }
                Ok(Arc::new(remote))
            }
        }
    }

    fn mode(&mut self, flag: Option<String>) -> Result<Mode> {
        let text = self.settings.get("mode", flag, "dag".to_string())?;
        text.parse().map_err(CliError::config)
    }

    fn tail_weights(&mut self, flag: Option<String>, default: TailWeights) -> Result<TailWeights> {
        let text = self.settings.get("tail_weights", flag, default.to_string())?;
        let w: TailWeights = text.parse().map_err(CliError::config)?;
        if !w.is_valid() {
            return Err(CliError::config(format!("invalid tail weights '{text}'")));
        }
        Ok(w)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::read(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::write(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::write(path, e))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn snapshot(ctx: &Ctx, command: &str, output: &Path) -> Result<()> {
    ctx.settings.write_snapshot(command, &sibling(output, ".config"))
}

fn candidates(path: &Path) -> Result<Vec<Candidate>> {
    read_candidates(open(path)?).map_err(|e| CliError::read(path, e))
}

fn read_pool(path: &Path) -> Result<BuildingBlockPool> {
    let pool = BuildingBlockPool::read_jsonl(open(path)?).map_err(|e| CliError::invalid(path, e))?;
    if pool.heads().next().is_none() || pool.tails().next().is_none() {
        return Err(CliError::invalid(path, "pool needs at least one head and one tail"));
    }
    Ok(pool)
}

fn read_routes(path: &Path) -> Result<Vec<SynthesisDag>> {
    read_dags(open(path)?).map_err(|e| CliError::invalid(path, e))
}

fn read_params(path: &Path, pool: &BuildingBlockPool) -> Result<(ModelParams, u64)> {
    let (params, header) = read_checkpoint(open(path)?).map_err(|e| CliError::invalid(path, e))?;
    if header.pool_hash != pool.content_hash() {
        return Err(CliError::invalid(path, "checkpoint was trained on a different pool"));
    }
    Ok((params, header.seed))
}

fn write_smiles(path: &Path, mols: &[Molecule], ids: &[Option<String>]) -> Result<()> {
    let mut text = String::new();
    for (i, m) in mols.iter().enumerate() {
        text.push_str(&canonical_smiles(m));
        if let Some(Some(id)) = ids.get(i) {
            text.push('\t');
            text.push_str(id);
        }
        text.push('\n');
    }
    write_text(path, &text)
}

fn finish_filter(ctx: &Ctx, command: &str, out: &FilterOutcome, output: &Path) -> Result<()> {
    write_smiles(output, &out.accepted, &out.accepted_ids)?;
    let mut report = out.report();
    for (line, msg) in &out.malformed {
        report.push_str(&format!("# malformed line {line}: {msg}\n"));
    }
    write_text(&sibling(output, ".report"), &report)?;
    print!("{}", out.report());
    snapshot(ctx, command, output)
}

fn head_criteria(ctx: &mut Ctx, a: &FilterHeadsArgs) -> Result<HeadCriteria> {
    let d = HeadCriteria::default();
    Ok(HeadCriteria {
        max_weight: ctx.settings.get("max_weight", a.max_weight, d.max_weight)?,
        max_logp: ctx.settings.get("max_logp", a.max_logp, d.max_logp)?,
        min_reactive: ctx.settings.get("min_reactive", a.min_reactive, d.min_reactive)?,
        max_reactive: ctx.settings.get("max_reactive", a.max_reactive, d.max_reactive)?,
    })
}

fn filter_heads_cmd(ctx: &mut Ctx, a: FilterHeadsArgs) -> Result<()> {
    let criteria = head_criteria(ctx, &a)?;
    let out = filter_heads(&candidates(&a.input)?, &criteria);
    finish_filter(ctx, "blocks filter-heads", &out, &a.output)
}

fn filter_tails_cmd(ctx: &mut Ctx, a: FilterTailsArgs) -> Result<()> {
    let criteria = TailCriteria {
        min_chain: ctx.settings.get("min_chain", a.min_chain, TailCriteria::default().min_chain)?,
    };
    let out = filter_tails(&candidates(&a.input)?, &criteria);
    finish_filter(ctx, "blocks filter-tails", &out, &a.output)
}

fn extract_tails_cmd(ctx: &mut Ctx, a: ExtractTailsArgs) -> Result<()> {
    let min_chain = ctx.settings.get("min_chain", a.min_chain, TailCriteria::default().min_chain)?;
    let ex = extract_tails(&candidates(&a.input)?, min_chain);
    write_smiles(&a.output, &ex.tails, &[])?;
    let report = format!(
        "lipids_read: {}\nwithout_linkage: {}\nshort_fragments: {}\nduplicates: {}\nmalformed: {}\ntails: {}\n",
        ex.lipids_read,
        ex.lipids_without_linkage,
        ex.short_fragments,
        ex.duplicates,
        ex.malformed.len(),
        ex.tails.len()
    );
    write_text(&sibling(&a.output, ".report"), &report)?;
    print!("{report}");
    snapshot(ctx, "blocks extract-tails", &a.output)
}

fn parse_all(path: &Path) -> Result<Vec<Molecule>> {
    candidates(path)?
        .iter()
        .map(|c| parse_smiles(&c.smiles).map_err(|e| CliError::invalid(path, format!("line {}: {e}", c.line))))
        .collect()
}

fn match_tails_cmd(ctx: &mut Ctx, a: MatchTailsArgs) -> Result<()> {
    let d = SimilarityCriteria::default();
    let criteria = SimilarityCriteria {
        min_tanimoto: ctx.settings.get("min_tanimoto", a.min_tanimoto, d.min_tanimoto)?,
        max_ged: ctx.settings.get("max_ged", a.max_ged, d.max_ged)?,
        ..d
    };
    let k = ctx.settings.get("k", a.k, 5usize)?;
    let queries = parse_all(&a.query)?;
    let catalog = BuildingBlockPool::from_molecules(&[], &parse_all(&a.catalog)?, Provenance::default());
    let mut text = String::from("query\tmatch\tged\ttanimoto\n");
    let mut matched = 0;
    for q in &queries {
        let hits = find_similar_tails(q, catalog.blocks(), k, &criteria);
        matched += usize::from(!hits.is_empty());
        let qs = canonical_smiles(q);
        for h in hits {
            let ged = h.ged.map_or("NA".to_string(), |g| g.to_string());
            text.push_str(&format!("{qs}\t{}\t{ged}\t{:.4}\n", h.smiles, h.tanimoto));
        }
    }
    write_text(&a.output, &text)?;
    println!("queries: {}\nmatched: {matched}\ncatalog: {}", queries.len(), catalog.len());
    snapshot(ctx, "blocks match-tails", &a.output)
}

fn build_pool_cmd(ctx: &mut Ctx, a: BuildPoolArgs) -> Result<()> {
    let hc = head_criteria(
        ctx,
        &FilterHeadsArgs {
            input: a.heads.clone(),
            output: a.output.clone(),
            max_weight: None,
            max_logp: None,
            min_reactive: None,
            max_reactive: None,
        },
    )?;
    let tc = TailCriteria {
        min_chain: ctx.settings.get("min_chain", None, TailCriteria::default().min_chain)?,
    };
    let heads = filter_heads(&candidates(&a.heads)?, &hc);
    let tails = filter_tails(&candidates(&a.tails)?, &tc);
    let provenance = Provenance {
        source: format!("{} + {}", a.heads.display(), a.tails.display()),
        parameters: vec![
            ("max_weight".into(), hc.max_weight.to_string()),
            ("max_logp".into(), hc.max_logp.to_string()),
            ("min_reactive".into(), hc.min_reactive.to_string()),
            ("max_reactive".into(), hc.max_reactive.to_string()),
            ("min_chain".into(), tc.min_chain.to_string()),
        ],
    };
    let pool = BuildingBlockPool::from_molecules(&heads.accepted, &tails.accepted, provenance);
    write_text(&a.output, &pool.to_jsonl())?;
    let mut prov = format!("source = {}\n", pool.provenance.source);
    for (k, v) in &pool.provenance.parameters {
        prov.push_str(&format!("{k} = {v}\n"));
    }
    prov.push_str(&format!("content_hash = {}\n", pool.content_hash()));
    write_text(&sibling(&a.output, ".provenance"), &prov)?;
    println!(
        "heads: {} (rejected {})\ntails: {} (rejected {})\nblocks: {}",
        heads.accepted.len(),
        heads.rejected,
        tails.accepted.len(),
        tails.rejected,
        pool.len()
    );
    snapshot(ctx, "blocks build-pool", &a.output)
}

fn dataset_build_cmd(ctx: &mut Ctx, a: DatasetBuildArgs) -> Result<()> {
    let pool = read_pool(&a.pool)?;
    let d = DatasetConfig::default();
    let config = DatasetConfig {
        target: ctx.settings.get("target", a.target, d.target)?,
        weights: ctx.tail_weights(a.tail_weights, d.weights)?,
        seed: ctx.seed(a.seed)?,
        attempts_per_target: ctx.settings.get("attempts_per_target", a.attempts_per_target, d.attempts_per_target)?,
    };
    let predictor = ctx.predictor()?;
    let (ds, audit) = build_dataset(&pool, &config, &*predictor, &PropertyModel::default());
    let mut w = create(&a.output)?;
    ds.write_jsonl(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::write(&a.output, e))?;
    write_text(&sibling(&a.output, ".audit"), &audit.report())?;
    print!("{}", audit.report());
    if !audit.target_reached() {
        log::warn!("attempt budget exhausted with {} of {} paths", audit.accepted, audit.target);
    }
    snapshot(ctx, "dataset build", &a.output)
}

fn dataset_split_cmd(ctx: &mut Ctx, a: DatasetSplitArgs) -> Result<()> {
    let ds = SynthesisDataset::read_jsonl(open(&a.input)?).map_err(|e| CliError::invalid(&a.input, e))?;
    let fractions = ctx.settings.get("fractions", a.fractions, Fractions(lipidgen::datagen::DEFAULT_FRACTIONS))?;
    let seed = ctx.seed(a.seed)?;
    let parts = split_dataset(&ds, fractions.0, seed).map_err(|e| CliError::config(e.to_string()))?;
    for (name, part) in ["train", "valid", "test"].iter().zip(&parts) {
        let path = sibling(&a.prefix, &format!(".{name}.jsonl"));
        let mut w = create(&path)?;
        part.write_jsonl(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::write(&path, e))?;
        println!("{name}: {}", part.len());
    }
    snapshot(ctx, "dataset split", &a.prefix)
}

fn dims(ctx: &mut Ctx, m: &crate::ModelArgs) -> Result<Dims> {
    let d = Dims::default();
    let dims = Dims {
        d: ctx.settings.get("d", m.d, d.d)?,
        h: ctx.settings.get("h", m.h, d.h)?,
        fp_width: ctx.settings.get("fp_width", m.fp_width, d.fp_width)?,
    };
    if dims.d == 0 || dims.h == 0 || !dims.fp_width.is_power_of_two() {
        return Err(CliError::config("d and h must be positive and fp_width a power of two"));
    }
    Ok(dims)
}

fn train_cmd(ctx: &mut Ctx, a: TrainArgs) -> Result<()> {
    let pool = read_pool(&a.pool)?;
    let ds = SynthesisDataset::read_jsonl(open(&a.dataset)?).map_err(|e| CliError::invalid(&a.dataset, e))?;
    ds.check_against(&pool).map_err(|e| CliError::invalid(&a.dataset, e))?;
    let dims = dims(ctx, &a.model)?;
    let d = TrainConfig::default();
    let config = TrainConfig {
        epochs: ctx.settings.get("epochs", a.epochs, d.epochs)?,
        lr: ctx.settings.get("lr", a.lr, d.lr)?,
        batch_size: ctx.settings.get("batch_size", a.batch_size, d.batch_size)?,
        seed: ctx.seed(a.seed)?,
        mode: ctx.mode(a.mode)?,
    };
    let view = PoolView::new(&pool, dims.fp_width);
    let paths = encode_paths(&ds.dags, config.mode, dims.fp_width).map_err(|e| CliError::invalid(&a.dataset, e))?;
    let mut params = ModelParams::init(dims, config.seed);
    let history = train(&mut params, &view, &Constraints::default(), &paths, &config).map_err(CliError::runtime)?;
    let mut w = create(&a.output)?;
    write_checkpoint(&mut w, &params, &pool.content_hash(), config.seed).map_err(CliError::runtime)?;
    w.flush().map_err(|e| CliError::write(&a.output, e))?;
    let mut csv = String::from("epoch,mean_nll\n");
    for (i, l) in history.iter().enumerate() {
        csv.push_str(&format!("{},{l:.6}\n", i + 1));
    }
    write_text(&sibling(&a.output, ".loss.csv"), &csv)?;
    print!("{csv}");
    snapshot(ctx, "train", &a.output)
}

fn sample_cmd(ctx: &mut Ctx, a: SampleArgs) -> Result<()> {
    let pool = read_pool(&a.pool)?;
    let batches = ctx.settings.get("batches", a.batches, 1usize)?;
    let per = ctx.settings.get("samples_per_batch", a.batch_size, 200usize)?;
    let seed = ctx.seed(a.seed)?;
    let count = batches * per;
    let predictor = ctx.predictor()?;
    let (dags, failures): (Vec<SynthesisDag>, usize) = if a.random {
        let weights = ctx.tail_weights(a.tail_weights, TailWeights::UNIFORM)?;
        let (routes, failures) = sample_random(&pool, count, weights, &*predictor, seed);
        (routes.into_iter().map(|(d, _)| d).collect(), failures)
    } else {
        let Some(ckpt) = &a.checkpoint else {
            return Err(CliError::config("sample needs --checkpoint or --random"));
        };
        let (params, _) = read_params(ckpt, &pool)?;
        let two_tail = ctx.settings.get("two_tail", a.two_tail.then_some(true), false)?;
        let min_chain = ctx.settings.get_opt("min_tail_chain", a.min_tail_chain)?;
        let mut c = if two_tail {
            Constraints::two_tails(min_chain)
        } else {
            Constraints {
                min_tail_chain: min_chain,
                ..Constraints::default()
            }
        };
        c.max_tails = ctx.settings.get("max_tails", None, c.max_tails)?;
        let config = SampleConfig {
            count,
            temperature: ctx.settings.get("temperature", a.temperature, 1.0)?,
            seed,
            mode: ctx.mode(a.mode)?,
        };
        let view = PoolView::new(&pool, params.dims().fp_width);
        let out = sample(&params, &pool, &view, &*predictor, &c, &config);
        for m in &out.failure_messages {
            log::debug!("sample failed: {m}");
        }
        (out.dags(), out.failures)
    };
    let mut w = create(&a.output)?;
    write_dags(&mut w, &dags).and_then(|_| w.flush()).map_err(|e| CliError::write(&a.output, e))?;
    let summary = format!("requested: {count}\ngenerated: {}\nfailures: {failures}\n", dags.len());
    write_text(&sibling(&a.output, ".summary"), &summary)?;
    print!("{summary}");
    snapshot(ctx, "sample", &a.output)
}

fn final_smiles(dags: &[SynthesisDag]) -> Vec<String> {
    dags.iter().filter_map(|d| d.final_product().map(|n| n.smiles.clone())).collect()
}

fn eval_cmd(ctx: &mut Ctx, a: EvalArgs) -> Result<()> {
    let generated = final_smiles(&read_routes(&a.generated)?);
    let training = final_smiles(&read_routes(&a.train)?);
    let pool = read_pool(&a.pool)?;
    let sa = SaModel::from_molecules(pool.blocks().iter().map(|b| &b.molecule));
    let report = evaluate(&generated, &training, &sa).map_err(|e| CliError::invalid(&a.generated, e))?;
    let valid: Vec<Molecule> = generated.iter().filter_map(|s| parse_smiles(s).ok()).collect();
    let (lipid, ion) = property_rates(&valid, &PropertyModel::default()).unwrap_or((0.0, 0.0));
    let mut text = report.report();
    text.push_str(&format!("lipid_rate: {lipid:.4}\nionizable_rate: {ion:.4}\n"));
    write_text(&a.output, &text)?;
    write_text(
        &sibling(&a.output, ".csv"),
        &format!("{CSV_HEADER},lipid_rate,ionizable_rate\n{},{lipid:.6},{ion:.6}\n", report.csv_row()),
    )?;
    write_text(&sibling(&a.output, ".sa_hist.csv"), &histogram_csv(&report.sa_scores, 1.0, 10.0, 0.5))?;
    print!("{text}");
    snapshot(ctx, "eval", &a.output)
}

fn optimize_cmd(ctx: &mut Ctx, a: OptimizeArgs) -> Result<()> {
    let pool = read_pool(&a.pool)?;
    let (params, _) = read_params(&a.checkpoint, &pool)?;
    let d = OptimizationConfig::default();
    let config = OptimizationConfig {
        iterations: ctx.settings.get("iterations", a.iterations, d.iterations)?,
        samples_per_iter: ctx.settings.get("samples_per_iter", a.samples_per_iter, d.samples_per_iter)?,
        top_k: ctx.settings.get("top_k", a.top_k, d.top_k)?,
        fine_tune_rounds: ctx.settings.get("fine_tune_rounds", a.fine_tune_rounds, d.fine_tune_rounds)?,
        min_tail_chain: ctx.settings.get("min_tail_chain", a.min_tail_chain, d.min_tail_chain)?,
        temperature: ctx.settings.get("temperature", a.temperature, d.temperature)?,
        lr: ctx.settings.get("lr", a.lr, d.lr)?,
        batch_size: ctx.settings.get("batch_size", a.batch_size, d.batch_size)?,
        seed: ctx.seed(a.seed)?,
        mode: ctx.mode(None)?,
    };
    config.validate().map_err(|e| CliError::config(e.to_string()))?;
    let scorer_name = ctx.settings.get("scorer", a.scorer, "surrogate".to_string())?;
    let scorer: Box<dyn ProductScorer> = if scorer_name == "surrogate" {
        Box::new(SurrogateScorer::default())
    } else if scorer_name.starts_with("http://") || scorer_name.starts_with("https://") {
        Box::new(RemoteScorer::new(ctx.client(scorer_name.trim_end_matches('/'))?))
    } else {
        return Err(CliError::config(format!("unknown scorer '{scorer_name}'")));
    };
    let predictor = ctx.predictor()?;
    fs::create_dir_all(&a.output_dir).map_err(|e| CliError::write(&a.output_dir, e))?;
    let (_, records) =
        optimize(&params, &pool, &*predictor, &*scorer, &config, Some(&a.output_dir)).map_err(|e| match e {
            lipidgen::optimize::OptimizeError::Score(s) => CliError::new(Kind::Endpoint, s.to_string()),
            other => CliError::runtime(other),
        })?;
    write_text(&a.output_dir.join("iterations.csv"), &records_csv(&records))?;
    for r in &records {
        write_text(&a.output_dir.join(format!("iter_{}_scores.csv", r.iteration)), &r.scores_csv())?;
        if r.short {
            log::warn!("iteration {}: only {} successful samples", r.iteration, r.k());
        }
    }
    if let Some(best) = best_iteration(&records) {
        if let Some(src) = &best.checkpoint {
            let dst = a.output_dir.join("best.ckpt");
            fs::copy(src, &dst).map_err(|e| CliError::write(&dst, e))?;
        }
        println!("best_iteration: {}", best.iteration);
    }
    print!("{}", records_csv(&records));
    ctx.settings.write_snapshot("optimize", &a.output_dir.join("resolved.config"))
}

fn serve_cmd(ctx: &mut Ctx, a: ServeArgs) -> Result<()> {
    let bind = ctx.settings.get("bind", a.bind, "127.0.0.1:8000".to_string())?;
    let service = Service {
        reactions: Arc::new(TemplateEngine::default()),
        pka: a.with_pka.then(|| Arc::new(RulePka::default()) as _),
        scorer: a.with_score.then(|| {
            let s = SurrogateScorer::default();
            Arc::new(move |m: &Molecule| s.score(m)) as _
        }),
    };
    serve_blocking(service, &bind, |addr| {
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
    })
    .map_err(|e| CliError::new(Kind::Endpoint, format!("{bind}: {e}")))
}

fn validate_cmd(_: &mut Ctx, a: ValidateArgs) -> Result<()> {
    let model = PropertyModel::default();
    let reader: Box<dyn BufRead> = Box::new(open(&a.input)?);
    let score = match a.rule.as_str() {
        "ionizable" => score_corpus(reader, |m| model.is_ionizable_lipid(m)),
        "lipid" => score_corpus(reader, |m| model.is_lipid_like(m)),
        other => return Err(CliError::config(format!("unknown rule '{other}' (ionizable or lipid)"))),
    }
    .map_err(|e| CliError::read(&a.input, e))?;
    println!(
        "true_positive: {}\nfalse_positive: {}\ntrue_negative: {}\nfalse_negative: {}\nmalformed: {}\naccuracy: {}",
        score.true_positive,
        score.false_positive,
        score.true_negative,
        score.false_negative,
        score.malformed,
        score.accuracy().map_or("NA".to_string(), |x| format!("{x:.4}"))
    );
    Ok(())
}
