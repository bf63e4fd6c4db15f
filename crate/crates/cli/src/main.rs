use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;

use config::Fractions;

#[derive(Parser, Debug)]
#[command(name = "lipidgen", version, about = "Synthesis-route generation of ionizable lipids")]
pub struct Cli {
    /// key = value configuration file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Reaction predictor: `builtin` or the URL of a reaction server
    #[arg(long, global = true, env = "LIPIDGEN_ENDPOINT")]
    pub endpoint: Option<String>,

    /// Require an explicit --seed for train, sample and optimize
    #[arg(long, global = true, env = "LIPIDGEN_CI")]
    pub ci: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Building-block filtering and tail mining
    #[command(subcommand)]
    Blocks(BlocksCmd),
    /// Random-route dataset construction
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train a generator on a route dataset
    Train(TrainArgs),
    /// Sample routes from a checkpoint, or from the random baseline
    Sample(SampleArgs),
    /// Validity, uniqueness, novelty, FFD and SA of generated routes
    Eval(EvalArgs),
    /// Iterative fine-tuning toward high scores
    Optimize(OptimizeArgs),
    /// Serve the built-in reaction engine over HTTP
    ServeReactions(ServeArgs),
    /// Score the classifier on a labelled SMILES<TAB>0|1 corpus
    ValidateClassifier(ValidateArgs),
}

#[derive(Subcommand, Debug)]
pub enum BlocksCmd {
    FilterHeads(FilterHeadsArgs),
    ExtractTails(ExtractTailsArgs),
    MatchTails(MatchTailsArgs),
    FilterTails(FilterTailsArgs),
    /// Filter head and tail lists and write an indexed pool
    BuildPool(BuildPoolArgs),
}

#[derive(Args, Debug)]
pub struct FilterHeadsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub max_weight: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub max_logp: Option<f64>,
    #[arg(long)]
    pub min_reactive: Option<usize>,
    #[arg(long)]
    pub max_reactive: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ExtractTailsArgs {
    /// Lipid corpus, one SMILES per line
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub min_chain: Option<usize>,
}

#[derive(Args, Debug)]
pub struct MatchTailsArgs {
    /// Tails to look up
    #[arg(long)]
    pub query: PathBuf,
    /// Purchasable catalogue, one SMILES per line
    #[arg(long)]
    pub catalog: PathBuf,
    /// Tab-separated matches
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub min_tanimoto: Option<f64>,
    #[arg(long)]
    pub max_ged: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FilterTailsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub min_chain: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BuildPoolArgs {
    #[arg(long)]
    pub heads: PathBuf,
    #[arg(long)]
    pub tails: PathBuf,
    /// Pool file (JSON lines)
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum DatasetCmd {
    Build(DatasetBuildArgs),
    Split(DatasetSplitArgs),
}

#[derive(Args, Debug)]
pub struct DatasetBuildArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub target: Option<usize>,
    /// Relative weights of one, two and three tails, e.g. 1:3.6:6.1
    #[arg(long)]
    pub tail_weights: Option<String>,
    #[arg(long)]
    pub attempts_per_target: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct DatasetSplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Writes PREFIX.train.jsonl, PREFIX.valid.jsonl and PREFIX.test.jsonl
    #[arg(long)]
    pub prefix: PathBuf,
    #[arg(long)]
    pub fractions: Option<Fractions>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub h: Option<usize>,
    #[arg(long)]
    pub fp_width: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    /// Checkpoint to write; the loss history goes to OUTPUT.loss.csv
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// dag or linear
    #[arg(long)]
    pub mode: Option<String>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Trained checkpoint; omit with --random
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub pool: PathBuf,
    /// Route file (JSON lines)
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<String>,
    /// Exactly two tails per route
    #[arg(long)]
    pub two_tail: bool,
    #[arg(long)]
    pub min_tail_chain: Option<usize>,
    /// Random routes instead of a model
    #[arg(long)]
    pub random: bool,
    /// Tail weights for --random
    #[arg(long)]
    pub tail_weights: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    /// Pool used as the SA reference corpus
    #[arg(long)]
    pub pool: PathBuf,
    /// key: value report; also writes OUTPUT.csv and OUTPUT.sa_hist.csv
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub samples_per_iter: Option<usize>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub fine_tune_rounds: Option<usize>,
    #[arg(long)]
    pub min_tail_chain: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// surrogate, or the URL of a server answering /api/v1/score
    #[arg(long)]
    pub scorer: Option<String>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
    /// Also answer /api/v1/pka with the rule table
    #[arg(long)]
    pub with_pka: bool,
    /// Also answer /api/v1/score with the surrogate scorer
    #[arg(long)]
    pub with_score: bool,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Which rule to score: ionizable or lipid
    #[arg(long, default_value = "ionizable")]
    pub rule: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("{}", e.line());
            ExitCode::from(e.kind.code() as u8)
        }
    }
}
