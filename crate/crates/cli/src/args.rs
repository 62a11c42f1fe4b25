use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "rankembed", version, about = "Train multi-scale image embeddings and query them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Seed for every random draw (overrides the config file)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections
    #[arg(long)]
    pub threads: Option<usize>,
    /// JSON run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replace existing output files
    #[arg(long)]
    pub force: bool,
    /// Exponent k of the retrieval metric (overrides the config file)
    #[arg(long)]
    pub metric_k: Option<f64>,
    /// Human-readable tables instead of key=value lines
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert a public dataset file into the internal container
    Ingest(IngestArgs),
    /// Train a network and write its best checkpoint
    Train(TrainArgs),
    /// Embed a dataset into an embedding index file
    Embed(EmbedArgs),
    /// Print the nearest catalog items for one query
    Query(QueryArgs),
    /// Triplet accuracy and top-k recall
    Eval(EvalArgs),
    /// Relative-contrast table for uniform random points
    DiagContrast(ContrastArgs),
    /// Print sampled training pairs as query_id,candidate_id,label
    SamplePairs(SampleArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// IDX image file followed by IDX label file (gzip accepted)
    Idx,
    /// One or more CIFAR-10 binary batch files
    Cifar10,
    /// An existing dataset container (validated and copied)
    Internal,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long, value_enum)]
    pub format: Format,
    /// Input files
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training dataset container
    #[arg(long)]
    pub train: PathBuf,
    /// Validation dataset container; default holds out a tenth of the training set
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Checkpoint to write
    #[arg(short, long, required_unless_present = "folds")]
    pub output: Option<PathBuf>,
    /// Training log (CSV); default is the checkpoint path plus `.log.csv`
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Run stratified k-fold cross-validation instead of a single split
    #[arg(long)]
    pub folds: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    /// Catalog embedding index
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Query id: a catalog record, or an item of --dataset
    #[arg(long)]
    pub id: String,
    /// Dataset holding the query image (needs --checkpoint)
    #[arg(long, requires = "checkpoint")]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(short, long, default_value_t = 20)]
    pub k: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Network to embed dataset images with
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Catalog embedding index
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Images for triplets (with --checkpoint) or queries
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Triplet list (anchor,positive,negative)
    #[arg(long)]
    pub triplets: Option<PathBuf>,
    /// Ground-truth list (query_id,match_id[,...])
    #[arg(long, requires = "embeddings")]
    pub ground_truth: Option<PathBuf>,
    /// Query embedding index; default embeds --dataset or reuses the catalog
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(short, long, default_value_t = 20)]
    pub k: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct ContrastArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 10, 20, 50, 100])]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.3f64, 1.0, 2.0])]
    pub ks: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Write the CSV table here instead of standard output
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0.5)]
    pub pos_fraction: f64,
    #[command(flatten)]
    pub common: Common,
}
