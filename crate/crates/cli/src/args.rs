use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use djinn::ensemble::InitScheme;
use djinn::Task;

#[derive(Debug, Parser)]
#[command(
    name = "djinn",
    version,
    about = "Decision-tree-initialized deep networks: training, comparisons and search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cross-validate a DJINN ensemble and save a model trained on every row.
    Train(TrainArgs),
    /// DJINN against random dense and random sparse initialization on identical folds.
    Compare(CompareArgs),
    /// Test MSE as a function of ensemble size, normalized to one tree.
    SweepTrees(SweepArgs),
    /// Bayesian width search against DJINN on identical folds.
    Bayesopt(SearchArgs),
    /// Map and train the IF, OR and XOR truth tables.
    LogicDemo(LogicArgs),
    /// Render a saved model or ensemble member as Graphviz DOT.
    ExportDot(DotArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Target column(s); defaults to the last column.
    #[arg(long, value_delimiter = ',')]
    pub target: Vec<String>,
    /// regression or classification; defaults to the preset's task.
    #[arg(long)]
    pub task: Option<Task>,
    /// Use a seeded random subset of this many rows.
    #[arg(long)]
    pub subsample: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Named hyper-parameter set: boston, ca-housing, diabetes, yield, iris, digits, wine, breast-cancer.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Threads for member training.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 5)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Train regression members on raw targets instead of (0,1)-scaled ones.
    #[arg(long)]
    pub unscaled_targets: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "djinn")]
    pub init: InitScheme,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Schemes to compare; the first is the t-test reference.
    #[arg(long, value_delimiter = ',', default_value = "djinn,random_dense,random_sparse")]
    pub schemes: Vec<InitScheme>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20")]
    pub counts: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Architectures trained per permutation.
    #[arg(long, default_value_t = 100)]
    pub budget: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LogicArgs {
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.006)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "logic_demo")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DotArgs {
    /// Model or ensemble JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Ensemble member to render.
    #[arg(long, default_value_t = 0)]
    pub member: usize,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
