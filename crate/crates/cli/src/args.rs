use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "qmetric", version, about = "Distances between quantum ensembles and their sample complexity")]
pub struct Cli {
    /// Worker threads for trials and probes (0 = all available cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an ensemble file.
    Gen(GenArgs),
    /// Exact distance between two ensemble files.
    Dist(DistArgs),
    /// Sample SWAP-test outcomes and estimate a distance.
    Estimate(EstimateArgs),
    /// Sample-complexity sweep over ensemble sizes.
    Sweep(SweepArgs),
    /// Analytic sample-count bounds.
    Bounds(BoundsArgs),
    /// Re-execute a run from the config echoed in its JSON output.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct GenArgs {
    /// cluster, circular, hardpair, basis, haar or fidelity-table.
    pub generator: String,
    /// Number of states.
    #[arg(long)]
    pub n: Option<usize>,
    /// Cluster spread.
    #[arg(long, default_value_t = 0.08)]
    pub s: f64,
    /// Hard-pair phase offset.
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    /// Hilbert-space dimension (haar, basis).
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Comma-separated weights (basis).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Square fidelity table CSV (fidelity-table).
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, env = "QMETRIC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Second output file (fidelity-table writes two ensembles).
    #[arg(long)]
    pub out2: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct DistArgs {
    #[arg(long)]
    pub e1: PathBuf,
    #[arg(long)]
    pub e2: PathBuf,
    /// mmd-<k> or wasserstein.
    #[arg(long, default_value = "mmd-1")]
    pub metric: String,
    /// Also compute the moment-operator route (MMD) or the dual objective (transport).
    #[arg(long)]
    pub cross_check: bool,
    /// Write the transport plan as sparse CSV.
    #[arg(long)]
    pub plan_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct EstimateArgs {
    #[arg(long, required_unless_present = "replay")]
    pub e1: Option<PathBuf>,
    #[arg(long, required_unless_present = "replay")]
    pub e2: Option<PathBuf>,
    /// mmd-<k> or wasserstein.
    #[arg(long, default_value = "mmd-1")]
    pub metric: String,
    /// ustat, labelfree or nonuniform (MMD); plugin or nonuniform (wasserstein).
    #[arg(long)]
    pub estimator: Option<String>,
    /// Total number of SWAP tests.
    #[arg(long, default_value_t = 0)]
    pub budget: u64,
    #[arg(long, env = "QMETRIC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Infidelity radius of per-shot state noise.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Where the sampled batch is written.
    #[arg(long, default_value = "batch.csv")]
    pub batch_out: PathBuf,
    /// Estimate from a saved batch instead of sampling.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct SweepArgs {
    /// TOML sweep configuration. Flags below take precedence over its values.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, env = "QMETRIC_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct BoundsArgs {
    /// Comma-separated ensemble sizes.
    #[arg(long, value_delimiter = ',', default_value = "50,100,150,200")]
    pub n: Vec<usize>,
    /// Comma-separated MMD orders; `N` stands for k = N.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,N")]
    pub k: Vec<String>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub delta: f64,
    /// Constant in the large-ensemble MMD bound.
    #[arg(long, default_value_t = 4.0)]
    pub multiplier: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// JSON output of an earlier run.
    pub from: PathBuf,
}
