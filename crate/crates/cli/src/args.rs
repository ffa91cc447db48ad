use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "ptm",
    version,
    about = "Property testers, violation oracles and hard instances for distance matrices"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalArgs {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Suppress progress notes on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate an instance and its provenance sidecar.
    Gen(GenArgs),
    /// Run a property tester on a matrix file.
    Test(TestArgs),
    /// Enumerate violations exhaustively.
    Oracle(OracleArgs),
    /// Farness bounds and repairs.
    Repair(RepairArgs),
    /// Skeleton partitions and active-entry decay.
    #[command(subcommand)]
    Diagnose(DiagnoseCommand),
    /// Monte-Carlo sweeps and campaigns driven by a JSON spec.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    Behrend,
    Twin,
    SampleLb,
    QueryLb,
    RandomMetric,
    RandomUltra,
    RandomTree,
    Corrupt,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    /// Instance family.
    #[arg(long, value_enum)]
    pub kind: GenKind,
    /// Size parameter (points per part for behrend/twin, points otherwise).
    #[arg(long)]
    pub n: Option<usize>,
    /// Farness parameter for sample-lb, query-lb and corrupt.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Output matrix path (.dmat text or .dmatb binary); twin writes `_good`/`_bad` variants.
    #[arg(long)]
    pub out: PathBuf,
    /// Base instance for corrupt.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Extra parameters: max_weight=W, x_size=K, mode=uniform-rewrite|ds-style.
    #[arg(long, value_delimiter = ',')]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TesterArg {
    Metric,
    Ultra,
    Tree,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileArg {
    Paper,
    Desk,
}

#[derive(Debug, Args, Serialize)]
pub struct TestArgs {
    /// Property to test.
    #[arg(long, value_enum)]
    pub kind: TesterArg,
    /// Matrix file.
    #[arg(long)]
    pub input: PathBuf,
    /// Distance parameter in (0, 1).
    #[arg(long)]
    pub eps: f64,
    /// Sample-size constants.
    #[arg(long, value_enum, default_value = "desk")]
    pub profile: ProfileArg,
    /// Hard cap on distinct off-diagonal entries read.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Skip the symmetry/diagonal pre-check.
    #[arg(long)]
    pub skip_clean: bool,
    /// Ultra/tree: probe extra pairs against the main batch in a second phase.
    #[arg(long)]
    pub two_phase: bool,
    /// Record wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
    /// Also write the JSON artifact here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Triangles,
    UltraTriples,
    TreeQuadruples,
    Census,
    Pack,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    /// What to enumerate.
    #[arg(long, value_enum)]
    pub kind: OracleKind,
    /// Matrix file.
    #[arg(long)]
    pub input: PathBuf,
    /// Override the enumeration size cap.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Print only the number of violations.
    #[arg(long)]
    pub count: bool,
    /// Write the listing here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairKind {
    Bounds,
    Behrend,
    Edge,
}

#[derive(Debug, Args, Serialize)]
pub struct RepairArgs {
    /// Operation.
    #[arg(long, value_enum)]
    pub kind: RepairKind,
    /// Matrix file (behrend also needs its provenance sidecar).
    #[arg(long)]
    pub input: PathBuf,
    /// Repaired matrix output (behrend, edge) or upper-bound certificate (bounds).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Bounds: write the packed lower-bound triangles as JSON lines here.
    #[arg(long)]
    pub lower_out: Option<PathBuf>,
    /// Edge: first endpoint.
    #[arg(long)]
    pub i: Option<usize>,
    /// Edge: second endpoint.
    #[arg(long)]
    pub j: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SkeletonArg {
    Ultra,
    Tree,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnoseCommand {
    /// Skeleton partition of a random sample.
    Skeleton(SkeletonArgs),
    /// Active-entry decay as the sample grows.
    Decay(DecayArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SkeletonArgs {
    /// Matrix file.
    #[arg(long)]
    pub input: PathBuf,
    /// Class whose skeleton is built.
    #[arg(long, value_enum)]
    pub kind: SkeletonArg,
    /// Number of sampled indices (drawn with replacement, duplicates dropped).
    #[arg(long)]
    pub samples: usize,
    /// Distance parameter used for part classification.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Also write the JSON state here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DecayArgs {
    /// Matrix file.
    #[arg(long)]
    pub input: PathBuf,
    /// Class whose skeleton is built.
    #[arg(long, value_enum, default_value = "ultra")]
    pub kind: SkeletonArg,
    /// Distance parameter used for part classification.
    #[arg(long)]
    pub eps: f64,
    /// Points added per trial.
    #[arg(long)]
    pub steps: usize,
    /// Independent trials.
    #[arg(long)]
    pub trials: usize,
    /// Output CSV.
    #[arg(long)]
    pub csv: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Sweep,
    Soundness,
    Completeness,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    /// Which harness to run.
    #[arg(value_enum)]
    pub mode: ExperimentKind,
    /// JSON spec file.
    #[arg(long)]
    pub spec: PathBuf,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}
