use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "covbound",
    version,
    about = "Bounds, exact trace moments and simulations for Gaussian covariance deviations with a variance profile"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Emit the JSON report (default).
    #[arg(long, global = true)]
    pub json: bool,

    /// Emit a flat CSV table instead of the JSON report.
    #[arg(long, global = true, conflicts_with = "json")]
    pub csv: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Profile parameters and Schatten parameters.
    Params(ParamsArgs),
    /// Every bound evaluator for a profile.
    Bounds(BoundsArgs),
    /// Monte Carlo estimates of the deviation norm and trace moments.
    Simulate(SimulateArgs),
    /// Exact full, off-diagonal and diagonal trace moments.
    Oracle(OracleArgs),
    /// Census of admissible shapes, optionally weighted by a profile.
    Shapes(ShapesArgs),
    /// Leading-term comparisons across a size grid for a structured family.
    Examples(ExamplesArgs),
    /// Cross-checks between the shape engine, the oracle and the parameters.
    Verify(VerifyArgs),
    /// Empirical deviation against the lower bound and the upper bounds.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum FamilyArg {
    Constant,
    IidColumns,
    IidRows,
    RankOne,
    BoundedRatio,
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    /// Profile file (CSV, or JSON when the name ends in .json); `-` reads stdin.
    #[arg(long, value_name = "FILE", conflicts_with = "family")]
    pub profile: Option<PathBuf>,

    /// Override the format guessed from the file name.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    /// Generate the profile from a structured family instead of a file.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,

    #[arg(long)]
    pub d: Option<usize>,

    #[arg(long)]
    pub n: Option<usize>,

    /// Row factor of rank_one (length d); comma separated, random when omitted.
    #[arg(long, value_delimiter = ',')]
    pub a: Option<Vec<String>>,

    /// Vector of iid_columns (length d), iid_rows and rank_one (length n).
    #[arg(long, value_delimiter = ',')]
    pub b: Option<Vec<String>>,

    /// Column-norm ratio of bounded_ratio.
    #[arg(long, default_value_t = 2.0)]
    pub k: f64,

    /// Seed for family vectors and bases that are not given explicitly.
    #[arg(long, default_value_t = 0)]
    pub family_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,

    /// Universal constant C.
    #[arg(long = "const", default_value_t = 1.0)]
    pub c_universal: f64,

    /// Universal constant C' of the Schatten tail.
    #[arg(long = "const-prime", default_value_t = 1.0)]
    pub c_prime: f64,

    /// Use max(log(n ∧ d), 1) instead of log(n ∧ d).
    #[arg(long)]
    pub log_floor: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 200)]
    pub samples: usize,

    /// auto, dense_eigen or power_iteration.
    #[arg(long, default_value = "auto")]
    pub norm_method: String,

    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,

    /// Even Schatten orders.
    #[arg(long, value_delimiter = ',', default_value = "2,4")]
    pub p: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,

    #[command(flatten)]
    pub bounds: BoundArgs,

    #[arg(long, value_delimiter = ',', default_value = "2,4")]
    pub p: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,

    #[command(flatten)]
    pub sim: SimArgs,

    /// Even orders of the Schatten traces to estimate.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,

    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub p: Vec<u32>,

    /// Also evaluate the shape sum and its difference from the oracle.
    #[arg(long)]
    pub with_shapes: bool,

    /// Largest number of expanded terms.
    #[arg(long, default_value_t = covbound::oracle::DEFAULT_WORK_CAP)]
    pub work_cap: u64,
}

#[derive(Debug, Args)]
pub struct ShapesArgs {
    /// Profile used to evaluate W(s); omit for the bare census.
    #[command(flatten)]
    pub profile: ProfileArgs,

    #[arg(long, value_delimiter = ',', default_value = "4")]
    pub p: Vec<u32>,

    /// Include the left- and right-rooted spanning trees.
    #[arg(long)]
    pub trees: bool,

    /// Largest admissible p.
    #[arg(long, default_value_t = covbound::shapes::DEFAULT_SHAPE_CAP)]
    pub cap: u32,
}

#[derive(Debug, Args)]
pub struct ExamplesArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,

    /// Grid of sizes as DxN pairs.
    #[arg(long, value_delimiter = ',', default_value = "10x50,50x10,30x30")]
    pub grid: Vec<String>,

    #[arg(long, default_value_t = 2.0)]
    pub k: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub bounds: BoundArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Check this profile instead of random rational ones.
    #[arg(long, value_name = "FILE")]
    pub profile: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,

    #[arg(long, default_value_t = 3)]
    pub d: usize,

    #[arg(long, default_value_t = 3)]
    pub n: usize,

    /// Largest p of the shape-sum comparison.
    #[arg(long, default_value_t = 4)]
    pub p: u32,

    #[arg(long, default_value_t = 6)]
    pub opnorm_ceiling_p: u32,

    #[arg(long, default_value_t = 4)]
    pub schatten_ceiling_p: u32,

    #[arg(long, default_value_t = 20)]
    pub profiles: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Test hook: perturb L(s) so the shape-sum check must fail.
    #[arg(long, hide = true)]
    pub corrupt_l: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,

    #[command(flatten)]
    pub sim: SimArgs,

    #[command(flatten)]
    pub bounds: BoundArgs,
}
