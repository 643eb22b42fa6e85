use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "oddcf", version, about = "Odd continued fractions with parameter alpha in [g, G]")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Working precision in bits.
    #[arg(long, global = true, default_value_t = 256, value_parser = clap::value_parser!(u32).range(64..))]
    pub precision: u32,
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 20_240_501)]
    pub seed: u64,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Include wall-clock timings (output is then no longer reproducible).
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    /// One JSON object per line (cylinder dumps).
    Jsonl,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Digits, convergents and approximation errors of one x.
    Expand(ExpandArgs),
    /// Value of a digit string, optionally with a tail.
    Eval(EvalArgs),
    /// Natural-extension orbit cloud Φ^k(x, 0) over a mesh of I_alpha.
    Orbit(OrbitArgs),
    /// The invariant density h_alpha at points or on a mesh.
    Density(DensityArgs),
    /// Entropy and Lévy-constant estimates from nu_alpha-random orbits.
    Entropy(EntropyArgs),
    /// Rank-n cylinder dump.
    Cylinders(CylinderArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
    /// Per-alpha closed-form quantities over a grid of [g, G].
    Sweep(SweepArgs),
}

/// alpha: a decimal, `p/q`, or `g`, `G`, `1`, with an optional rational
/// multiplier of g or G such as `0.9g`.
#[derive(Debug, Args)]
pub struct AlphaArg {
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub alpha: String,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[command(flatten)]
    pub alpha: AlphaArg,
    /// `p/q`, a decimal, `g`/`G` multiples, or `alpha`/`alpha-2`. Rational
    /// input is expanded exactly.
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Comma-separated odd signed digits e·d, e.g. `3,-1,5`.
    #[arg(long, allow_hyphen_values = true)]
    pub digits: String,
    /// Tail t in (p_n + t p_{n-1})/(q_n + t q_{n-1}).
    #[arg(long, allow_hyphen_values = true)]
    pub tail: Option<String>,
}

#[derive(Debug, Args)]
pub struct OrbitArgs {
    /// May lie below g (exploratory).
    #[command(flatten)]
    pub alpha: AlphaArg,
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Fail unless every point lies in the closure of Omega_alpha (alpha in [g, G]).
    #[arg(long)]
    pub check_domain: bool,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub alpha: AlphaArg,
    /// Evaluate at these points.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    pub at: Vec<String>,
    /// Otherwise evaluate at this many midpoints of I_alpha.
    #[arg(long, default_value_t = 20)]
    pub mesh: usize,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub alpha: AlphaArg,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct CylinderArgs {
    #[command(flatten)]
    pub alpha: AlphaArg,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    /// Largest |omega| per letter.
    #[arg(long, default_value_t = 15)]
    pub d_max: u64,
    /// Maximum number of words kept at any rank.
    #[arg(long, default_value_t = 2_000_000)]
    pub budget: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only these check ids (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// List the check ids and exit.
    #[arg(long)]
    pub list: bool,
    /// Points of the [g, G] grid.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Monte Carlo points per alpha for partition and product-bound checks.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Random expansions for the digit and convergent checks.
    #[arg(long)]
    pub expansions: Option<usize>,
    /// Orbit length for the entropy check.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 33)]
    pub grid: usize,
    /// Also estimate the entropy with orbits of this length (0 = skip).
    #[arg(long, default_value_t = 0)]
    pub entropy_n: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
}
