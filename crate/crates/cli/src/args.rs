use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hetrob::experiment::ThresholdChoice;

#[derive(Debug, Parser)]
#[command(name = "hetrob", version, about = "Robust estimation with per-sample corruption rates")]
pub struct Cli {
    /// Never emit ANSI colour codes.
    #[arg(long, global = true)]
    pub no_color: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a mean or regression coefficient from a dataset CSV.
    Estimate(EstimateArgs),
    /// Draw a contaminated dataset from a scenario JSON.
    Simulate(SimulateArgs),
    /// Run a Monte-Carlo experiment config and write the long-form CSV.
    Bench(BenchArgs),
    /// Evaluate the rate functional, lower-bound curve and delta-star for a profile.
    Rates(RatesArgs),
    /// Check the weight solver against its oracle and the two-point mixture identity.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Weighted mean with the optimal linear weights.
    MeanOptimal,
    /// Mean of the samples with `lambda <= t`.
    MeanThreshold,
    /// Weighted Tukey median.
    Tukey,
    /// Weighted regression-depth coefficient.
    RegressionDepth,
    SampleMean,
    CoordinateMedian,
    Ols,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightsArg {
    Optimal,
    Threshold,
    Uniform,
}

pub fn parse_threshold(s: &str) -> Result<ThresholdChoice, String> {
    if s == "auto" {
        return Ok(ThresholdChoice::AUTO);
    }
    let t: f64 = s.parse().map_err(|_| format!("expected `auto` or a number, got {s:?}"))?;
    if !(0.0..=1.0).contains(&t) {
        return Err(format!("threshold must lie in [0, 1], got {t}"));
    }
    Ok(ThresholdChoice::Fixed(t))
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Dataset CSV (`x1..xd,lambda` or `w1..wd,y,lambda`, optional `corrupted`).
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,

    #[arg(long, value_enum, default_value = "mean-optimal")]
    pub method: MethodArg,

    /// Sample weights for the depth estimators.
    #[arg(long, value_enum, default_value = "threshold")]
    pub weights: WeightsArg,

    /// Penalty in `‖w‖² + c (wᵀλ)²`.
    #[arg(long, default_value_t = hetrob::weights::DEFAULT_PENALTY)]
    pub c: f64,

    /// Threshold on `lambda`, or `auto` for the minimizer of `t² + k / N(t)`.
    #[arg(long, default_value = "auto", value_parser = parse_threshold)]
    pub t: ThresholdChoice,

    /// `k` used by `--t auto`; defaults to the dimension.
    #[arg(long)]
    pub k: Option<f64>,

    /// Seed for the depth search in two or more dimensions.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Random directions used by the depth search.
    #[arg(long)]
    pub directions: Option<usize>,

    /// Write `component,estimate` rows here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Write `index,lambda,weight` rows here.
    #[arg(long, value_name = "PATH")]
    pub weights_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON.
    #[arg(long, value_name = "PATH")]
    pub scenario: PathBuf,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Output CSV; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Leave out the `corrupted` column.
    #[arg(long)]
    pub no_flags: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment config JSON.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,

    /// Long-form CSV output.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,

    /// Also write the JSON report here.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,

    /// Override the config's root seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Override the number of trials.
    #[arg(long)]
    pub trials: Option<usize>,

    /// Override the sample size of a power-law profile.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["profile", "power_law"])))]
pub struct RatesArgs {
    /// Profile file (CSV with a `lambda` column, or a JSON array).
    #[arg(long, value_name = "PATH")]
    pub profile: Option<PathBuf>,

    /// Draw `n` rates from `F(t) = 1 - (1 - t)^q` with this `q`.
    #[arg(long, value_name = "Q", requires = "n")]
    pub power_law: Option<f64>,

    /// Sample size for `--power-law`.
    #[arg(long, conflicts_with = "profile")]
    pub n: Option<usize>,

    /// Seed for `--power-law`.
    #[arg(long, conflicts_with = "profile")]
    pub seed: Option<u64>,

    #[arg(long, default_value_t = 1.0)]
    pub k: f64,

    /// Radius of the bounded class.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,

    /// Write `delta,lower_bound` rows here.
    #[arg(long, value_name = "PATH")]
    pub curve_out: Option<PathBuf>,

    /// Write the full overlay as JSON here.
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Profile size for the solver suite.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Random cases per suite.
    #[arg(long, default_value_t = 20)]
    pub cases: usize,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Draws per mixture case.
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
}
