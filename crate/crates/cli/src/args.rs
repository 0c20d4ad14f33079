use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Equilibrium clearing prices and endogenous inverse demand curves.
#[derive(Debug, Parser, Serialize)]
#[command(name = "endodemand", version, args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    /// Emit the CSV grid behind a reference figure instead of running a command.
    #[arg(long, value_enum)]
    pub figure: Option<Figure>,

    /// Seed for sampled laws. Required whenever scenarios are drawn at random.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Number of Monte Carlo scenarios for sampled laws.
    #[arg(long, global = true)]
    pub samples: Option<usize>,

    /// Write results here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    /// H_Z(v) for the three-equilibria fixture.
    AppendixC,
    /// Two-asset inverse demand surfaces for i.i.d. lognormal payoffs.
    CrossImpact,
    /// Lognormal inverse demand curves with and without systemic ruin.
    Lognormal,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Clearing price of a claim, with diagnostics, as JSON.
    Price(PriceArgs),
    /// Every fixed point found by the grid scan, as JSON.
    Roots(PriceArgs),
    /// Inverse demand curve as CSV (s, f, f_bar, in_domain).
    Demand(DemandArgs),
    /// Two-asset inverse demand grid as long CSV (s1, s2, asset, f, f_bar).
    CrossImpact(CrossImpactArgs),
    /// Slopes of both inverse demand curves at zero, as JSON.
    Liquidity(LiquidityArgs),
    /// Analytic inverse demand curves under exponential utility, as CSV.
    ClosedForm(ClosedFormArgs),
    /// Full n-agent equilibrium, as JSON or CSV.
    Equilibrium(EquilibriumArgs),
    /// Prices of the claim under a vanishing probability of systemic ruin, as JSON.
    RuinLimit(RuinLimitArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProfileArgs {
    /// Profile config: a path or inline JSON such as {"profile": "log", "eta": 1, "x_ref": 1}.
    #[arg(long)]
    pub profile: Option<String>,
    /// Shorthand for a linear profile with this slope.
    #[arg(long, conflicts_with_all = ["profile", "eta"])]
    pub alpha: Option<f64>,
    /// Shorthand for a log profile with this coefficient.
    #[arg(long, conflicts_with = "profile")]
    pub eta: Option<f64>,
    /// Reference point where the profile vanishes (defaults: 0 linear, 1 log).
    #[arg(long)]
    pub x_ref: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LawArgs {
    /// Named law for the liquidated asset.
    #[arg(long, value_enum)]
    pub law: Option<LawName>,
    /// Extra law parameters as key=value pairs, e.g. lambda=2,p=0.3.
    #[arg(long, value_delimiter = ',')]
    pub params: Vec<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Location (normal mean, or lognormal log-mean).
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Variance (normal), or variance of the logarithm (lognormal).
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub support: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LawName {
    Normal,
    Lognormal,
    Gamma,
    Poisson,
    Bernoulli,
    Discrete,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PriceArgs {
    /// Scenario file (JSON with weights and named variables).
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Variable holding aggregate wealth.
    #[arg(long, default_value = "X")]
    pub x: String,
    /// Variable holding the liquidated claim.
    #[arg(long, default_value = "Z")]
    pub z: String,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Grid points of the root scan.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Bisection tolerance, relative to max(1, |upper|).
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Where the wealth and the asset come from.
#[derive(Debug, Clone, Args, Serialize)]
pub struct AssetArgs {
    /// Scenario file; otherwise the asset follows --law and wealth is --wealth.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    /// Wealth variable in the scenario file.
    #[arg(long, default_value = "X")]
    pub x: String,
    /// Constant aggregate wealth when no scenario file is given.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub wealth: f64,
    #[command(flatten)]
    pub law: LawArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DemandArgs {
    #[command(flatten)]
    pub asset: AssetArgs,
    /// Asset variable in the scenario file.
    #[arg(long, default_value = "q")]
    pub q: String,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Quantities as start:end:count or a comma-separated list.
    #[arg(long, default_value = "0:5:51")]
    pub s_grid: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrossImpactArgs {
    #[command(flatten)]
    pub asset: AssetArgs,
    /// The two asset variables in the scenario file.
    #[arg(long, value_delimiter = ',', default_value = "q1,q2")]
    pub q: Vec<String>,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value = "0:5:11")]
    pub s1_grid: String,
    #[arg(long, default_value = "0:5:11")]
    pub s2_grid: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LiquidityArgs {
    #[command(flatten)]
    pub asset: AssetArgs,
    #[arg(long, default_value = "q")]
    pub q: String,
    #[command(flatten)]
    pub profile: ProfileArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClosedFormArgs {
    #[command(flatten)]
    pub law: LawArgs,
    /// Aggregate exponential risk aversion.
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value = "0:5:51")]
    pub s_grid: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EquilibriumArgs {
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Agent config: a path or inline JSON with an "agents" list.
    #[arg(long)]
    pub agents: String,
    /// Claim variable; overrides "claim" in the agent config.
    #[arg(long)]
    pub z: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Always integrate and shoot, even when allocations are known in closed form.
    #[arg(long)]
    pub force_general: bool,
    /// RK4 steps over the tabulated wealth range.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RuinLimitArgs {
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long, default_value = "X")]
    pub x: String,
    #[arg(long, default_value = "Z")]
    pub z: String,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Survival probabilities, increasing.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.9,0.99,0.999,0.9999,0.99999"
    )]
    pub p: Vec<f64>,
}
