//! `mixkrig` command-line tool.

mod benchmark;
mod commands;
mod error;
mod manifest;
mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixkrig::ego::Criterion;
use mixkrig::sampling::LhsCriterion;
use mixkrig::{CategoricalKernel, ContinuousKernel, HierarchicalKernel};

#[derive(Parser, Debug)]
#[command(name = "mixkrig", version, about = "Kriging surrogates and EGO over mixed hierarchical design spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a design of experiments.
    Sample(SampleArgs),
    /// Train a Kriging model and save it as JSON.
    Fit(FitArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Run repeated EGO benchmarks on a built-in problem.
    Optimize(OptimizeArgs),
    /// Write the design space of a built-in problem as JSON.
    ProblemSpace(ProblemSpaceArgs),
    /// Evaluate a built-in problem on a CSV of points.
    Evaluate(EvaluateArgs),
    /// Propose the next point to evaluate from data gathered so far.
    Ask(AskArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct SpaceSource {
    /// Design-space JSON file.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Built-in problem whose design space to use.
    #[arg(long)]
    problem: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Lhs,
    Random,
    FullFactorial,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    source: SpaceSource,
    #[arg(long, value_enum, default_value = "lhs")]
    method: Method,
    /// LHS optimization criterion (center, maximin, centermaximin, correlation, ese).
    #[arg(long, value_parser = parse_lhs)]
    criterion: Option<LhsCriterion>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Split the points evenly over the levels of this meta variable.
    #[arg(long)]
    stratify_by: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct KernelArgs {
    #[arg(long, value_parser = parse_corr, default_value = "squar_exp")]
    corr: ContinuousKernel,
    #[arg(long, value_parser = parse_cat, default_value = "CONT_RELAX")]
    cat_kernel: CategoricalKernel,
    #[arg(long, value_parser = parse_hier, default_value = "ALG_KERNEL")]
    hier_kernel: HierarchicalKernel,
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    /// Likelihood optimization starts.
    #[arg(long, default_value_t = 10)]
    n_starts: usize,
    /// Likelihood evaluations per start.
    #[arg(long, default_value_t = 200)]
    max_evals: usize,
    #[arg(long, default_value_t = mixkrig::kriging::DEFAULT_NUGGET)]
    nugget: f64,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    source: SpaceSource,
    /// Training inputs, one column per variable.
    #[arg(long)]
    doe: PathBuf,
    /// Training outputs, a single column.
    #[arg(long)]
    y: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Add a variance column.
    #[arg(long)]
    variances: bool,
    /// Add mean and variance derivative columns for every float variable.
    #[arg(long)]
    derivatives: bool,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, value_parser = parse_criterion, default_value = "EI")]
    criterion: Criterion,
    #[arg(long)]
    doe_size: usize,
    #[arg(long, default_value_t = 20)]
    n_iter: usize,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_corr, default_value = "squar_exp")]
    corr: ContinuousKernel,
    /// Comma-separated categorical kernels, one variant each.
    #[arg(long, value_parser = parse_cat, value_delimiter = ',', default_value = "CONT_RELAX")]
    cat_kernel: Vec<CategoricalKernel>,
    /// Comma-separated hierarchical kernels, one variant each.
    #[arg(long, value_parser = parse_hier, value_delimiter = ',', default_value = "ALG_KERNEL")]
    hier_kernel: Vec<HierarchicalKernel>,
    /// Also run the random-search baseline.
    #[arg(long)]
    random: bool,
    #[command(flatten)]
    train: TrainArgs,
    /// Candidate points scored per infill proposal.
    #[arg(long, default_value_t = 1000)]
    pool_size: usize,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ProblemSpaceArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AskArgs {
    #[command(flatten)]
    source: SpaceSource,
    #[arg(long)]
    doe: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, value_parser = parse_criterion, default_value = "EI")]
    criterion: Criterion,
    #[arg(long, default_value_t = 1000)]
    pool_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_lhs(s: &str) -> Result<LhsCriterion, String> {
    s.parse().map_err(|e: mixkrig::Error| e.to_string())
}

fn parse_corr(s: &str) -> Result<ContinuousKernel, String> {
    s.parse().map_err(|e: mixkrig::Error| e.to_string())
}

fn parse_cat(s: &str) -> Result<CategoricalKernel, String> {
    s.parse().map_err(|e: mixkrig::Error| e.to_string())
}

fn parse_hier(s: &str) -> Result<HierarchicalKernel, String> {
    s.parse().map_err(|e: mixkrig::Error| e.to_string())
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: mixkrig::Error| e.to_string())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => commands::sample(a),
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::ProblemSpace(a) => commands::problem_space(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Ask(a) => commands::ask(a),
    };
    if let Err(e) = result {
        eprintln!("mixkrig: {e}");
        std::process::exit(e.exit_code());
    }
}
