//! Repeated EGO / random-search runs and their summary statistics.

use std::path::Path;

use mixkrig::ego::{initial_design, optimize, random_search, Criterion, EgoConfig, OptimizationHistory};
use mixkrig::problems::Problem;
use mixkrig::{CategoricalKernel, HierarchicalKernel, KernelConfig, KrigingConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::table::{variable_header, write_table};

#[derive(Debug, Clone, Copy)]
pub enum Variant {
    Ego(KernelConfig),
    Random,
}

impl Variant {
    pub fn name(&self) -> String {
        match self {
            Variant::Ego(k) => format!("{}-{}", k.categorical.name(), k.hierarchical.name().trim_end_matches("_KERNEL")),
            Variant::Random => "random".to_string(),
        }
    }
}

pub struct Plan {
    pub doe_size: usize,
    pub n_iter: usize,
    pub runs: usize,
    pub seed: u64,
    pub criterion: Criterion,
    pub pool_size: usize,
    pub kriging: KrigingConfig,
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn run_once(problem: &Problem, variant: Variant, plan: &Plan, run: usize) -> mixkrig::Result<OptimizationHistory> {
    let seed = plan.seed.wrapping_add(run as u64);
    let (unit, raw) = initial_design(&problem.space, plan.doe_size, seed)?;
    match variant {
        Variant::Random => random_search(problem, &unit, plan.n_iter, seed),
        Variant::Ego(kernel) => {
            let config = EgoConfig {
                n_iter: plan.n_iter,
                criterion: plan.criterion,
                seed,
                candidate_pool_size: plan.pool_size,
                kriging: KrigingConfig { kernel, seed, ..plan.kriging },
                ..EgoConfig::default()
            };
            optimize(problem, &raw, &config)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VariantSummary {
    pub name: String,
    pub categorical_kernel: Option<CategoricalKernel>,
    pub hierarchical_kernel: Option<HierarchicalKernel>,
    pub best_per_run: Vec<f64>,
    pub x_best_per_run: Vec<Vec<String>>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Runs every (variant, run) pair on `jobs` threads and writes per-run
/// histories plus convergence statistics under `out/<variant>/`.
pub fn run_all(
    problem: &Problem,
    variants: &[Variant],
    plan: &Plan,
    jobs: usize,
    out: &Path,
) -> Result<Vec<VariantSummary>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    let tasks: Vec<(usize, usize)> = (0..variants.len()).flat_map(|v| (0..plan.runs).map(move |r| (v, r))).collect();
    let results: Vec<mixkrig::Result<OptimizationHistory>> =
        pool.install(|| tasks.par_iter().map(|&(v, r)| run_once(problem, variants[v], plan, r)).collect());

    let mut histories: Vec<Vec<OptimizationHistory>> = variants.iter().map(|_| Vec::new()).collect();
    for (&(v, r), result) in tasks.iter().zip(results) {
        let history = result.map_err(|e| CliError::Numerical(format!("{} run {r}: {e}", variants[v].name())))?;
        histories[v].push(history);
    }

    let space = &problem.space;
    let mut summaries = Vec::new();
    for (variant, runs) in variants.iter().zip(&histories) {
        let dir = out.join(variant.name());
        let mut header = vec!["iter".to_string()];
        header.extend(variable_header(space));
        header.extend(["y".to_string(), "best".to_string()]);
        for (r, history) in runs.iter().enumerate() {
            let rows: Vec<Vec<String>> = history
                .entries
                .iter()
                .map(|e| {
                    let mut row = vec![e.iter.to_string()];
                    row.extend(space.format_point(&e.x));
                    row.extend([e.y.to_string(), e.best_so_far.to_string()]);
                    row
                })
                .collect();
            write_table(&dir.join(format!("run_{r:03}.csv")), &header, &rows)?;
        }

        let rows: Vec<Vec<String>> = (0..=plan.n_iter)
            .map(|k| {
                let at: Vec<f64> = runs.iter().filter_map(|h| h.best_after(k)).collect();
                vec![
                    k.to_string(),
                    quantile(&at, 0.5).to_string(),
                    quantile(&at, 0.25).to_string(),
                    quantile(&at, 0.75).to_string(),
                ]
            })
            .collect();
        let conv_header = ["iter", "median", "q1", "q3"].map(String::from);
        write_table(&dir.join("convergence.csv"), &conv_header, &rows)?;

        let best: Vec<f64> = runs.iter().filter_map(|h| h.y_opt()).collect();
        let (categorical_kernel, hierarchical_kernel) = match variant {
            Variant::Ego(k) => (Some(k.categorical), Some(k.hierarchical)),
            Variant::Random => (None, None),
        };
        summaries.push(VariantSummary {
            name: variant.name(),
            categorical_kernel,
            hierarchical_kernel,
            x_best_per_run: runs.iter().filter_map(|h| h.x_opt()).map(|x| space.format_point(x)).collect(),
            median: quantile(&best, 0.5),
            q1: quantile(&best, 0.25),
            q3: quantile(&best, 0.75),
            best_per_run: best,
        });
    }
    Ok(summaries)
}
