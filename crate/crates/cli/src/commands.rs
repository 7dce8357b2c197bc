use std::path::Path;

use mixkrig::ego::{propose_next, EgoConfig};
use mixkrig::problems::problem_by_name;
use mixkrig::sampling::{sample_valid, sample_valid_per_meta_level, SamplerConfig, SamplingMethod};
use mixkrig::{DesignSpace, KernelConfig, KrigingConfig, KrigingModel, VariableKind};
use serde_json::json;

use crate::benchmark::{run_all, Plan, Variant};
use crate::error::{io_error, CliError};
use crate::manifest::{sidecar, ManifestBuilder, FORMAT_VERSION};
use crate::table::{read_column, read_points, write_column, write_points, write_table};
use crate::{
    AskArgs, EvaluateArgs, FitArgs, KernelArgs, Method, OptimizeArgs, PredictArgs, ProblemSpaceArgs, SampleArgs,
    SpaceSource, TrainArgs,
};

fn load_space(source: &SpaceSource) -> Result<(DesignSpace, String), CliError> {
    match (&source.space, &source.problem) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let space = DesignSpace::from_json(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            Ok((space, path.display().to_string()))
        }
        (None, Some(name)) => Ok((problem_by_name(name)?.space, format!("problem:{name}"))),
        (None, None) => Err(CliError::Usage("either --space or --problem is required".into())),
    }
}

fn kriging_config(kernel: &KernelArgs, train: &TrainArgs, seed: u64) -> KrigingConfig {
    KrigingConfig {
        kernel: KernelConfig::new(kernel.corr, kernel.cat_kernel, kernel.hier_kernel),
        nugget: train.nugget,
        n_starts: train.n_starts,
        max_evals: train.max_evals,
        seed,
    }
}

fn load_training(space: &DesignSpace, doe: &Path, y: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>), CliError> {
    let x = read_points(space, doe)?;
    let y_values = read_column(y)?;
    if x.len() != y_values.len() {
        return Err(CliError::Usage(format!(
            "{} has {} rows but {} has {}",
            doe.display(),
            x.len(),
            y.display(),
            y_values.len()
        )));
    }
    Ok((x, y_values))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

pub fn sample(args: SampleArgs) -> Result<(), CliError> {
    let manifest = ManifestBuilder::new("sample", Some(args.seed));
    let (space, source) = load_space(&args.source)?;
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let config = SamplerConfig {
        method: match args.method {
            Method::Lhs => SamplingMethod::Lhs,
            Method::Random => SamplingMethod::Random,
            Method::FullFactorial => SamplingMethod::FullFactorial,
        },
        criterion: args.criterion,
        seed: args.seed,
        n_points: args.n,
    };
    let points = match &args.stratify_by {
        Some(name) => {
            let meta = space
                .index_of(name)
                .ok_or_else(|| CliError::Usage(format!("unknown variable '{name}'")))?;
            sample_valid_per_meta_level(&space, &config, meta)?
        }
        None => sample_valid(&space, &config)?,
    };
    let rows: Vec<Vec<f64>> = points.into_iter().map(|p| p.values).collect();
    write_points(&space, &args.out, &rows)?;
    manifest
        .input("space", source)
        .budgets(json!({ "n": args.n, "method": format!("{:?}", args.method), "criterion": args.criterion }))
        .output(&args.out)
        .write(&sidecar(&args.out))
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let manifest = ManifestBuilder::new("fit", Some(args.seed));
    let (space, source) = load_space(&args.source)?;
    let (x, y) = load_training(&space, &args.doe, &args.y)?;
    let config = kriging_config(&args.kernel, &args.train, args.seed);
    let model = KrigingModel::train(&space, config, &x, &y)?;
    let pred = model.predict_values(&x)?;
    let rmse = (pred.iter().zip(&y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    std::fs::write(&args.out, model.to_json()?).map_err(|e| io_error(&args.out, e))?;
    let report = json!({
        "n_train": model.n_train(),
        "n_hyperparameters": model.hyperparameters().len(),
        "hyperparameters": model.hyperparameters(),
        "log_likelihood": model.log_likelihood(),
        "nugget": model.nugget(),
        "train_rmse": rmse,
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?);
    manifest
        .input("space", source)
        .input("doe", args.doe.display())
        .input("y", args.y.display())
        .kernel(config.kernel)
        .budgets(json!({ "n_starts": config.n_starts, "max_evals": config.max_evals, "nugget": config.nugget }))
        .output(&args.out)
        .write(&sidecar(&args.out))
}

pub fn predict(args: PredictArgs) -> Result<(), CliError> {
    let manifest = ManifestBuilder::new("predict", None);
    let text = std::fs::read_to_string(&args.model).map_err(|e| io_error(&args.model, e))?;
    let model =
        KrigingModel::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", args.model.display())))?;
    let space = model.space();
    let x = read_points(space, &args.x)?;

    let mut header = vec!["mean".to_string()];
    let mut columns = vec![model.predict_values(&x)?];
    if args.variances {
        header.push("variance".into());
        columns.push(model.predict_variances(&x)?);
    }
    if args.derivatives {
        for (var, v) in space.variables().iter().enumerate() {
            if !matches!(v.kind, VariableKind::Float { .. }) {
                continue;
            }
            let d = model.predict_derivatives(&x, var)?;
            header.push(format!("d_mean/{}", v.name));
            columns.push(d.iter().map(|p| p.0).collect());
            header.push(format!("d_variance/{}", v.name));
            columns.push(d.iter().map(|p| p.1).collect());
        }
    }
    let rows: Vec<Vec<String>> =
        (0..x.len()).map(|i| columns.iter().map(|c| c[i].to_string()).collect()).collect();
    write_table(&args.out, &header, &rows)?;
    manifest
        .input("model", args.model.display())
        .input("x", args.x.display())
        .kernel(model.config().kernel)
        .output(&args.out)
        .write(&sidecar(&args.out))
}

pub fn optimize(args: OptimizeArgs) -> Result<(), CliError> {
    let manifest = ManifestBuilder::new("optimize", Some(args.seed));
    let problem = problem_by_name(&args.problem)?;
    if args.runs == 0 || args.doe_size == 0 || args.n_iter == 0 || args.jobs == 0 {
        return Err(CliError::Usage("--runs, --doe-size, --n-iter and --jobs must be positive".into()));
    }
    let mut variants = Vec::new();
    for &cat in &args.cat_kernel {
        for &hier in &args.hier_kernel {
            variants.push(Variant::Ego(KernelConfig::new(args.corr, cat, hier)));
        }
    }
    if args.random {
        variants.push(Variant::Random);
    }
    let plan = Plan {
        doe_size: args.doe_size,
        n_iter: args.n_iter,
        runs: args.runs,
        seed: args.seed,
        criterion: args.criterion,
        pool_size: args.pool_size,
        kriging: kriging_config(
            &KernelArgs { corr: args.corr, cat_kernel: args.cat_kernel[0], hier_kernel: args.hier_kernel[0] },
            &args.train,
            args.seed,
        ),
    };
    std::fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let summaries = run_all(&problem, &variants, &plan, args.jobs, &args.out)?;

    let summary = json!({
        "format_version": FORMAT_VERSION,
        "problem": problem.name,
        "criterion": args.criterion,
        "known_optimum": problem.known_optimum.as_ref().map(|o| o.y),
        "variants": summaries,
    });
    let summary_path = args.out.join("summary.json");
    write_json(&summary_path, &summary)?;
    for s in &summaries {
        println!("{:<24} median best {:.6} (q1 {:.6}, q3 {:.6})", s.name, s.median, s.q1, s.q3);
    }

    let kernels: Vec<String> = variants.iter().map(|v| v.name()).collect();
    let mut manifest = manifest
        .input("problem", &args.problem)
        .kernel(json!({ "continuous": args.corr, "variants": kernels }))
        .budgets(json!({
            "doe_size": args.doe_size,
            "n_iter": args.n_iter,
            "runs": args.runs,
            "criterion": args.criterion,
            "pool_size": args.pool_size,
            "n_starts": args.train.n_starts,
            "max_evals": args.train.max_evals,
            "nugget": args.train.nugget,
            "jobs": args.jobs,
        }))
        .output(&summary_path);
    for v in &variants {
        manifest = manifest.output(&args.out.join(v.name()));
    }
    manifest.write(&args.out.join("manifest.json"))
}

pub fn problem_space(args: ProblemSpaceArgs) -> Result<(), CliError> {
    let manifest = ManifestBuilder::new("problem-space", None);
    let problem = problem_by_name(&args.problem)?;
    std::fs::write(&args.out, problem.space.to_json()? + "\n").map_err(|e| io_error(&args.out, e))?;
    manifest
        .input("problem", &args.problem)
        .output(&args.out)
        .write(&sidecar(&args.out))
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let manifest = ManifestBuilder::new("evaluate", None);
    let problem = problem_by_name(&args.problem)?;
    let x = read_points(&problem.space, &args.x)?;
    let y = x.iter().map(|row| problem.evaluate_raw(row)).collect::<mixkrig::Result<Vec<f64>>>()?;
    write_column(&args.out, "y", &y)?;
    manifest
        .input("problem", &args.problem)
        .input("x", args.x.display())
        .output(&args.out)
        .write(&sidecar(&args.out))
}

pub fn ask(args: AskArgs) -> Result<(), CliError> {
    let manifest = ManifestBuilder::new("ask", Some(args.seed));
    let (space, source) = load_space(&args.source)?;
    let (x, y) = load_training(&space, &args.doe, &args.y)?;
    let kriging = kriging_config(&args.kernel, &args.train, args.seed);
    let model = KrigingModel::train(&space, kriging, &x, &y)?;
    let config = EgoConfig {
        criterion: args.criterion,
        seed: args.seed,
        candidate_pool_size: args.pool_size,
        kriging,
        ..EgoConfig::default()
    };
    let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let next = propose_next(&model, &config, y_min, args.seed)?;
    write_points(&space, &args.out, &[next.values])?;
    manifest
        .input("space", source)
        .input("doe", args.doe.display())
        .input("y", args.y.display())
        .kernel(kriging.kernel)
        .budgets(json!({ "criterion": args.criterion, "pool_size": args.pool_size, "n_starts": kriging.n_starts }))
        .output(&args.out)
        .write(&sidecar(&args.out))
}
