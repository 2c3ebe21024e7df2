//! Command-line front end: train one model, run a benchmark configuration, or
//! turn a results file into performance-profile data.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cardsvm::bench::{
    append_records, performance_profiles, read_records, run_algorithm, run_experiment, write_boxplot_csv,
    write_profile_csv, Algorithm, ExperimentConfig, RunRecord, SearchSettings,
};
use cardsvm::dataset::{csv_label_values, load_csv, load_sparse, subsample, train_test_split, Standardizer};
use cardsvm::local_search::initial_mask;
use cardsvm::minlp::{binomial, half_features, BRUTE_FORCE_BUDGET};
use cardsvm::svm::accuracy;
use cardsvm::{Dataset, Error, KernelSpec, ProblemSpec, SvmModel};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const RESULTS_FILE: &str = "results.jsonl";

#[derive(Parser)]
#[command(name = "cardsvm", version, about = "Feature selection inside nonlinear SVMs under a cardinality budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Select features and train a classifier on one dataset.
    Train(TrainArgs),
    /// Run every combination in an experiment config and record the results.
    Bench(BenchArgs),
    /// Compute performance profiles from a results file.
    Profile(ProfileArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Sparse,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Poly,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    #[value(name = "ls")]
    Ls,
    #[value(name = "ls_star")]
    LsStar,
    #[value(name = "dec_sub_light")]
    DecSubLight,
    #[value(name = "rfe1")]
    Rfe1,
    #[value(name = "rfe2")]
    Rfe2,
    #[value(name = "naive")]
    Naive,
    #[value(name = "brute_force")]
    BruteForce,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Ls => Algorithm::Ls,
            Algo::LsStar => Algorithm::LsStar,
            Algo::DecSubLight => Algorithm::DecSubLight,
            Algo::Rfe1 => Algorithm::Rfe1,
            Algo::Rfe2 => Algorithm::Rfe2,
            Algo::Naive => Algorithm::NaiveAlt,
            Algo::BruteForce => Algorithm::BruteForce,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Data file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Label column of a CSV file.
    #[arg(long = "label-col", default_value = "label")]
    label_col: String,
    /// CSV label value mapped to +1; defaults to the larger of the two values.
    #[arg(long = "positive-label")]
    positive_label: Option<String>,
    /// Feature count of a sparse file; defaults to the largest index seen.
    #[arg(long = "n-features")]
    n_features: Option<usize>,
    #[arg(long, value_enum, default_value_t = Algo::LsStar)]
    algo: Algo,
    #[arg(long, value_enum, default_value_t = KernelKind::Poly)]
    kernel: KernelKind,
    #[arg(long, default_value_t = 2)]
    degree: u32,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// Additive constant of the polynomial kernel.
    #[arg(long = "c", default_value_t = 1.0)]
    offset: f64,
    /// Misclassification cost.
    #[arg(long = "C", default_value_t = 10.0)]
    cost: f64,
    /// Number of features to keep; defaults to half of them.
    #[arg(long = "B")]
    budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random masks drawn per diversification round.
    #[arg(long)]
    samples: Option<usize>,
    /// Candidate masks solved per decomposition round.
    #[arg(long)]
    pool: Option<usize>,
    /// Rounds without improvement before a search stops.
    #[arg(long = "opt-window")]
    opt_window: Option<usize>,
    /// Largest number of swapped pairs in a diversification move.
    #[arg(long)]
    p: Option<usize>,
    /// Directory for model.json and the results files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fraction of samples held out for testing.
    #[arg(long = "test-split")]
    test_split: Option<f64>,
    /// Keep raw feature values instead of z-scores.
    #[arg(long = "no-standardize")]
    no_standardize: bool,
    /// Stratified subsample of this many rows before anything else.
    #[arg(long)]
    subsample: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config (JSON). Relative dataset paths resolve against its directory.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; results are appended to results.jsonl there.
    #[arg(long)]
    out: PathBuf,
    /// Runs executed concurrently.
    #[arg(long = "parallel-runs", default_value_t = 1)]
    parallel_runs: usize,
}

#[derive(Args)]
struct ProfileArgs {
    /// Results file written by `bench` or `train`.
    #[arg(long)]
    results: PathBuf,
    /// Output directory for profile.csv and boxplot.csv.
    #[arg(long)]
    out: PathBuf,
}

/// Message plus exit code: 2 for usage and configuration errors, 1 otherwise.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Config { .. }) { 2 } else { 1 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train(a) => train(a),
        Command::Bench(a) => bench(a),
        Command::Profile(a) => profile(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(a: &TrainArgs) -> CliResult<Dataset> {
    let d = match a.format {
        Format::Csv => {
            let positive = match &a.positive_label {
                Some(l) => l.clone(),
                None => csv_label_values(&a.data, &a.label_col)?
                    .pop()
                    .ok_or_else(|| Failure::usage(format!("column `{}` has no labels", a.label_col)))?,
            };
            load_csv(&a.data, &a.label_col, &positive)?
        }
        Format::Sparse => load_sparse(&a.data, a.n_features)?,
    };
    Ok(match a.subsample {
        Some(m) => subsample(&d, m, a.seed)?,
        None => d,
    })
}

fn search_settings(a: &TrainArgs, algorithm: Algorithm) -> CliResult<SearchSettings> {
    let mut s = SearchSettings::default();
    if let Some(v) = a.samples {
        s.samples_per_round = v;
    }
    if let Some(v) = a.pool {
        s.pool_size = v;
    }
    if let Some(v) = a.opt_window {
        s.ls_star_window = v;
        s.dec_sub_window = v;
    }
    s.p = a.p;
    s.ls_config(algorithm, a.seed).validate().map_err(|e| match e {
        Error::Config { field, message } => Failure::usage(format!("--{}: {message}", flag_name(&field))),
        other => other.into(),
    })?;
    Ok(s)
}

fn flag_name(field: &str) -> &str {
    match field {
        "samples_per_round" => "samples",
        "pool_size" => "pool",
        "stall_window" => "opt-window",
        other => other,
    }
}

#[derive(Serialize)]
struct ModelFile<'a> {
    algorithm: Algorithm,
    dual_objective: f64,
    selected_features: Vec<&'a str>,
    feature_names: &'a [String],
    /// Applied to raw inputs before the model sees them.
    standardizer: Option<&'a Standardizer>,
    model: &'a SvmModel,
}

fn train(a: &TrainArgs) -> CliResult<()> {
    let algorithm = Algorithm::from(a.algo);
    let kernel = match a.kernel {
        KernelKind::Poly => KernelSpec::polynomial(a.gamma, a.offset, a.degree),
        KernelKind::Gaussian => KernelSpec::gaussian(a.gamma),
    }
    .map_err(Failure::usage)?;
    if !kernel.is_polynomial() && matches!(algorithm, Algorithm::DecSubLight | Algorithm::NaiveAlt) {
        return Err(Failure::usage(
            "decomposition requires a polynomial kernel; use ls_star for other kernels",
        ));
    }
    if a.test_split.is_some_and(|f| !(f > 0.0 && f < 1.0)) {
        return Err(Failure::usage("--test-split must lie strictly between 0 and 1"));
    }
    if !(a.cost > 0.0 && a.cost.is_finite()) {
        return Err(Failure::usage("--C must be positive and finite"));
    }

    let raw = load(a)?;
    let (train_raw, test_raw) = match a.test_split {
        Some(f) => {
            let (tr, te) = train_test_split(&raw, f, a.seed)?;
            (tr, Some(te))
        }
        None => (raw, None),
    };
    let standardizer = (!a.no_standardize).then(|| Standardizer::fit(&train_raw));
    let prepare = |d: Dataset| -> CliResult<Dataset> {
        Ok(match &standardizer {
            Some(s) => s.transform(&d)?,
            None => d,
        })
    };
    let train = prepare(train_raw)?;
    let test = test_raw.map(prepare).transpose()?;

    let n = train.n_features();
    let budget = a.budget.unwrap_or_else(|| half_features(n));
    if budget == 0 || budget > n {
        return Err(Failure::usage(format!("--B must lie in 1..={n}, got {budget}")));
    }
    if algorithm == Algorithm::BruteForce && binomial(n, budget) > u128::from(BRUTE_FORCE_BUDGET) {
        return Err(Failure::usage(format!(
            "brute force would enumerate C({n}, {budget}) = {} masks, over the budget of {BRUTE_FORCE_BUDGET}",
            binomial(n, budget)
        )));
    }
    let settings = search_settings(a, algorithm)?;
    let p = ProblemSpec::new(train.clone(), kernel, a.cost, budget)?;
    let start = initial_mask(n, budget, a.seed)?;

    let clock = Instant::now();
    let inc = run_algorithm(algorithm, &p, &start, &settings, a.seed)?;
    let wall_seconds = clock.elapsed().as_secs_f64();
    let model = SvmModel::from_solution(&train, kernel, inc.mask.clone(), &inc.alpha, a.cost)?;

    let names: Vec<&str> = inc.mask.selected().iter().map(|&j| train.feature_names()[j].as_str()).collect();
    println!("algorithm: {algorithm}");
    println!("selected features ({}): {}", names.len(), names.join(", "));
    println!("dual objective: {:.6}", inc.ub);
    println!("train accuracy: {:.4}", accuracy(&model, &train)?);
    if let Some(t) = &test {
        println!("test accuracy: {:.4}", accuracy(&model, t)?);
    }
    println!("seconds: {wall_seconds:.3}");

    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(Error::from)?;
        let file = ModelFile {
            algorithm,
            dual_objective: inc.ub,
            selected_features: names,
            feature_names: train.feature_names(),
            standardizer: standardizer.as_ref(),
            model: &model,
        };
        fs::write(dir.join("model.json"), serde_json::to_string_pretty(&file).map_err(Error::from)?)
            .map_err(Error::from)?;
        let record = RunRecord {
            dataset_id: train.source_id().to_string(),
            algorithm,
            kernel,
            budget,
            cost: a.cost,
            seed: a.seed,
            ub: inc.ub,
            wall_seconds,
            converged: inc.alpha.converged,
            mask: inc.mask,
        };
        write_results(dir, &[record])?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

/// Appends to the results file and rewrites the box-plot table from all of it.
fn write_results(dir: &Path, records: &[RunRecord]) -> CliResult<()> {
    let results = dir.join(RESULTS_FILE);
    append_records(&results, records)?;
    write_boxplot_csv(dir.join("boxplot.csv"), &read_records(&results)?)?;
    Ok(())
}

fn bench(a: &BenchArgs) -> CliResult<()> {
    if a.parallel_runs == 0 {
        return Err(Failure::usage("--parallel-runs must be at least 1"));
    }
    let cfg = ExperimentConfig::from_file(&a.config).map_err(|e| match e {
        Error::Io(_) => Failure::from(e),
        other => Failure::usage(format!("{}: {other}", a.config.display())),
    })?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let datasets = cfg.load_datasets(base)?;
    let records = run_experiment(&cfg, &datasets, a.parallel_runs)?;
    fs::create_dir_all(&a.out).map_err(Error::from)?;
    write_results(&a.out, &records)?;

    let mut best: BTreeMap<(&str, Algorithm), (f64, f64, usize)> = BTreeMap::new();
    for r in &records {
        let e = best.entry((&r.dataset_id, r.algorithm)).or_insert((f64::INFINITY, 0.0, 0));
        e.0 = e.0.min(r.ub);
        e.1 += r.wall_seconds;
        e.2 += 1;
    }
    println!("{:<20} {:<14} {:>16} {:>12}", "dataset", "algorithm", "best ub", "mean s");
    for ((d, alg), (ub, secs, count)) in best {
        println!("{d:<20} {:<14} {ub:>16.6} {:>12.3}", alg.name(), secs / count as f64);
    }
    println!("{} runs appended to {}", records.len(), a.out.join(RESULTS_FILE).display());
    Ok(())
}

fn profile(a: &ProfileArgs) -> CliResult<()> {
    let records = read_records(&a.results)?;
    let prof = performance_profiles(&records)?;
    fs::create_dir_all(&a.out).map_err(Error::from)?;
    write_profile_csv(a.out.join("profile.csv"), &prof)?;
    write_boxplot_csv(a.out.join("boxplot.csv"), &records)?;
    println!("{} instances, {} algorithms", prof.instances.len(), prof.algorithms.len());
    for (alg, row) in prof.algorithms.iter().zip(&prof.eta) {
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        println!("{:<14} mean eta {mean:.4}", alg.name());
    }
    println!("wrote {}", a.out.join("profile.csv").display());
    Ok(())
}
