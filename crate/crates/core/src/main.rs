use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mwkmeans::data::{self, CsvOptions, SyntheticSpec};
use mwkmeans::engine::{self, RestartReport};
use mwkmeans::experiment::{run_experiment, ExperimentSpec};
use mwkmeans::model::{MwkConfig, RunReportJson};
use mwkmeans::verify;
use mwkmeans::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERIC: u8 = 4;
const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Parser)]
#[command(name = "mwk", version, about = "Minkowski weighted k-means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a CSV dataset and write a JSON report of the best restart.
    Cluster(ClusterArgs),
    /// Generate a Gaussian-mixture dataset with uniform noise features.
    Generate(GenerateArgs),
    /// Run the multi-dataset experiment and write plot tables.
    Experiment(ExperimentArgs),
    /// Check the objective identities, bounds and weight laws on random instances.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = MwkConfig::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    center_tol: f64,
    /// The last CSV column holds integer ground-truth labels (ignored by the algorithm).
    #[arg(long)]
    labels: bool,
    /// Range-normalise features before clustering.
    #[arg(long)]
    normalise: bool,
    /// Print one JSON line per iteration of every restart to stderr.
    #[arg(long)]
    trace: bool,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 1000)]
    n_points: usize,
    #[arg(long, default_value_t = 4)]
    n_informative: usize,
    #[arg(long, default_value_t = 4)]
    n_noise: usize,
    #[arg(long, default_value_t = 3)]
    k_true: usize,
    #[arg(long, default_value_t = 1.0)]
    cluster_std: f64,
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    center_min: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    center_max: f64,
}

impl SyntheticArgs {
    fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_points: self.n_points,
            n_informative: self.n_informative,
            n_noise: self.n_noise,
            k_true: self.k_true,
            seed,
            cluster_std: self.cluster_std,
            center_box: (self.center_min, self.center_max),
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write range-normalised values (and a `.stats.json` sidecar).
    #[arg(long)]
    normalise: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [1.1, 1.5, 2.0, 5.0])]
    p_values: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    n_datasets: usize,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Clusters requested; defaults to --k-true.
    #[arg(long)]
    k: Option<usize>,
    /// Seed of dataset 0; dataset d uses data-seed + d.
    #[arg(long, default_value_t = 1)]
    data_seed: u64,
    /// Base seed for centroid initialisation.
    #[arg(long, default_value_t = MwkConfig::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    center_tol: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::InvalidConfig(_)
        | Error::InvalidSpec(_)
        | Error::InvalidC(_)
        | Error::InvalidM(_)
        | Error::DimensionMismatch(_) => EXIT_USAGE,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::EmptyMatrix
        | Error::RaggedRows { .. }
        | Error::NonFinite { .. } => EXIT_IO,
        Error::BoundViolation { .. }
        | Error::NonpositiveDispersion(_)
        | Error::NonpositiveValue(_)
        | Error::EmptyCluster(_)
        | Error::ConstantFeature(_)
        | Error::Context { .. } => EXIT_NUMERIC,
    }
}

fn write_json(value: &impl Serialize, path: Option<&Path>) -> mwkmeans::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialises");
    text.push('\n');
    match path {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_error(path, e))?;
            let mut w = BufWriter::new(file);
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| io_error(path, e))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_error("<stdout>", e)),
    }
}

fn io_error(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
    Error::Io {
        path: path.into(),
        source,
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

#[derive(Serialize)]
struct RestartSummary {
    seed: u64,
    objective: f64,
    normalised_objective: Option<f64>,
    iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct ClusterOutput {
    input: PathBuf,
    feature_names: Option<Vec<String>>,
    best_index: usize,
    best: RunReportJson,
    restarts: Vec<RestartSummary>,
}

fn cmd_cluster(args: ClusterArgs) -> mwkmeans::Result<()> {
    let dataset = data::load_csv(
        &args.input,
        CsvOptions {
            labels_column: args.labels,
        },
    )?;
    let dataset = if args.normalise {
        data::range_normalise(&dataset)?.0
    } else {
        dataset
    };
    let config = MwkConfig {
        k: usize::try_from(args.k).unwrap_or(usize::MAX),
        p: args.p,
        tol_objective: args.tol,
        max_iter: args.max_iter,
        center_tol: args.center_tol,
        seed: args.seed,
        restarts: args.restarts,
    };
    config.validate(dataset.n())?;

    let report = if args.trace {
        let mut all = Vec::with_capacity(config.restarts);
        for r in 0..config.restarts {
            let cfg = config.clone().with_seed(config.seed.wrapping_add(r as u64));
            all.push(engine::run_observed(&dataset, &cfg, &mut |e| {
                eprintln!("{}", serde_json::json!({ "restart": r, "event": e }));
            })?);
        }
        let best_index = (0..all.len()).fold(0, |b, i| {
            if all[i].final_state.objective < all[b].final_state.objective {
                i
            } else {
                b
            }
        });
        RestartReport { best_index, all }
    } else {
        engine::run_restarts(&dataset, &config)?
    };

    let output = ClusterOutput {
        input: args.input.clone(),
        feature_names: dataset.feature_names.clone(),
        best_index: report.best_index,
        best: report.best().to_json(),
        restarts: report
            .all
            .iter()
            .map(|r| RestartSummary {
                seed: r.seed,
                objective: r.final_state.objective,
                normalised_objective: r.normalised_objective,
                iterations: r.iterations,
                converged: r.converged,
            })
            .collect(),
    };
    write_json(&output, args.out.as_deref())
}

fn cmd_generate(args: GenerateArgs) -> mwkmeans::Result<()> {
    let spec = args.synthetic.spec(args.seed);
    let (dataset, _) = data::generate(&spec)?;
    let dataset = if args.normalise {
        let (normalised, stats) = data::range_normalise(&dataset)?;
        data::save_stats_json(&stats, &sidecar(&args.out, ".stats.json"))?;
        normalised
    } else {
        dataset
    };
    data::save_csv(&dataset, &args.out)?;
    write_json(&spec, Some(&sidecar(&args.out, ".spec.json")))
}

fn cmd_experiment(args: ExperimentArgs) -> mwkmeans::Result<()> {
    let spec = ExperimentSpec {
        k: args.k.unwrap_or(args.synthetic.k_true),
        dataset_spec: args.synthetic.spec(args.data_seed),
        p_values: args.p_values,
        n_datasets: args.n_datasets,
        restarts_per_dataset: args.restarts,
        seed: args.seed,
        tol_objective: args.tol,
        max_iter: args.max_iter,
        center_tol: args.center_tol,
    };
    let result = run_experiment(&spec)?;
    result.write_outputs(&args.out_dir)?;
    write_json(&spec, Some(&args.out_dir.join("experiment_spec.json")))?;

    println!(
        "{:>8}  {:>5}  {:>10}  {:>10}  {:>10}  {:>10}",
        "p", "runs", "mean norm", "min norm", "max norm", "noise/inf"
    );
    for s in result.summary().per_p {
        println!(
            "{:>8}  {:>5}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}",
            s.p,
            s.runs,
            s.mean_normalised_objective,
            s.min_normalised_objective,
            s.max_normalised_objective,
            s.mean_noise_weight / s.mean_informative_weight
        );
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> ExitCode {
    if let Some(name) = &args.inject_fault {
        if !verify::CHECK_NAMES.contains(&name.as_str()) {
            eprintln!("error: unknown check {name:?}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let outcomes = verify::run_checks(args.trials, args.seed, args.inject_fault.as_deref());
    for o in &outcomes {
        println!(
            "{:<4}  {:<22}  {:>6}  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.trials,
            o.detail
        );
    }
    match outcomes.iter().find(|o| !o.passed) {
        Some(o) => {
            eprintln!("check failed: {}", o.name);
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        None => ExitCode::SUCCESS,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cluster(args) => cmd_cluster(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Verify(args) => return cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
