//! `ifl`: learn error-representation features and evaluate classifiers on
//! them. Subcommands: `augment`, `evaluate`, `reproduce`, `bench`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ifl_core::config::RunConfig;
use ifl_core::dataset::{stratified_sample, Dataset};
use ifl_core::engine::{learn_test_features, learn_train_features, Strategy};
use ifl_core::eval::cross_validate;
use ifl_core::report::reproduce;
use ifl_core::{IflError, Result};

#[derive(Parser)]
#[command(
    name = "ifl",
    version,
    about = "Error-representation feature learning: describe each instance by \
             how much every class's cluster structure must move to absorb it.",
    propagate_version = true
)]
struct Cli {
    /// Seed for every stochastic step (splits, clustering, trials).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads; 0 means one per core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a CSV with the learned feature columns appended.
    Augment(AugmentArgs),
    /// Cross-validate one dataset under one config and print the scores.
    Evaluate(EvaluateArgs),
    /// Evaluate every config in a directory against reference scores.
    Reproduce(ReproduceArgs),
    /// Time feature learning at two input sizes to check scaling.
    Bench(BenchArgs),
}

#[derive(Args)]
struct AugmentArgs {
    /// Run config (TOML); must contain an [ifl] section.
    #[arg(long)]
    config: PathBuf,

    /// Training CSV. Defaults to the config's data path, resolved against
    /// $IFL_DATA_DIR when set, else the config file's directory.
    #[arg(long)]
    data: Option<PathBuf>,

    /// Output path for the augmented training CSV.
    #[arg(long)]
    out: PathBuf,

    /// Unseen rows to project through structures built from the full
    /// training data (same CSV dialect as --data).
    #[arg(long, requires = "test_out")]
    test: Option<PathBuf>,

    /// Output path for the augmented test CSV.
    #[arg(long, requires = "test")]
    test_out: Option<PathBuf>,

    /// Insertion strategy override: 1 = nearest cluster, 2 = re-cluster.
    #[arg(long)]
    strategy: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run config (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Dataset CSV override.
    #[arg(long)]
    data: Option<PathBuf>,

    /// Write the full result (per-fold predictions included) as JSON.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Outer fold count override.
    #[arg(long)]
    folds: Option<usize>,

    /// Per-fold standardization override.
    #[arg(long)]
    normalize: Option<bool>,

    /// Ignore the [ifl] section and classify the raw columns.
    #[arg(long)]
    baseline: bool,

    /// Insertion strategy override: 1 = nearest cluster, 2 = re-cluster.
    #[arg(long)]
    strategy: Option<u64>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Directory of run configs (every *.toml is evaluated).
    #[arg(long)]
    configs: PathBuf,

    /// Directory the configs' data paths resolve against. Defaults to
    /// $IFL_DATA_DIR, then ./data.
    #[arg(long)]
    data_dir: Option<PathBuf>,

    /// Write the report as markdown here.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write the report as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Run config (TOML); must contain an [ifl] section.
    #[arg(long)]
    config: PathBuf,

    /// Dataset CSV override.
    #[arg(long)]
    data: Option<PathBuf>,

    /// Base sample size; the run also times a sample twice this large.
    #[arg(long)]
    rows: usize,

    /// Timed repetitions per size.
    #[arg(long, default_value_t = 3)]
    runs: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IFL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// 1 for problems in the inputs, 2 for failures of the run itself.
fn exit_code_for(e: &IflError) -> u8 {
    match e {
        IflError::MalformedInput { .. }
        | IflError::Validation(_)
        | IflError::InvalidParameter(_)
        | IflError::Config { .. } => 1,
        IflError::Io(_) | IflError::Serialization(_) => 2,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Augment(args) => run_augment(args, cli.seed),
        Command::Evaluate(args) => run_evaluate(args, cli.seed),
        Command::Reproduce(args) => run_reproduce(args, cli.seed),
        Command::Bench(args) => run_bench(args, cli.seed),
    }
}

/// The CSV named by --data, or the config's data path resolved against
/// $IFL_DATA_DIR when set, else against the config file's directory.
fn resolve_data(cfg: &RunConfig, config_path: &Path, data: Option<PathBuf>) -> PathBuf {
    data.unwrap_or_else(|| {
        let dir = std::env::var_os("IFL_DATA_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| {
                config_path
                    .parent()
                    .unwrap_or_else(|| Path::new("."))
                    .to_path_buf()
            });
        cfg.data_path(&dir)
    })
}

fn override_strategy(
    cfg: Option<ifl_core::engine::IflConfig>,
    strategy: Option<u64>,
) -> Result<Option<ifl_core::engine::IflConfig>> {
    match (cfg, strategy) {
        (Some(mut cfg), Some(n)) => {
            cfg.strategy = Strategy::from_number(n)?;
            Ok(Some(cfg))
        }
        (cfg, _) => Ok(cfg),
    }
}

fn run_augment(args: AugmentArgs, seed: u64) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let ifl = override_strategy(cfg.ifl_config(seed)?, args.strategy)?.ok_or_else(|| {
        IflError::invalid_parameter(format!(
            "config {} has no [ifl] section; nothing to augment with",
            args.config.display()
        ))
    })?;
    let data_path = resolve_data(&cfg, &args.config, args.data);
    let opts = cfg.csv_options()?;
    let train = Dataset::from_csv_path(&data_path, &opts)?;

    let augmented = learn_train_features(&train, &ifl)?;
    augmented.to_csv_path(&args.out)?;
    println!(
        "augmented {}: {} rows, {} -> {} columns -> {}",
        train.name(),
        train.n(),
        train.h(),
        augmented.h(),
        args.out.display()
    );

    if let (Some(test_path), Some(test_out)) = (&args.test, &args.test_out) {
        let test = Dataset::from_csv_path(test_path, &opts)?;
        let projected = learn_test_features(&train, test.features(), &ifl)?;
        let projected = Dataset::new(
            test.name().to_string(),
            projected,
            test.labels().to_vec(),
            test.label_names().to_vec(),
            augmented.header().cloned(),
        )?;
        projected.to_csv_path(test_out)?;
        println!(
            "projected {}: {} rows -> {}",
            test.name(),
            projected.n(),
            test_out.display()
        );
    }
    Ok(())
}

fn run_evaluate(args: EvaluateArgs, seed: u64) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let ifl = if args.baseline {
        None
    } else {
        override_strategy(cfg.ifl_config(seed)?, args.strategy)?
    };
    let data_path = resolve_data(&cfg, &args.config, args.data);
    let ds = Dataset::from_csv_path(&data_path, &cfg.csv_options()?)?;
    let clf = cfg.classifier_config()?;
    let folds = args.folds.unwrap_or(cfg.eval.folds);
    let normalize = args.normalize.unwrap_or(cfg.eval.normalize);

    let result = cross_validate(&ds, ifl.as_ref(), &clf, folds, seed, normalize)?;

    println!(
        "dataset   {} (n={}, h={}, m={})",
        result.dataset, result.n, result.h, result.m
    );
    println!(
        "method    {} ({} folds, seed {}{})",
        result.method,
        result.folds,
        result.seed,
        if result.normalize {
            ", standardized"
        } else {
            ""
        }
    );
    if !result.skipped_folds.is_empty() {
        println!("skipped   folds {:?}", result.skipped_folds);
    }
    println!("accuracy  {:.4}", result.accuracy);
    println!("macro-F1  {:.4}", result.macro_f1);
    println!("wall      {:.2}s", result.wall_time_seconds);

    if let Some(out) = &args.out {
        std::fs::write(out, result.to_json_string()?)?;
        println!("results   {}", out.display());
    }
    Ok(())
}

fn run_reproduce(args: ReproduceArgs, seed: u64) -> Result<()> {
    let data_dir = args
        .data_dir
        .or_else(|| std::env::var_os("IFL_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"));
    let report = reproduce(&args.configs, &data_dir, seed)?;

    for ds in &report.datasets {
        match ds.methods.last() {
            Some(row) => {
                let reference = match row.deltas() {
                    Some([_, da]) => {
                        format!(" (reference {:.4}, {:+.4})", row.reference.unwrap()[1], da)
                    }
                    None => String::new(),
                };
                println!(
                    "{}: {} accuracy {:.4}{reference}",
                    ds.name, row.method, row.accuracy
                );
            }
            None => {
                let note = ds.notes.first().map(String::as_str).unwrap_or("skipped");
                println!("{}: {note}", ds.name);
            }
        }
    }
    println!(
        "{} dataset(s), total wall time {:.2}s",
        report.datasets.len(),
        report.wall_time_seconds
    );

    if let Some(out) = &args.out {
        std::fs::write(out, report.render_markdown())?;
        println!("markdown  {}", out.display());
    }
    if let Some(json) = &args.json {
        std::fs::write(json, report.to_json_string()?)?;
        println!("json      {}", json.display());
    }
    Ok(())
}

fn run_bench(args: BenchArgs, seed: u64) -> Result<()> {
    if args.runs == 0 {
        return Err(IflError::invalid_parameter("runs must be >= 1"));
    }
    let cfg = RunConfig::load(&args.config)?;
    let ifl = cfg.ifl_config(seed)?.ok_or_else(|| {
        IflError::invalid_parameter(format!(
            "config {} has no [ifl] section; nothing to time",
            args.config.display()
        ))
    })?;
    let data_path = resolve_data(&cfg, &args.config, args.data);
    let ds = Dataset::from_csv_path(&data_path, &cfg.csv_options()?)?;

    let mut means = Vec::new();
    for (label, size) in [("n", args.rows), ("2n", args.rows * 2)] {
        let sample = stratified_sample(&ds, size, seed)?;
        let subset = ds.subset(&sample)?;
        // One untimed pass warms caches and the thread pool.
        learn_train_features(&subset, &ifl)?;
        let mut total = 0.0;
        for _ in 0..args.runs {
            let start = Instant::now();
            let augmented = learn_train_features(&subset, &ifl)?;
            total += start.elapsed().as_secs_f64();
            // Keep the result alive so the work cannot be optimized out.
            std::hint::black_box(augmented.h());
        }
        let mean = total / args.runs as f64;
        println!(
            "{label:>3} = {size} rows: mean {mean:.3}s over {} run(s)",
            args.runs
        );
        means.push(mean);
    }
    println!("ratio t(2n)/t(n) = {:.3}", means[1] / means[0]);
    Ok(())
}
