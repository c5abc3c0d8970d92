use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use defect_reasoner::defchar::Combination;
use defect_reasoner::pipeline::{
    extract_only, prepare_from_csv, reason_prepared, run_grid, run_pipeline, RunConfig, Stage, StageError,
    TargetOutcome, DEFAULT_GRID,
};
use defect_reasoner::synth::{generate, DetectionRule, SynthConfig};
use defect_reasoner::targets::{IouThreshold, TargetKind};
use defect_reasoner::Error;

/// Explain where a defect detection model fails, by defect characteristics.
#[derive(Parser)]
#[command(name = "defect-reasoner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the 38 characteristics and the target table.
    Extract(DatasetArgs),
    /// Train, analyse and report from previously extracted tables.
    Reason(ReasonArgs),
    /// Learning scores over a grid of tree parameters and characteristic combinations.
    Grid(GridArgs),
    /// Extraction followed by reasoning for every selected target.
    Pipeline(DatasetArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for tree growth, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Targets to reason over (C, D, C', D'); repeatable.
    #[arg(long = "target")]
    targets: Vec<TargetKind>,
    /// Characteristic subset: color, shape, meta, color-shape or all.
    #[arg(long)]
    combination: Option<Combination>,
    /// Number of trees per forest.
    #[arg(long)]
    trees: Option<usize>,
}

#[derive(Args)]
struct DatasetArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory holding the image files.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Ground-truth annotation JSON.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Model prediction JSON.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Minimum IoU for a prediction to match a true defect.
    #[arg(long)]
    iou_threshold: Option<f64>,
}

#[derive(Args)]
struct ReasonArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `defchars_raw.csv` written by `extract`.
    #[arg(long)]
    raw: PathBuf,
    /// `targets.csv` written by `extract`.
    #[arg(long = "targets")]
    targets_csv: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Restrict the grid to these combinations; repeatable.
    #[arg(long = "grid-combination")]
    combinations: Vec<Combination>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 122)]
    images: usize,
    #[arg(long, default_value_t = 3)]
    defects_per_image: usize,
    /// Miss exactly the defects smaller than this many pixels.
    #[arg(long)]
    size_below: Option<usize>,
    /// Otherwise miss defects at random with this probability.
    #[arg(long, default_value_t = 0.3)]
    miss_rate: f64,
}

fn config_error(e: Error) -> StageError {
    StageError {
        stage: Stage::Config,
        source: e,
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, StageError> {
    let mut c = match &common.config {
        Some(path) => RunConfig::load(path).map_err(config_error)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        c.seed = seed;
    }
    if let Some(out) = &common.out {
        c.output_dir = out.clone();
    }
    if !common.targets.is_empty() {
        c.targets = common.targets.clone();
    }
    if let Some(comb) = common.combination {
        c.combination = comb;
    }
    if let Some(n) = common.trees {
        c.forest.n_trees = n;
    }
    Ok(c)
}

fn dataset_config(args: &DatasetArgs) -> Result<RunConfig, StageError> {
    let mut c = load_config(&args.common)?;
    let set = |slot: &mut PathBuf, value: &Option<PathBuf>| {
        if let Some(v) = value {
            *slot = v.clone();
        }
    };
    set(&mut c.images_dir, &args.images);
    set(&mut c.annotations, &args.annotations);
    set(&mut c.predictions, &args.predictions);
    if let Some(t) = args.iou_threshold {
        c.iou_threshold = IouThreshold::new(t).map_err(config_error)?;
    }
    Ok(c)
}

fn set_jobs(jobs: Option<usize>) -> Result<(), StageError> {
    let Some(n) = jobs else { return Ok(()) };
    if n == 0 {
        return Err(config_error(Error::Config("--jobs must be at least 1".into())));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_error(Error::Config(e.to_string())))
}

fn print_outcomes(outcomes: &[TargetOutcome], out: &Path) {
    for t in outcomes {
        let top: Vec<&str> = t.ranking.iter().take(3).map(String::as_str).collect();
        println!("{}: {}", t.target, t.validation_line);
        println!("  top characteristics: {}", top.join(", "));
    }
    println!("results written to {}", out.display());
}

fn run(cli: Cli) -> Result<(), StageError> {
    match cli.command {
        Command::Extract(args) => {
            set_jobs(args.common.jobs)?;
            let c = dataset_config(&args)?;
            let outcome = extract_only(&c)?;
            println!("{} defects extracted", outcome.n_defects);
            for f in &outcome.files {
                println!("  {}", f.display());
            }
        }
        Command::Reason(args) => {
            set_jobs(args.common.jobs)?;
            let c = load_config(&args.common)?;
            let prepared = prepare_from_csv(&args.raw, &args.targets_csv)?;
            let outcomes = reason_prepared(&c, &prepared)?;
            print_outcomes(&outcomes, &c.output_dir);
        }
        Command::Grid(args) => {
            set_jobs(args.dataset.common.jobs)?;
            let c = dataset_config(&args.dataset)?;
            let combinations = if args.combinations.is_empty() {
                Combination::ALL.to_vec()
            } else {
                args.combinations
            };
            let table = run_grid(&c, &DEFAULT_GRID, &combinations)?;
            print!("{table}");
            println!("grid written to {}", c.output_dir.join("grid.csv").display());
        }
        Command::Pipeline(args) => {
            set_jobs(args.common.jobs)?;
            let c = dataset_config(&args)?;
            let outcome = run_pipeline(&c)?;
            println!("{} defects", outcome.n_defects);
            print_outcomes(&outcome.targets, &c.output_dir);
        }
        Command::Synth(args) => {
            let config = SynthConfig {
                n_images: args.images,
                defects_per_image: args.defects_per_image,
                detection: match args.size_below {
                    Some(threshold) => DetectionRule::SizeBelow { threshold },
                    None => DetectionRule::MissRate { rate: args.miss_rate },
                },
                seed: args.seed,
                ..SynthConfig::default()
            };
            let output = |e| StageError {
                stage: Stage::Output,
                source: e,
            };
            generate(&config).map_err(config_error)?.write(&args.out).map_err(output)?;
            println!(
                "{} images with {} defects each written to {}",
                config.n_images,
                config.defects_per_image,
                args.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
