//! `grasnid`: zero-shot network intrusion detection over the Grassmannian.
//!
//! Subcommands run the pipeline stages (ingest, alnid, infer, eval), the
//! whole chain (run), or re-emit formatted reports (report). Stages cache by
//! content: re-running with unchanged inputs and configuration skips work.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use grasnid_cli::config::PipelineConfig;
use grasnid_cli::manifest::DirLock;
use grasnid_cli::stages::{self, Pipeline};

#[derive(Parser)]
#[command(
    name = "grasnid",
    version,
    about = "Zero-shot network intrusion detection: attribute learning plus \
             Grassmannian geodesic inference over KDD-format traffic data"
)]
struct Cli {
    /// Configuration file (flat key = value lines); GRASNID_* environment
    /// variables override file keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config key)
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// RNG seed (overrides the config key)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 0 uses all cores (overrides the config key)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the training file, select and scale attributes, and split into
    /// known-class and zero-shot files
    Ingest,
    /// Induce the decision tree, extract rules, and reweight every matrix
    Alnid,
    /// Rank attack categories by mean geodesic distance per zero-shot class
    Infer {
        /// Spectral-energy cutoff in (0, 100]
        #[arg(long)]
        cutoff_percent: Option<f64>,
        /// dense-log or principal-angle
        #[arg(long)]
        engine: Option<String>,
        /// kdd99 or nslkdd
        #[arg(long)]
        dataset: Option<String>,
        /// Write each zero-shot projector as CSV (small matrices only)
        #[arg(long)]
        dump_projectors: bool,
    },
    /// K-NN model comparison on the weighted known-class corpus
    Eval {
        /// Neighbor count
        #[arg(long)]
        k: Option<usize>,
        /// grassmann, frobenius or both
        #[arg(long)]
        distance: Option<String>,
        /// Laplace smoothing for vote probabilities
        #[arg(long)]
        epsilon: Option<f64>,
        /// Fold held-out instances into the corpus under their category
        #[arg(long)]
        include_zsc: bool,
    },
    /// Run every stage in order
    Run,
    /// Re-emit CSV/markdown reports from the stored JSON detail
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(exit_class(&error))
        }
    }
}

/// Stable exit codes per error class: 2 configuration, 3 io, 4 input data,
/// 5 numerical/algorithmic.
fn exit_class(error: &anyhow::Error) -> u8 {
    for cause in error.chain() {
        if cause.is::<grasnid_core::kdd::IngestError>() {
            return 4;
        }
        if cause.is::<grasnid_core::GrassmannError>()
            || cause.is::<grasnid_core::inid::InidError>()
            || cause.is::<grasnid_core::alnid::AlnidError>()
            || cause.is::<grasnid_core::zsl::EvalError>()
        {
            return 5;
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    2
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::from_env()?,
    };
    if let Some(out_dir) = cli.out_dir {
        config.out_dir = out_dir;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }

    match &cli.command {
        Command::Infer {
            cutoff_percent,
            engine,
            dataset,
            ..
        } => {
            if let Some(cutoff) = cutoff_percent {
                config.cutoff_percent = *cutoff;
            }
            if let Some(engine) = engine {
                config.engine = engine.parse().map_err(|e: String| anyhow::anyhow!(e))?;
            }
            if let Some(dataset) = dataset {
                config.dataset_kind = dataset.parse().map_err(|e: String| anyhow::anyhow!(e))?;
            }
        }
        Command::Eval {
            k,
            distance,
            epsilon,
            include_zsc,
        } => {
            if let Some(k) = k {
                config.knn_k = *k;
            }
            if let Some(distance) = distance {
                config.eval_distance =
                    distance.parse().map_err(|e: String| anyhow::anyhow!(e))?;
            }
            if let Some(epsilon) = epsilon {
                config.knn_epsilon = *epsilon;
            }
            if *include_zsc {
                config.eval_include_zsc = true;
            }
        }
        _ => {}
    }
    config.validate()?;

    if config.threads > 0 {
        // a later global-pool request would fail; ignore when already set
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global();
    }

    let pipeline = Pipeline::new(&config);
    match cli.command {
        Command::Run => {
            let _lock = DirLock::acquire(&config.out_dir)?;
            let manifest = pipeline.run_all()?;
            for stage in &manifest.stages {
                println!(
                    "{:>6}  {}  {} output file(s){}",
                    stage.name,
                    if stage.cached { "cached" } else { "ran   " },
                    stage.outputs.len(),
                    if stage.cached {
                        String::new()
                    } else {
                        format!("  ({} ms)", stage.duration_ms)
                    }
                );
            }
            println!(
                "manifest: {}",
                config.out_dir.join("run_manifest.json").display()
            );
        }
        Command::Ingest => run_one(&pipeline, &config, "ingest")?,
        Command::Alnid => run_one(&pipeline, &config, "alnid")?,
        Command::Infer {
            dump_projectors, ..
        } => {
            run_one(&pipeline, &config, "infer")?;
            if dump_projectors {
                dump_zsc_projectors(&config)?;
            }
        }
        Command::Eval { .. } => run_one(&pipeline, &config, "eval")?,
        Command::Report => {
            let files = stages::regenerate_reports(&config.out_dir, &config.report_formats)?;
            for file in files {
                println!("wrote {}", file.display());
            }
        }
    }
    Ok(())
}

fn run_one(pipeline: &Pipeline, config: &PipelineConfig, stage: &str) -> Result<()> {
    let _lock = DirLock::acquire(&config.out_dir)?;
    let record = pipeline
        .run_stage(stage)
        .with_context(|| format!("stage {stage} failed"))?;
    println!(
        "{stage}: {} with {} output file(s)",
        if record.cached { "cached" } else { "ran" },
        record.outputs.len()
    );
    Ok(())
}

/// Debug dump: the projector of every zero-shot matrix at its selected rank.
/// Refuses matrices beyond a size bound (the projector is rows x rows).
fn dump_zsc_projectors(config: &PipelineConfig) -> Result<()> {
    use grasnid_core::grassmann::{build_projector, select_rank, thin_svd};

    const MAX_ROWS: usize = 512;
    let dir = config.out_dir.join("infer").join("projectors");
    std::fs::create_dir_all(&dir)?;
    let weights_path = config.out_dir.join("alnid").join("weights_manifest.json");
    let weights: stages::WeightsManifest =
        serde_json::from_str(&std::fs::read_to_string(&weights_path)?)?;
    for entry in &weights.zsc_files {
        if entry.rows > MAX_ROWS {
            eprintln!(
                "skipping projector dump for {} ({} rows > {MAX_ROWS})",
                entry.name, entry.rows
            );
            continue;
        }
        let path = config.out_dir.join("alnid").join(&entry.file);
        let file = std::fs::File::open(&path)?;
        let matrix = grasnid_core::FeatureMatrix::read_csv(
            std::io::BufReader::new(file),
            &entry.name,
            grasnid_core::SourceTag::ZeroShotAttack(entry.name.clone()),
        )?;
        let svd = thin_svd(matrix.values())?;
        let rank = select_rank(&svd.singular_values, config.cutoff_percent)?;
        let point = build_projector(svd.leading_frame(rank)?)?;
        let out = dir.join(format!("{}.csv", entry.name));
        std::fs::write(&out, point.projector_csv())?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
