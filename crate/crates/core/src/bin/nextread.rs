use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use nextread::config::RunConfig;
use nextread::features::FeatureKind;
use nextread::fixture::{generate_fixture, FixtureSpec};
use nextread::models::ModelKind;
use nextread::pipeline;

#[derive(Parser)]
#[command(version, about = "Next-article recommendation pipeline on MIND-format logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    features: Option<FeatureKind>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate news and behaviors files.
    Ingest(RunArgs),
    /// Build confidence-weighted triplets from the click streams.
    Triplets(RunArgs),
    /// Write warm and cold train/test splits.
    Split(RunArgs),
    /// Fit the TF-IDF vocabulary (and check external embeddings).
    Featurize(RunArgs),
    /// Train the configured models on every split.
    Train(RunArgs),
    /// Rank test triplets and write metrics.csv.
    Evaluate(RunArgs),
    /// Print the summary table from metrics.csv.
    Report(RunArgs),
    /// Run every stage in order.
    Run(RunArgs),
    /// Generate a synthetic MIND-format fixture.
    Fixture {
        #[arg(long, default_value_t = 50)]
        users: usize,
        #[arg(long, default_value_t = 200)]
        articles: usize,
        #[arg(long, default_value_t = 0.8)]
        content_signal: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)
        .with_context(|| format!("loading config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(model) = args.model {
        cfg.model.kinds = vec![model];
    }
    if let Some(kind) = args.features {
        cfg.features.kind = kind;
    }
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let (stage, args) = match cli.command {
        Command::Fixture {
            users,
            articles,
            content_signal,
            seed,
            out,
        } => {
            let spec = FixtureSpec {
                n_users: users,
                n_articles: articles,
                content_signal,
                seed,
            };
            let files = generate_fixture(&spec, &out)?;
            println!("{}", files.news.display());
            println!("{}", files.behaviors.display());
            println!("{}", files.embeddings.display());
            return Ok(());
        }
        Command::Run(args) => {
            let cfg = load(&args)?;
            let report = pipeline::run_pipeline(&cfg)?;
            print!("{}", report.summary_table());
            return Ok(());
        }
        Command::Ingest(a) => ("ingest", a),
        Command::Triplets(a) => ("triplets", a),
        Command::Split(a) => ("split", a),
        Command::Featurize(a) => ("featurize", a),
        Command::Train(a) => ("train", a),
        Command::Evaluate(a) => ("evaluate", a),
        Command::Report(a) => ("report", a),
    };
    let cfg = load(&args)?;
    print!("{}", pipeline::run_stage(&cfg, stage)?);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
