use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use perspectra::corpus::{save_dataset, Format};
use perspectra::pipeline::{Pipeline, StageSummary};
use perspectra::synthetic::{benchmark_names, generate_benchmark, PLANTED_SEED, PLANTED_SIZE};
use perspectra::Error;

#[derive(Parser)]
#[command(name = "perspectra", version, about = "Persona-conditioned annotation, agreement and annotator modeling pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate persona annotations at every configured temperature.
    Annotate(StageArgs),
    /// Dataset statistics, agreement per temperature and soft-label curves.
    Stats(StageArgs),
    /// Train and evaluate the technique grid.
    Train(StageArgs),
    /// Persona/human alignment, prototypes, label swap and cross-evaluation.
    Align(StageArgs),
    /// Verify artifact digests and gather all reports.
    Report(StageArgs),
    /// Write a synthetic benchmark dataset as JSONL.
    Benchmark {
        /// One of planted_rule, identical_annotator, random_humans.
        #[arg(long, default_value = "planted_rule")]
        name: String,
        #[arg(long, default_value_t = PLANTED_SIZE)]
        size: usize,
        #[arg(long, default_value_t = PLANTED_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run_stage(args: StageArgs, stage: fn(&Pipeline) -> perspectra::Result<StageSummary>) -> perspectra::Result<()> {
    let pipeline = Pipeline::from_path(&args.config, args.seed, args.out)?;
    let summary = stage(&pipeline)?;
    for note in &summary.notes {
        println!("{note}");
    }
    println!("{}: wrote {} files under {}", summary.stage, summary.files.len(), pipeline.out_dir().display());
    Ok(())
}

fn run(cli: Cli) -> perspectra::Result<()> {
    match cli.command {
        Command::Annotate(a) => run_stage(a, Pipeline::annotate),
        Command::Stats(a) => run_stage(a, Pipeline::stats),
        Command::Train(a) => run_stage(a, Pipeline::train),
        Command::Align(a) => run_stage(a, Pipeline::align),
        Command::Report(a) => run_stage(a, Pipeline::report),
        Command::Benchmark { name, size, seed, out } => {
            if !benchmark_names().contains(&name.as_str()) {
                return Err(Error::Config {
                    field: "--name".into(),
                    message: format!("expected one of {}", benchmark_names().join(", ")),
                });
            }
            let bundle = generate_benchmark(&name, size, seed)?;
            save_dataset(&bundle, &out, Format::from_path(&out).unwrap_or(Format::Jsonl))?;
            println!("benchmark {name}: {} instances written to {}", bundle.instances().len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
