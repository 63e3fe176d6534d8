use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gblgp::scfg::SamplerBudget;
use gblgp_cli::{grammar_check, report, run_experiment, sample, CliError, ReportOutcome, RunOptions, OUTPUT_DIR_ENV};

/// Exit status when a report skipped unreadable records.
const EXIT_WARNINGS: u8 = 3;

#[derive(Parser)]
#[command(name = "gblgp", version, about = "Grammar-based linear GP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (benchmark, algorithm, seed) of a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory, overriding the manifest.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Skip runs whose record already exists.
        #[arg(long)]
        resume: bool,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Rebuild summaries and plot data from stored records.
    Report { dir: PathBuf },
    /// Parse and validate a grammar file or builtin grammar name.
    GrammarCheck { grammar: String },
    /// Print one sampled program with its production tags.
    Sample {
        #[arg(long)]
        grammar: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 13)]
        registers: usize,
        #[arg(long, default_value_t = 200)]
        max_instructions: usize,
        /// Rewrite the input rule to x1..xD.
        #[arg(long)]
        inputs: Option<usize>,
    },
}

fn finish(outcome: ReportOutcome) -> ExitCode {
    for aggregate in &outcome.aggregates {
        println!("{}", gblgp::analysis::render_text(aggregate));
    }
    println!("{} records summarised in {}", outcome.records, outcome.output_dir.display());
    if outcome.skipped.is_empty() {
        return ExitCode::SUCCESS;
    }
    for (path, reason) in &outcome.skipped {
        eprintln!("warning: skipped {}: {reason}", path.display());
    }
    ExitCode::from(EXIT_WARNINGS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<ExitCode, CliError> = match cli.command {
        Command::Run { manifest, jobs, output, resume, quiet } => {
            let options = RunOptions {
                output_dir: output,
                default_output_dir: std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from),
                jobs,
                resume,
                quiet,
            };
            run_experiment(&manifest, &options).map(finish)
        }
        Command::Report { dir } => report(&dir).map(finish),
        Command::GrammarCheck { grammar } => grammar_check(&grammar).map(|text| {
            print!("{text}");
            ExitCode::SUCCESS
        }),
        Command::Sample { grammar, seed, registers, max_instructions, inputs } => {
            let budget = SamplerBudget { register_count: registers, max_instructions };
            sample(&grammar, seed, budget, inputs).map(|text| {
                print!("{text}");
                ExitCode::SUCCESS
            })
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
