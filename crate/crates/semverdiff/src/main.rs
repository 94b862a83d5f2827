//! Command-line interface.
//!
//! Fatal problems (unreadable snapshots, bad flags, equal versions) exit
//! with 2 before any report is produced. A successful run exits with the
//! report's own code: 1 when a breaking change was found, 2 when nothing
//! broke but some API could not be assessed, 0 otherwise. Corpus runs exit
//! 0 only when the corpus quality gates hold.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use semverdiff::callgraph::DEFAULT_MAX_PATHS;
use semverdiff::corpus::{corpus_exit_code, render_corpus_text, run_corpus};
use semverdiff::ir::loader::load_snapshot;
use semverdiff::report::{
    analyze_upgrade, exit_code, parse_version, render_text, to_json, AnalysisConfig, DumpOptions,
};
use semverdiff::semdiff::{KernelConfig, PenaltyMode};

#[derive(Parser)]
#[command(
    name = "semverdiff",
    version,
    about = "Finds semantically breaking changes between two versions of an MVIL library"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare two snapshot directories and report per-API verdicts.
    Check(CheckArgs),
    /// Run a labeled corpus from a manifest and score the outcomes.
    Corpus(CorpusArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Directory holding the old version's .mvil sources.
    old: PathBuf,
    /// Directory holding the new version's .mvil sources.
    new: PathBuf,
    /// Old version override; read from OLD/version.txt when absent.
    #[arg(long, value_name = "X.Y.Z")]
    old_version: Option<String>,
    /// New version override; read from NEW/version.txt when absent.
    #[arg(long, value_name = "X.Y.Z")]
    new_version: Option<String>,
    /// Call-graph depth cap, also the slicer's recursion budget.
    #[arg(long, default_value_t = 15)]
    depth: usize,
    /// Kernel refinement iterations.
    #[arg(long, default_value_t = 3)]
    h: usize,
    /// Kernel score above which a cluster counts as breaking.
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Mismatch weight of benign-tagged nodes.
    #[arg(long, default_value_t = 0.25)]
    beta: f64,
    /// How benign down-weighting is applied.
    #[arg(long, value_enum, default_value_t = PenaltyArg::PerNode)]
    penalty_mode: PenaltyArg,
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Embed each cluster's dependency summaries in the report.
    #[arg(long)]
    dump_summaries: bool,
    /// Embed each cluster's benign tags in the report.
    #[arg(long)]
    dump_benign: bool,
    /// Embed each cluster's kernel details in the report.
    #[arg(long)]
    dump_kernel: bool,
}

#[derive(Args)]
struct CorpusArgs {
    /// Path to the corpus manifest (manifest.json).
    manifest: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyArg {
    PerNode,
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("SEMVERDIFF_THREADS") {
        if let Ok(count) = threads.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(count)
                .build_global();
        }
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check(args) => check(args),
        Command::Corpus(args) => corpus(args),
    };
    match outcome {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn check(args: CheckArgs) -> Result<ExitCode, String> {
    let parse_override = |text: &Option<String>| {
        text.as_deref()
            .map(parse_version)
            .transpose()
            .map_err(|e| e.to_string())
    };
    let old =
        load_snapshot(&args.old, parse_override(&args.old_version)?).map_err(|e| e.to_string())?;
    let new =
        load_snapshot(&args.new, parse_override(&args.new_version)?).map_err(|e| e.to_string())?;

    let config = AnalysisConfig {
        depth_cap: args.depth,
        max_paths: DEFAULT_MAX_PATHS,
        kernel: KernelConfig {
            h: args.h,
            threshold: args.threshold,
            beta: args.beta,
            penalty_mode: match args.penalty_mode {
                PenaltyArg::PerNode => PenaltyMode::PerNode,
                PenaltyArg::Global => PenaltyMode::Global,
            },
        },
    };
    let dumps = DumpOptions {
        summaries: args.dump_summaries,
        benign: args.dump_benign,
        kernel: args.dump_kernel,
    };
    let report = analyze_upgrade(&old, &new, &config, &dumps).map_err(|e| e.to_string())?;
    let rendered = match args.format {
        FormatArg::Json => to_json(&report),
        FormatArg::Text => render_text(&report),
    };
    print!("{rendered}");
    Ok(ExitCode::from(exit_code(&report) as u8))
}

fn corpus(args: CorpusArgs) -> Result<ExitCode, String> {
    let report =
        run_corpus(&args.manifest, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
    print!("{}", render_corpus_text(&report));
    Ok(ExitCode::from(corpus_exit_code(&report) as u8))
}
