use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bicsignal::{baselines_run, census_run, generate_dataset, run, ReportSource, RunConfig};

/// Drug-event signal detection via BIC-maximizing logistic subset selection.
#[derive(Parser)]
#[command(name = "bicsignal", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full analysis: eligibility, model search, signals, metrics, manifest
    Run(RunArgs),
    /// Sample a synthetic dataset from a JSON spec
    Generate(GenerateArgs),
    /// Per-event headcounts and eligible-drug counts
    Census(InputArgs),
    /// PRR / ROR / RFET results for every drug-event pair
    Baselines(InputArgs),
}

#[derive(Args)]
struct InputOpts {
    /// Report file; with --reports-events, the reports-by-drugs triplet file
    #[arg(long)]
    reports: PathBuf,
    /// Reports-by-events triplet file (enables two-file ingestion)
    #[arg(long)]
    reports_events: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    #[command(flatten)]
    input: InputOpts,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputOpts,
    /// Labeled reference pairs (event_id,drug_id,label) for scoring
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Comma-separated event ids to analyze (default: every declared event)
    #[arg(long, value_delimiter = ',')]
    events: Option<Vec<String>>,
    /// Neighborhood radius of the proposal kernel
    #[arg(long, default_value_t = 5)]
    alpha: usize,
    /// Iterations per chain
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    /// Number of independent restarts per event
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    /// Enumerate exhaustively when this many drugs or fewer are eligible
    #[arg(long, default_value_t = 12)]
    exhaustive_cutoff: usize,
    /// Base seed; every event and chain derives its own stream from it
    #[arg(long)]
    seed: u64,
    /// Also compute disproportionality baselines (needs --reference)
    #[arg(long)]
    baselines: bool,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (BICSIGNAL_THREADS overrides; default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Write a per-event chain trace CSV
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON generator spec (n, prevalences, beta0, effects, blocks)
    #[arg(long)]
    spec: PathBuf,
    /// Sampling seed
    #[arg(long)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

impl InputOpts {
    fn source(&self) -> ReportSource<'_> {
        match &self.reports_events {
            Some(events) => ReportSource::Triplet {
                drugs: &self.reports,
                events,
            },
            None => ReportSource::Single(&self.reports),
        }
    }
}

fn dispatch(cli: Cli) -> bicsignal::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = RunConfig {
                reports: args.input.reports,
                reports_events: args.input.reports_events,
                reference: args.reference,
                events: args.events,
                alpha: args.alpha,
                iters: args.iters,
                restarts: args.restarts,
                exhaustive_cutoff: args.exhaustive_cutoff,
                seed: args.seed,
                baselines: args.baselines,
                out: args.out,
                threads: args.threads,
                trace: args.trace,
            };
            let summary = run(&cfg)?;
            println!(
                "analyzed {} event(s), {} signal(s)",
                summary.n_events, summary.n_signals
            );
            for path in &summary.written {
                println!("wrote {}", path.display());
            }
        }
        Command::Generate(args) => {
            let (reports, truth) = generate_dataset(&args.spec, args.seed, &args.out)?;
            println!("wrote {}", reports.display());
            println!("wrote {}", truth.display());
        }
        Command::Census(args) => {
            let path = census_run(args.input.source(), &args.out)?;
            println!("wrote {}", path.display());
        }
        Command::Baselines(args) => {
            let path = baselines_run(args.input.source(), &args.out)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
