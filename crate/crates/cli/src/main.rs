//! `cgp`: run, grid-search and analyse CGP reorder experiments.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 internal
//! invariant violation.

mod analyze;
mod batch;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use cgp_core::run_es;
use cgp_core::run_rng;
use clap::{Args, Parser, Subcommand};

use crate::batch::{format_summary, format_table, genome_text, load_benchmark};
use crate::config::CommonArgs;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "cgp", version, about = "Cartesian GP with genotype reordering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of seeds and write results, traces and a summary
    Run(RunArgs),
    /// Run every (N, p_reorder) cell of a grid, skipping completed cells
    Grid(GridArgs),
    /// Build histograms, convergence curves and summaries from results*.jsonl
    Analyze(AnalyzeArgs),
    /// Replay one seed and print its final genome
    DumpGenome(DumpArgs),
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write each run's final genome under genomes/
    #[arg(long)]
    dump_genome: bool,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated node counts
    #[arg(long, value_delimiter = ',')]
    grid_nodes: Option<Vec<usize>>,
    /// Comma-separated reorder probabilities
    #[arg(long, value_delimiter = ',')]
    grid_p: Option<Vec<f64>>,
    /// Also write each run's final genome under genomes/ in every cell
    #[arg(long)]
    dump_genome: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory holding results*.jsonl
    dir: PathBuf,
    /// Where to write outputs (default: the input directory)
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Iteration grid points for convergence curves
    #[arg(long, default_value_t = 101)]
    points: usize,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Seed to replay (default: first seed of the range)
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let mut resolved = args.common.resolve("results")?;
            resolved.dump_genome |= args.dump_genome;
            let row = batch::cmd_run(&resolved)?;
            print!("{}", format_summary(&row));
            Ok(())
        }
        Command::Grid(mut args) => {
            let file = match &args.common.config {
                Some(path) => config::FileConfig::load(path)?,
                None => config::FileConfig::default(),
            };
            let nodes = args
                .grid_nodes
                .or(file.grid_nodes)
                .ok_or_else(|| CliError::Config("no grid_nodes axis declared".into()))?;
            let ps = args.grid_p.or(file.grid_p).unwrap_or_else(|| vec![1.0]);
            if let Some(&first) = nodes.first() {
                args.common.nodes.get_or_insert(first);
            }
            let mut resolved = args.common.resolve("grid")?;
            resolved.dump_genome |= args.dump_genome;
            let outcome = batch::cmd_grid(&resolved, &nodes, &ps)?;
            print!("{}", format_table(&outcome.rows));
            println!(
                "{} cells run, {} already complete",
                outcome.executed, outcome.skipped
            );
            Ok(())
        }
        Command::Analyze(args) => {
            let out = args.output.unwrap_or_else(|| args.dir.clone());
            let outcome = analyze::cmd_analyze(&args.dir, &out, args.points)?;
            for row in &outcome.rows {
                println!("{}", format_summary(row));
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::DumpGenome(args) => {
            let resolved = args.common.resolve("results")?;
            let settings = &resolved.settings;
            let seed = args.seed.unwrap_or(settings.seeds.start);
            let bench = load_benchmark(settings, &resolved.output.join("datasets"))?;
            let config = settings.es_config(&bench, seed)?;
            let out = run_es(&config, &bench, &mut run_rng(settings.master_seed, seed))?;
            let text = genome_text(&settings.to_json(), &out.result, &out.best);
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(CliError::io(std::path::Path::new("<stdout>")))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
