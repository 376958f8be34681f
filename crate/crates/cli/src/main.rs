use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wasp_cli::{cmd_plot_ecdf, cmd_run, cmd_synth, cmd_vote, OutputOptions, RunRequest};

/// Elect a prediction strategy by voting over simulated accuracy measures.
#[derive(Parser)]
#[command(name = "wasp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment and all voting systems.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Resolve co-winners by lowest ECDF-AUC, then by name.
        #[arg(long)]
        tie_break: bool,
        /// Also write ecdf.svg.
        #[arg(long)]
        plot: bool,
    },
    /// Re-run the voting systems on a saved accuracy matrix.
    Vote {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tie_break: bool,
        #[arg(long)]
        plot: bool,
    },
    /// Plot ECDFs from w3.csv or ecdf.csv as SVG.
    PlotEcdf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic motor-insurance claims table.
    Synth {
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 80)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            data,
            out,
            seed,
            workers,
            tie_break,
            plot,
        } => cmd_run(&RunRequest {
            config: &config,
            data: &data,
            out: &out,
            seed,
            workers,
            options: OutputOptions { tie_break, plot },
        })
        .map(|report| print!("{}", report.criteria_table())),
        Command::Vote {
            matrix,
            out,
            tie_break,
            plot,
        } => cmd_vote(&matrix, &out, &OutputOptions { tie_break, plot })
            .map(|report| print!("{}", report.criteria_table())),
        Command::PlotEcdf { input, out } => cmd_plot_ecdf(&input, &out),
        Command::Synth { n, k, seed, out } => cmd_synth(n, k, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
