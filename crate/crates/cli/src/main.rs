//! Experiment runner and analysis CLI.
//!
//! Exit codes: 0 on success, 1 on configuration or input errors, 2 when a
//! simulation run violates a runtime invariant.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swarmmap::classes::ClassModel;
use swarmmap::report;
use swarmmap::sim::{output, run_experiment, SimError};
use swarmmap::SimConfig;

#[derive(Parser)]
#[command(name = "swarmmap", version, about = "Distributed semantic annotation swarm simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded experiment and write the run directory.
    Simulate {
        /// Config file (`key = value` lines); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        steps: u64,
        /// Output directory for the run files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit per-class ensemble accuracy curves as CSV.
    EnsembleTable {
        /// `name,accuracy` table; the bundled catalog when omitted.
        #[arg(long)]
        classes: Option<PathBuf>,
        /// Largest vote count to tabulate.
        #[arg(long, default_value_t = 8)]
        n_max: u32,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute storage-cost curves from a packing trace.
    BinpackAudit {
        /// `packing.csv` written by `simulate`.
        #[arg(long)]
        trace: PathBuf,
        /// Uniform per-agent memory capacity to audit against.
        #[arg(long, default_value_t = 20)]
        capacity: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a directory of runs into figure-ready CSV tables.
    Report {
        /// Directory containing run directories (searched recursively).
        #[arg(long)]
        runs: PathBuf,
        /// Output directory for the figure CSVs.
        #[arg(long)]
        out: PathBuf,
        /// Largest vote count in the ensemble table.
        #[arg(long, default_value_t = 8)]
        n_max: u32,
    },
}

fn emit(text: &str, out: Option<PathBuf>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), (u8, anyhow::Error)> {
    let config_err = |e: anyhow::Error| (1u8, e);
    match cli.command {
        Command::Simulate { config, seed, steps, out } => {
            let cfg = match config {
                Some(path) => SimConfig::load(&path).map_err(|e| config_err(e.into()))?,
                None => SimConfig::default(),
            };
            let run = run_experiment(&cfg, seed, steps).map_err(|e| match e {
                SimError::Invariant { .. } => (2u8, e.into()),
                other => (1u8, other.into()),
            })?;
            output::write_run(&out, &run).map_err(|e| config_err(e.into()))?;
            eprintln!(
                "run complete: {} steps, {} observations, {} consolidations -> {}",
                run.steps,
                run.observations.len(),
                run.consolidations.len(),
                out.display()
            );
            Ok(())
        }
        Command::EnsembleTable { classes, n_max, out } => {
            let model = match classes {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(&path).map_err(|e| config_err(e.into()))?;
                    ClassModel::from_csv(&text).map_err(|e| config_err(e.into()))?
                }
                None => ClassModel::bga_dgcnn(),
            };
            let table =
                report::fig3_ensemble(&model, n_max).map_err(|e| config_err(e.into()))?;
            emit(&table, out).map_err(|e| config_err(e.into()))
        }
        Command::BinpackAudit { trace, capacity, out } => {
            let text = std::fs::read_to_string(&trace).map_err(|e| config_err(e.into()))?;
            let audit =
                report::binpack_audit(&text, capacity).map_err(|e| config_err(e.into()))?;
            emit(&audit, out).map_err(|e| config_err(e.into()))
        }
        Command::Report { runs, out, n_max } => {
            let model = ClassModel::bga_dgcnn();
            report::write_report(&runs, &out, &model, n_max)
                .map_err(|e| config_err(e.into()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path too
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
