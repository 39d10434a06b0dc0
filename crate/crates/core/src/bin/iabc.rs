use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iabc::harness::{cmd_check, cmd_run, cmd_sweep, RunOptions, Status, SweepOptions};

#[derive(Parser)]
#[command(
    name = "iabc",
    version,
    about = "Iterative approximate Byzantine consensus simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the degree and sufficiency conditions of a graph file.
    Check {
        graph: PathBuf,
        #[arg(long)]
        f: usize,
    },
    /// Run one scenario file.
    Run {
        config: PathBuf,
        /// Write every round's transition matrix to `matrices/`.
        #[arg(long)]
        dump_matrices: bool,
        /// Verify the run and write `certificate.json`.
        #[arg(long)]
        certify: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run and certify every scenario file in a directory.
    Sweep {
        dir: PathBuf,
        #[arg(long)]
        parallel: Option<usize>,
        #[arg(long)]
        dump_matrices: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Check { graph, f } => cmd_check(&graph, f, &mut std::io::stdout().lock()),
        Command::Run {
            config,
            dump_matrices,
            certify,
            out,
            seed,
        } => {
            let opts = RunOptions {
                dump_matrices,
                certify,
                out,
                seed,
            };
            cmd_run(&config, &opts).map(|o| {
                let r = &o.report;
                println!(
                    "rounds {} | final spread {} | validity {} | converged {}",
                    r.rounds, r.final_spread, r.validity, r.converged
                );
                if let Some(c) = &o.certificate {
                    println!("certificate: {}", if c.passes { "pass" } else { "FAIL" });
                }
                println!("outputs in {}", o.out_dir.display());
                o.status
            })
        }
        Command::Sweep {
            dir,
            parallel,
            dump_matrices,
            out,
            seed,
        } => {
            let opts = SweepOptions {
                parallel,
                out,
                seed,
                dump_matrices,
            };
            cmd_sweep(&dir, &opts).map(|report| {
                let s = &report.stats;
                println!(
                    "{} scenarios: {} passed, {} failed, {} input errors",
                    s.scenarios, s.passed, s.failed, s.input_errors
                );
                for e in report.failures() {
                    println!(
                        "  {}: {:?} {}",
                        e.name,
                        e.status,
                        e.error.as_deref().unwrap_or("")
                    );
                }
                report.status()
            })
        }
    };
    let status = status.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        Status::of_error(&e)
    });
    ExitCode::from(status.code())
}
