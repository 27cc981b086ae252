//! `bioslam` command-line front end: simulate a scripted run, replay a
//! recorded scan log, or plot a finished run.

mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bioslam",
    version,
    about = "Biologically inspired 2D LiDAR SLAM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Raycast a scripted trajectory through a world and run the pipeline on it.
    Simulate {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        /// TOML parameters; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the pipeline on a recorded scan log.
    Replay {
        #[arg(long)]
        scanlog: PathBuf,
        /// Ground-truth log matching the scans line by line.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw map.svg, views.svg and error.svg from a finished run directory.
    Plot {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            world,
            trajectory,
            config,
            out,
            seed,
        } => run::simulate(&world, &trajectory, config.as_deref(), &out, seed),
        Command::Replay {
            scanlog,
            truth,
            config,
            out,
        } => run::replay(&scanlog, truth.as_deref(), config.as_deref(), &out),
        Command::Plot { out } => plot::plot(&out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the cause chain on one line, skipping causes a message already shows.
fn one_line(e: &anyhow::Error) -> String {
    let mut s = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !s.ends_with(&msg) {
            if !s.is_empty() {
                s.push_str(": ");
            }
            s.push_str(&msg);
        }
    }
    s.replace('\n', " ")
}
