use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{run, Command, Output};
use config::ExperimentConfig;

/// Config-driven experiments for singular Liouville systems.
///
/// Exit codes: 0 ok, 2 configuration, 3 solver failure, 4 non-convergence.
#[derive(Debug, Parser)]
#[command(name = "liouville", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON experiment file; defaults apply when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`; default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Integration tolerance (overrides `tol`).
    #[arg(long, global = true, value_name = "FLOAT")]
    tol: Option<f64>,
    /// Only diagnostics on stderr; nothing on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Integrate the radial system; writes profile.csv and summary.json.
    Solve,
    /// Find the initial values reaching a target σ.
    Invert,
    /// Λ values, Q, critical set and region of ρ.
    Surface,
    /// Compare bubbles of two singular strengths.
    Compare,
    /// Leading-order coefficient of Λ near the critical surface.
    Leading,
    /// Torus Green data at a point set.
    Green,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::Invert => Command::Invert,
            Cmd::Surface => Command::Surface,
            Cmd::Compare => Command::Compare,
            Cmd::Leading => Command::Leading,
            Cmd::Green => Command::Green,
        }
    }
}

fn write_outputs(dir: &Path, out: &Output, quiet: bool) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in &out.files {
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        if !quiet {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path),
        None => ExperimentConfig::from_json("{}"),
    };
    if let (Ok(c), Some(tol)) = (&mut config, cli.tol) {
        c.tol = tol;
    }
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = match run(cli.command.into(), &config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let dir = cli
        .out
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = write_outputs(&dir, &out, cli.quiet) {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    if !cli.quiet {
        println!(
            "{}",
            serde_json::to_string_pretty(&out.report).expect("report is serializable")
        );
    }
    ExitCode::SUCCESS
}
