use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use plap_var::config::Mode;
use plap_var::report::to_canonical_string;
use plap_var::run::{run, EXIT_ERROR};

/// Certify and solve discrete p-Laplacian problems; writes a JSON report.
#[derive(Debug, Parser)]
#[command(name = "plap-var", version)]
struct Cli {
    mode: Mode,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let text = match cli
        .config
        .as_ref()
        .map(|p| fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
    {
        Some(Ok(t)) => Some(t),
        Some(Err(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
        None => None,
    };
    let out = run(cli.mode, text.as_deref(), cli.seed);
    let rendered = to_canonical_string(&out.report);
    let written = match &cli.out {
        Some(path) => {
            fs::write(path, &rendered).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{rendered}");
            Ok(())
        }
    };
    if let Some(err) = out.report.get("error").and_then(|e| e.as_str()) {
        eprintln!("error: {err}");
    }
    match written {
        Ok(()) => ExitCode::from(out.exit_code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
