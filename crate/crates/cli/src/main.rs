//! `solbug`: scan Solidity sources, score tools against the corpus, browse
//! the bug catalog, merge bug records and watch for new bug reports.
//!
//! Exit codes: 0 clean, 1 findings or a failed gate, 2 usage or I/O error.

mod bench;
mod catalog;
mod merge;
mod output;
mod scan;
mod watch;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use solbug_core::taxonomy::Catalog;

#[derive(Parser)]
#[command(
    name = "solbug",
    version,
    about = "Static checks and benchmarking for Solidity bug kinds"
)]
struct Cli {
    /// Catalog file to use instead of the bundled one. Also read from SOLBUG_CATALOG.
    #[arg(long, global = true, env = "SOLBUG_CATALOG", value_name = "FILE")]
    catalog: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run detectors over .sol files and directories.
    Scan(scan::Args),
    /// Score the bundled detectors or an external report against a corpus.
    Bench(bench::Args),
    /// Show bug kinds from the catalog.
    Catalog(catalog::Args),
    /// Merge duplicate bug records.
    Merge(merge::Args),
    /// Poll the search endpoint and report new or updated projects.
    Watch(watch::Args),
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    Flagged,
}

fn load_catalog(path: Option<&PathBuf>) -> anyhow::Result<Catalog> {
    match path {
        Some(p) => Catalog::load(p).map_err(|e| anyhow::anyhow!("catalog {}: {e}", p.display())),
        None => Ok(Catalog::builtin().clone()),
    }
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    match cli.command {
        Command::Watch(args) => return watch::run(args),
        Command::Merge(args) => return merge::run(args),
        _ => {}
    }
    let catalog = load_catalog(cli.catalog.as_ref())?;
    match cli.command {
        Command::Scan(args) => scan::run(args, &catalog),
        Command::Bench(args) => bench::run(args, &catalog),
        Command::Catalog(args) => catalog::run(args, &catalog),
        Command::Watch(_) | Command::Merge(_) => unreachable!(),
    }
}

/// The error chain joined with `: `, skipping causes an outer message
/// already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let s = cause.to_string();
        if msg.contains(&s) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&s);
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Clean) => ExitCode::SUCCESS,
        Ok(Status::Flagged) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
