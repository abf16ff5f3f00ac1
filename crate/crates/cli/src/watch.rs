use std::io::Write;
use std::path::PathBuf;

use anyhow::anyhow;
use chrono::{DateTime, Utc};
use solbug_collector::{
    client_for, notifier_for, run_cycle, watch_loop, webhook_body, ChangeSet, CollectorError,
    HumanDuration, Notifier, NotifyError, NotifyTarget, SystemClock, WatchConfig,
};

use crate::output::Format;
use crate::Status;

#[derive(clap::Args)]
pub struct Args {
    /// JSON config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single cycle and exit.
    #[arg(long)]
    once: bool,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

/// Prints each change set as one JSON object per line.
struct JsonLines<W: Write>(W);

impl<W: Write> Notifier for JsonLines<W> {
    fn deliver(&mut self, changes: &ChangeSet, at: DateTime<Utc>) -> Result<(), NotifyError> {
        writeln!(self.0, "{}", webhook_body(changes, at))
            .map_err(|e| NotifyError::Io(e.to_string()))
    }
}

fn to_anyhow(e: CollectorError) -> anyhow::Error {
    anyhow!(e)
}

pub fn run(args: Args) -> anyhow::Result<Status> {
    let config = match &args.config {
        Some(p) => WatchConfig::load(p).map_err(to_anyhow)?,
        None => WatchConfig::default(),
    };
    eprintln!(
        "watching {} keyword(s) every {}; state in {}",
        config.keywords.len(),
        HumanDuration(config.interval()),
        config.state_path.display()
    );
    let mut client = client_for(&config).map_err(to_anyhow)?;
    let stdout = std::io::stdout();
    let mut notifier: Box<dyn Notifier> = match (&config.notify, args.format) {
        (NotifyTarget::Stdout, Format::Json) => Box::new(JsonLines(stdout.lock())),
        _ => notifier_for(&config, stdout.lock()),
    };
    let clock = SystemClock;

    if args.once {
        return match run_cycle(&config, client.as_mut(), &clock, notifier.as_mut()) {
            Ok(outcome) => {
                eprintln!("{} change(s); state saved", outcome.changes.len());
                Ok(Status::Clean)
            }
            Err(e) if e.is_fatal() => Err(to_anyhow(e)),
            Err(e) => {
                eprintln!("cycle failed: {e}");
                Ok(Status::Flagged)
            }
        };
    }
    watch_loop(
        &config,
        client.as_mut(),
        &clock,
        notifier.as_mut(),
        None,
        |e| {
            eprintln!("cycle failed, retrying next interval: {e}");
        },
    )
    .map_err(to_anyhow)?;
    Ok(Status::Clean)
}
