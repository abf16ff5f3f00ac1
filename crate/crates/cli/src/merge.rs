use std::path::PathBuf;

use anyhow::{bail, Context};
use solbug_core::taxonomy::{merge_records, BugRecord};

use crate::output::{to_json, Format};
use crate::Status;

#[derive(clap::Args)]
pub struct Args {
    /// JSON array of bug records.
    records: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

pub fn run(args: Args) -> anyhow::Result<Status> {
    let text = std::fs::read_to_string(&args.records)
        .with_context(|| format!("{}", args.records.display()))?;
    let records: Vec<BugRecord> = serde_json::from_str(&text)
        .with_context(|| format!("{}: not a list of bug records", args.records.display()))?;
    let problems: Vec<String> = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.validate().err().map(|e| format!("record {i}: {e}")))
        .collect();
    if !problems.is_empty() {
        bail!("{}", problems.join("; "));
    }
    let merged = merge_records(&records);
    match args.format {
        Format::Json => println!("{}", to_json(&merged)),
        Format::Text => {
            for r in &merged {
                let consequence: Vec<&str> = r.consequence.iter().map(String::as_str).collect();
                print!(
                    "{} [{}] {} -> {}",
                    r.name,
                    r.source,
                    r.behavior,
                    consequence.join(", ")
                );
                if !r.aliases.is_empty() {
                    let aliases: Vec<&str> = r.aliases.iter().map(String::as_str).collect();
                    print!(" (aliases: {})", aliases.join(", "));
                }
                if r.merged {
                    print!(" (merged)");
                }
                println!();
            }
        }
    }
    Ok(Status::Clean)
}
