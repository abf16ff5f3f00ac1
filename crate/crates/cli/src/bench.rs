use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use solbug_core::corpus::load_manifest_with;
use solbug_core::evaluation::{
    evaluate, evaluate_split, import_report, self_report, MetricsReport,
};
use solbug_core::taxonomy::Catalog;

use crate::output::{ratio, to_json, Format};
use crate::Status;

#[derive(clap::Args)]
pub struct Args {
    /// Corpus manifest.
    #[arg(long)]
    corpus: PathBuf,
    /// `self` for the bundled detectors, or a tool report JSON file.
    #[arg(long, default_value = "self")]
    tool: String,
    /// JSON object mapping a tool's rule names to catalog ids.
    #[arg(long, value_name = "FILE")]
    id_map: Option<PathBuf>,
    /// Also report crafted and non-crafted entries separately.
    #[arg(long)]
    split_crafted: bool,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Exit 1 when micro precision is below this, or undefined.
    #[arg(long, value_name = "RATIO")]
    min_precision: Option<f64>,
    /// Exit 1 when micro recall is below this, or undefined.
    #[arg(long, value_name = "RATIO")]
    min_recall: Option<f64>,
}

fn below(value: Option<f64>, gate: Option<f64>) -> bool {
    gate.is_some_and(|g| value.is_none_or(|v| v < g))
}

pub fn run(args: Args, catalog: &Catalog) -> anyhow::Result<Status> {
    let manifest = load_manifest_with(&args.corpus, catalog)?;
    let report = if args.tool == "self" {
        self_report(&manifest)?
    } else {
        let path = PathBuf::from(&args.tool);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("tool report {}", path.display()))?;
        let id_map: Option<BTreeMap<String, String>> = match &args.id_map {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("id map {}", p.display()))?;
                Some(serde_json::from_str(&text).with_context(|| {
                    format!("id map {}: expected an object of strings", p.display())
                })?)
            }
            None => None,
        };
        import_report(&text, id_map.as_ref(), catalog)
            .with_context(|| format!("{}", path.display()))?
    };
    if report.claims.is_empty() {
        bail!("tool report claims no bug kinds");
    }

    let headline: MetricsReport;
    if args.split_crafted {
        let split = evaluate_split(&report, &manifest.entries, catalog);
        match args.format {
            Format::Json => println!("{}", to_json(&split)),
            Format::Text => {
                for (name, r) in [
                    ("all", &split.all),
                    ("non-crafted", &split.non_crafted),
                    ("crafted", &split.crafted),
                ] {
                    println!("== {name} ==");
                    print!("{}", r.to_text());
                }
            }
        }
        headline = split.all;
    } else {
        headline = evaluate(&report, &manifest.entries, catalog);
        match args.format {
            Format::Json => println!("{}", to_json(&headline)),
            Format::Text => print!("{}", headline.to_text()),
        }
    }

    let mut failed = false;
    if below(headline.micro.precision, args.min_precision) {
        eprintln!(
            "gate: precision {} is below {}",
            ratio(headline.micro.precision),
            args.min_precision.unwrap_or_default()
        );
        failed = true;
    }
    if below(headline.micro.recall, args.min_recall) {
        eprintln!(
            "gate: recall {} is below {}",
            ratio(headline.micro.recall),
            args.min_recall.unwrap_or_default()
        );
        failed = true;
    }
    Ok(if failed {
        Status::Flagged
    } else {
        Status::Clean
    })
}
