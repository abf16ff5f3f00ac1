use anyhow::bail;
use serde::Serialize;
use solbug_core::taxonomy::{BugKind, Catalog, Severity};

use crate::output::{to_json, Format};
use crate::Status;

#[derive(clap::Args)]
pub struct Args {
    /// List every kind (the default when no filter is given).
    #[arg(long)]
    list: bool,
    /// Only kinds in this category (A..I).
    #[arg(long, value_name = "ID")]
    category: Option<String>,
    /// Full details of one kind.
    #[arg(long, value_name = "ID", conflicts_with_all = ["list", "category"])]
    kind: Option<String>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Serialize)]
struct Row<'a> {
    id: &'a str,
    display_name: &'a str,
    category: &'a str,
    subcategory: &'a str,
    severity: Severity,
    affected_versions: String,
    has_detector: bool,
}

impl<'a> Row<'a> {
    fn new(k: &'a BugKind) -> Self {
        Row {
            id: &k.id,
            display_name: &k.display_name,
            category: &k.category,
            subcategory: &k.subcategory,
            severity: k.severity,
            affected_versions: k.affected_versions.to_string(),
            has_detector: k.has_detector,
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn print_rows(rows: &[Row]) {
    println!(
        "{:<8} {:<4} {:<4} {:<9} {:<10} {:<8} NAME",
        "ID", "CAT", "SUB", "SEVERITY", "VERSIONS", "DETECTOR"
    );
    for r in rows {
        println!(
            "{:<8} {:<4} {:<4} {:<9} {:<10} {:<8} {}",
            r.id,
            r.category,
            r.subcategory,
            r.severity,
            r.affected_versions,
            yes_no(r.has_detector),
            r.display_name
        );
    }
}

fn print_kind(k: &BugKind, catalog: &Catalog) {
    let category = catalog
        .category(&k.category)
        .map_or("", |c| c.name.as_str());
    println!("id: {}", k.id);
    println!("name: {}", k.display_name);
    println!("category: {} ({category})", k.category);
    println!("subcategory: {}", k.subcategory);
    println!("severity: {}", k.severity);
    let effects: Vec<String> = k
        .effects
        .iter()
        .map(|e| format!("{:?}/{:?}", e.class, e.certainty).to_lowercase())
        .collect();
    println!("effects: {}", effects.join(", "));
    println!("affected versions: {}", k.affected_versions);
    println!(
        "detector: {}",
        if k.has_detector {
            "available"
        } else {
            "not available"
        }
    );
    println!("criteria: {}", k.criteria_text);
}

pub fn run(args: Args, catalog: &Catalog) -> anyhow::Result<Status> {
    if let Some(id) = &args.kind {
        let Some(kind) = catalog.get(id) else {
            bail!("unknown bug id `{id}`");
        };
        match args.format {
            Format::Json => println!("{}", to_json(kind)),
            Format::Text => print_kind(kind, catalog),
        }
        return Ok(Status::Clean);
    }
    let kinds: Vec<&BugKind> = match &args.category {
        Some(c) => {
            if !catalog.categories.iter().any(|cat| &cat.id == c) {
                bail!("unknown category `{c}`; expected one of A..I");
            }
            catalog.in_category(c).collect()
        }
        None => catalog.kinds.iter().collect(),
    };
    let rows: Vec<Row> = kinds.into_iter().map(Row::new).collect();
    match args.format {
        Format::Json => println!("{}", to_json(&rows)),
        Format::Text => print_rows(&rows),
    }
    Ok(Status::Clean)
}
