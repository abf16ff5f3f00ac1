use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::bail;
use rayon::prelude::*;
use serde::Serialize;
use solbug_core::detectors::{all_detector_ids, detect_with, sort_findings, Finding, Options};
use solbug_core::frontend::{parse, Diagnostic};
use solbug_core::taxonomy::{Catalog, Severity};
use walkdir::WalkDir;

use crate::output::{to_json, Format};
use crate::Status;

#[derive(clap::Args)]
pub struct Args {
    /// Files or directories; directories are searched for .sol files.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Comma-separated bug ids to check, or `all`.
    #[arg(long, default_value = "all")]
    rules: String,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Exit 1 when anything is found.
    #[arg(long)]
    strict: bool,
    /// Exit 1 when a finding is at least this severe.
    #[arg(long, value_name = "SEVERITY")]
    fail_on: Option<Severity>,
    /// Also flag unchecked unsigned-to-signed conversions.
    #[arg(long)]
    signed_from_unsigned: bool,
}

/// A finding with its catalog severity attached.
#[derive(Serialize)]
struct Reported<'a> {
    #[serde(flatten)]
    finding: &'a Finding,
    severity: Severity,
}

pub fn parse_rules(spec: &str, catalog: &Catalog) -> anyhow::Result<BTreeSet<String>> {
    let available = all_detector_ids();
    if spec.trim() == "all" {
        return Ok(available);
    }
    let mut rules = BTreeSet::new();
    for id in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if !catalog.contains(id) {
            bail!("unknown bug id `{id}`");
        }
        if !available.contains(id) {
            bail!(
                "no detector for `{id}`; detectable ids: {}",
                available.into_iter().collect::<Vec<_>>().join(", ")
            );
        }
        rules.insert(id.to_string());
    }
    if rules.is_empty() {
        bail!("--rules selects nothing");
    }
    Ok(rules)
}

/// Expands arguments into a sorted, deduplicated file list. Missing or
/// unreadable paths come back as errors instead.
fn collect_files(paths: &[PathBuf]) -> (Vec<PathBuf>, Vec<String>) {
    let mut files = BTreeSet::new();
    let mut errors = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in WalkDir::new(p).sort_by_file_name() {
                match entry {
                    Ok(e)
                        if e.file_type().is_file()
                            && e.path().extension().is_some_and(|x| x == "sol") =>
                    {
                        files.insert(e.into_path());
                    }
                    Ok(_) => {}
                    Err(e) => errors.push(format!("{}: {e}", p.display())),
                }
            }
        } else if p.exists() {
            files.insert(p.clone());
        } else {
            errors.push(format!("{}: no such file or directory", p.display()));
        }
    }
    (files.into_iter().collect(), errors)
}

struct FileResult {
    findings: Vec<Finding>,
    diagnostics: Vec<Diagnostic>,
    error: Option<String>,
}

fn scan_file(path: &Path, rules: &BTreeSet<String>, options: &Options) -> FileResult {
    let name = path.display().to_string();
    match std::fs::read(path) {
        Ok(bytes) => {
            let src = String::from_utf8_lossy(&bytes);
            let model = parse(&src, &name);
            FileResult {
                findings: detect_with(&model, rules, options),
                diagnostics: model.diagnostics,
                error: None,
            }
        }
        Err(e) => FileResult {
            findings: vec![],
            diagnostics: vec![],
            error: Some(format!("{name}: {e}")),
        },
    }
}

pub fn run(args: Args, catalog: &Catalog) -> anyhow::Result<Status> {
    let rules = parse_rules(&args.rules, catalog)?;
    let options = Options {
        signed_from_unsigned: args.signed_from_unsigned,
    };
    let (files, mut errors) = collect_files(&args.paths);
    let results: Vec<(PathBuf, FileResult)> = files
        .par_iter()
        .map(|f| (f.clone(), scan_file(f, &rules, &options)))
        .collect();

    let mut findings = Vec::new();
    for (path, r) in results {
        for d in &r.diagnostics {
            eprintln!("{}:{}: warning: {}", path.display(), d.span, d.message);
        }
        errors.extend(r.error);
        findings.extend(r.findings);
    }
    sort_findings(&mut findings);

    let severity = |f: &Finding| catalog.get(&f.bug_id).map_or(Severity::Low, |k| k.severity);
    match args.format {
        Format::Json => {
            let reported: Vec<Reported> = findings
                .iter()
                .map(|f| Reported {
                    finding: f,
                    severity: severity(f),
                })
                .collect();
            println!("{}", to_json(&reported));
        }
        Format::Text => {
            for f in &findings {
                println!(
                    "{}:{}: {} {} {}",
                    f.file,
                    f.span,
                    f.bug_id,
                    severity(f),
                    f.message
                );
            }
        }
    }

    if !errors.is_empty() {
        for e in &errors {
            eprintln!("error: {e}");
        }
        bail!("{} path(s) could not be scanned", errors.len());
    }
    let flagged = (args.strict && !findings.is_empty())
        || args
            .fail_on
            .is_some_and(|t| findings.iter().any(|f| severity(f).at_least(t)));
    Ok(if flagged {
        Status::Flagged
    } else {
        Status::Clean
    })
}
