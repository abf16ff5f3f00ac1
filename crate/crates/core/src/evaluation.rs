//! Scoring a tool against the labeled corpus.
//!
//! Findings and labels are compared as `(file, bug_id)` pairs: a labeled
//! pair with a matching finding is a true positive, a labeled pair without
//! one is a false negative and a finding with no label is a false positive.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusEntry, CorpusManifest, EntryKind};
use crate::detectors::{all_detector_ids, detect_all};
use crate::frontend::parse;
use crate::taxonomy::{Catalog, KIND_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReportFinding {
    pub file: String,
    pub bug_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolReport {
    pub tool_name: String,
    pub claims: BTreeSet<String>,
    #[serde(default)]
    pub findings: Vec<ReportFinding>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid tool report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report uses ids missing from the catalog: {}; map them with an id map", .0.join(", "))]
    UnknownIds(Vec<String>),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Parses an external report and translates foreign rule names through
/// `id_map`. Any id that is still not a catalog id is an error.
pub fn import_report(
    json: &str,
    id_map: Option<&BTreeMap<String, String>>,
    catalog: &Catalog,
) -> Result<ToolReport, EvalError> {
    let mut report: ToolReport = serde_json::from_str(json)?;
    let translate = |id: &str| {
        id_map
            .and_then(|m| m.get(id))
            .cloned()
            .unwrap_or_else(|| id.to_string())
    };
    report.claims = report.claims.iter().map(|c| translate(c)).collect();
    for f in &mut report.findings {
        f.bug_id = translate(&f.bug_id);
    }
    let unknown: BTreeSet<String> = report
        .claims
        .iter()
        .chain(report.findings.iter().map(|f| &f.bug_id))
        .filter(|id| !catalog.contains(id))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownIds(unknown.into_iter().collect()));
    }
    Ok(report)
}

/// Runs the bundled detectors over every manifest entry.
pub fn self_report(manifest: &CorpusManifest) -> Result<ToolReport, EvalError> {
    let enabled = all_detector_ids();
    let mut findings = Vec::new();
    for entry in &manifest.entries {
        let path = manifest.resolve(entry);
        let src = std::fs::read_to_string(&path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let model = parse(&src, &entry.path);
        findings.extend(
            detect_all(&model, &enabled)
                .into_iter()
                .map(|f| ReportFinding {
                    file: f.file,
                    bug_id: f.bug_id,
                }),
        );
    }
    Ok(ToolReport {
        tool_name: "solbug".to_string(),
        claims: enabled,
        findings,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Confusion {
    pub per_kind: BTreeMap<String, ConfusionCounts>,
    pub total: ConfusionCounts,
    pub warnings: Vec<String>,
}

fn normalize_path(p: &str) -> String {
    let p = p.replace('\\', "/");
    p.strip_prefix("./").unwrap_or(&p).to_string()
}

/// Maps a reported file to a manifest path: exact match, or a reported
/// path ending in `/<entry path>`.
fn resolve_file<'e>(file: &str, entries: &[&'e CorpusEntry]) -> Option<&'e str> {
    let file = normalize_path(file);
    entries
        .iter()
        .map(|e| e.path.as_str())
        .find(|p| *p == file || file.ends_with(&format!("/{p}")))
}

/// Confusion counts of `findings` against the labels of `entries`.
pub fn match_findings(findings: &[ReportFinding], entries: &[&CorpusEntry]) -> Confusion {
    let mut warnings = Vec::new();
    let labeled: BTreeSet<(&str, &str)> = entries
        .iter()
        .flat_map(|e| e.labels.iter().map(move |l| (e.path.as_str(), l.as_str())))
        .collect();
    let mut found: BTreeSet<(&str, &str)> = BTreeSet::new();
    for f in findings {
        match resolve_file(&f.file, entries) {
            Some(path) => {
                found.insert((path, f.bug_id.as_str()));
            }
            None => warnings.push(format!(
                "finding in `{}` is outside the corpus; ignored",
                f.file
            )),
        }
    }
    warnings.sort();
    warnings.dedup();

    let mut per_kind: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for pair @ (_, id) in &labeled {
        let c = per_kind.entry(id.to_string()).or_default();
        if found.contains(pair) {
            c.tp += 1;
        } else {
            c.fn_ += 1;
        }
    }
    for pair @ (_, id) in &found {
        if !labeled.contains(pair) {
            per_kind.entry(id.to_string()).or_default().fp += 1;
        }
    }
    let mut total = ConfusionCounts::default();
    for c in per_kind.values() {
        total += *c;
    }
    Confusion {
        per_kind,
        total,
        warnings,
    }
}

/// `tp / (tp + fp)`, or `None` when nothing was reported.
pub fn precision(c: &ConfusionCounts) -> Option<f64> {
    let d = c.tp + c.fp;
    (d > 0).then(|| c.tp as f64 / d as f64)
}

/// `tp / (tp + fn)`, or `None` when nothing was labeled.
pub fn recall(c: &ConfusionCounts) -> Option<f64> {
    let d = c.tp + c.fn_;
    (d > 0).then(|| c.tp as f64 / d as f64)
}

/// Share of the catalog a tool claims to detect. Claims outside the
/// catalog are dropped and returned as warnings.
pub fn coverage(claims: &BTreeSet<String>, catalog: &Catalog) -> (f64, Vec<String>) {
    let mut warnings = Vec::new();
    let mut known = 0usize;
    for c in claims {
        if catalog.contains(c) {
            known += 1;
        } else {
            warnings.push(format!("claim `{c}` is not a catalog id; ignored"));
        }
    }
    (known as f64 / KIND_COUNT as f64, warnings)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub counts: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl Metrics {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        Metrics {
            counts,
            precision: precision(&counts),
            recall: recall(&counts),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub tool_name: String,
    pub coverage: f64,
    pub claims: BTreeSet<String>,
    /// Number of corpus entries relevant to at least one claimed kind.
    pub scope_entries: usize,
    pub per_kind: BTreeMap<String, Metrics>,
    /// Pooled counts over all kinds.
    pub micro: Metrics,
    /// Mean of the defined per-kind values.
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub warnings: Vec<String>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Scores `tool` on the entries relevant to what it claims. Labels and
/// findings of unclaimed kinds are left out.
pub fn evaluate(tool: &ToolReport, entries: &[CorpusEntry], catalog: &Catalog) -> MetricsReport {
    let (coverage, mut warnings) = coverage(&tool.claims, catalog);
    let claimed = |id: &str| tool.claims.contains(id);

    let scoped: Vec<CorpusEntry> = entries
        .iter()
        .filter(|e| e.relevant_ids().iter().any(|id| claimed(id)))
        .map(|e| CorpusEntry {
            labels: e.labels.iter().filter(|l| claimed(l)).cloned().collect(),
            ..e.clone()
        })
        .collect();
    let scoped_refs: Vec<&CorpusEntry> = scoped.iter().collect();
    let all_refs: Vec<&CorpusEntry> = entries.iter().collect();

    // Findings outside the scope but inside the corpus are dropped quietly;
    // only files the corpus does not know about are worth a warning.
    let findings: Vec<ReportFinding> = tool
        .findings
        .iter()
        .filter(|f| claimed(&f.bug_id))
        .filter(|f| {
            if resolve_file(&f.file, &scoped_refs).is_some() {
                return true;
            }
            if resolve_file(&f.file, &all_refs).is_none() {
                warnings.push(format!(
                    "finding in `{}` is outside the corpus; ignored",
                    f.file
                ));
            }
            false
        })
        .cloned()
        .collect();
    let unclaimed = tool.findings.iter().filter(|f| !claimed(&f.bug_id)).count();
    if unclaimed > 0 {
        warnings.push(format!("{unclaimed} finding(s) of unclaimed kinds ignored"));
    }

    let confusion = match_findings(&findings, &scoped_refs);
    warnings.extend(confusion.warnings);
    warnings.sort();
    warnings.dedup();
    let per_kind: BTreeMap<String, Metrics> = confusion
        .per_kind
        .into_iter()
        .map(|(k, c)| (k, Metrics::from_counts(c)))
        .collect();
    MetricsReport {
        tool_name: tool.tool_name.clone(),
        coverage,
        claims: tool.claims.clone(),
        scope_entries: scoped.len(),
        macro_precision: mean(per_kind.values().map(|m| m.precision)),
        macro_recall: mean(per_kind.values().map(|m| m.recall)),
        micro: Metrics::from_counts(confusion.total),
        per_kind,
        warnings,
    }
}

/// Metrics over the whole corpus and over its crafted and non-crafted parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub all: MetricsReport,
    pub non_crafted: MetricsReport,
    pub crafted: MetricsReport,
}

pub fn evaluate_split(
    tool: &ToolReport,
    entries: &[CorpusEntry],
    catalog: &Catalog,
) -> SplitReport {
    let (crafted, plain): (Vec<CorpusEntry>, Vec<CorpusEntry>) = entries
        .iter()
        .cloned()
        .partition(|e| e.kind == EntryKind::Crafted);
    let all_refs: Vec<&CorpusEntry> = entries.iter().collect();
    // Each half sees its own findings plus those matching no entry at all,
    // so files of the other half are not reported as strays.
    let restrict = |part: &[CorpusEntry]| {
        let refs: Vec<&CorpusEntry> = part.iter().collect();
        ToolReport {
            findings: tool
                .findings
                .iter()
                .filter(|f| {
                    resolve_file(&f.file, &refs).is_some()
                        || resolve_file(&f.file, &all_refs).is_none()
                })
                .cloned()
                .collect(),
            ..tool.clone()
        }
    };
    SplitReport {
        all: evaluate(tool, entries, catalog),
        non_crafted: evaluate(&restrict(&plain), &plain, catalog),
        crafted: evaluate(&restrict(&crafted), &crafted, catalog),
    }
}

fn ratio(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
}

impl MetricsReport {
    /// Aligned-column table with the same content as the JSON form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let claims: Vec<&str> = self.claims.iter().map(String::as_str).collect();
        let _ = writeln!(out, "tool: {}", self.tool_name);
        let _ = writeln!(
            out,
            "coverage: {:.4} ({}/{KIND_COUNT})",
            self.coverage,
            (self.coverage * KIND_COUNT as f64).round() as usize
        );
        let _ = writeln!(out, "claims: {}", claims.join(", "));
        let _ = writeln!(out, "scope entries: {}", self.scope_entries);
        let _ = writeln!(
            out,
            "{:<10} {:>4} {:>4} {:>4} {:>10} {:>10}",
            "bug_id", "tp", "fp", "fn", "precision", "recall"
        );
        let mut row = |name: &str, m: &Metrics| {
            let _ = writeln!(
                out,
                "{:<10} {:>4} {:>4} {:>4} {:>10} {:>10}",
                name,
                m.counts.tp,
                m.counts.fp,
                m.counts.fn_,
                ratio(m.precision),
                ratio(m.recall)
            );
        };
        for (k, m) in &self.per_kind {
            row(k, m);
        }
        row("micro", &self.micro);
        let _ = writeln!(
            out,
            "{:<10} {:>4} {:>4} {:>4} {:>10} {:>10}",
            "macro",
            "",
            "",
            "",
            ratio(self.macro_precision),
            ratio(self.macro_recall)
        );
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
