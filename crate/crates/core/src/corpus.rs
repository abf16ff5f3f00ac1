//! Labeled fixture corpus: manifest loading, validation and selection.
//!
//! A manifest is JSON, either a bare array of entries or an object
//! `{"schema_version": "...", "entries": [...]}`. Paths are relative to the
//! manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::frontend::{parse, PragmaConstraint};
use crate::taxonomy::Catalog;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Buggy,
    Fixed,
    Crafted,
}

impl EntryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::Buggy => "buggy",
            EntryKind::Fixed => "fixed",
            EntryKind::Crafted => "crafted",
        }
    }
}

impl std::str::FromStr for EntryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "buggy" => Ok(EntryKind::Buggy),
            "fixed" => Ok(EntryKind::Fixed),
            "crafted" => Ok(EntryKind::Crafted),
            _ => Err(format!(
                "unknown entry kind `{s}` (expected buggy, fixed or crafted)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Unchanged,
    Modified,
    Handwritten,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Unchanged => "unchanged",
            Origin::Modified => "modified",
            Origin::Handwritten => "handwritten",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub path: String,
    pub solidity_versions: PragmaConstraint,
    pub kind: EntryKind,
    pub origin: Origin,
    pub strategy: Option<u8>,
    pub labels: BTreeSet<String>,
    #[serde(default)]
    pub notes: String,
    /// Bug kind the fixture exercises, whether or not it is present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Kinds the bundled detectors are expected to report on this file.
    /// Defaults to `labels`; differs on fixtures that document a known
    /// miss or false positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_findings: Option<BTreeSet<String>>,
}

impl CorpusEntry {
    pub fn expected(&self) -> &BTreeSet<String> {
        self.expected_findings.as_ref().unwrap_or(&self.labels)
    }

    /// Labels plus the target: every kind this entry is relevant to.
    pub fn relevant_ids(&self) -> BTreeSet<&str> {
        self.labels
            .iter()
            .map(String::as_str)
            .chain(self.target.as_deref())
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub by_kind: BTreeMap<String, usize>,
    pub by_origin: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub schema_version: String,
    pub entries: Vec<CorpusEntry>,
    pub counts: Counts,
    /// Directory entry paths are resolved against.
    pub root: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read manifest `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("manifest has {} problem(s):\n  {}", .0.len(), .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Serialize)]
struct Canonical<'a> {
    schema_version: &'a str,
    entries: &'a [CorpusEntry],
}

impl CorpusManifest {
    /// Builds a manifest from entries without touching the filesystem.
    pub fn from_entries(schema_version: &str, entries: Vec<CorpusEntry>, root: PathBuf) -> Self {
        let mut counts = Counts::default();
        for e in &entries {
            *counts
                .by_kind
                .entry(e.kind.as_str().to_string())
                .or_default() += 1;
            *counts
                .by_origin
                .entry(e.origin.as_str().to_string())
                .or_default() += 1;
        }
        CorpusManifest {
            schema_version: schema_version.to_string(),
            entries,
            counts,
            root,
        }
    }

    pub fn resolve(&self, entry: &CorpusEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn entry(&self, path: &str) -> Option<&CorpusEntry> {
        self.entries.iter().find(|e| e.path == path)
    }

    /// Canonical JSON form. Loading it again yields an equal manifest.
    pub fn to_json(&self) -> String {
        let c = Canonical {
            schema_version: &self.schema_version,
            entries: &self.entries,
        };
        serde_json::to_string_pretty(&c).expect("manifest serializes") + "\n"
    }
}

pub fn load_manifest(path: &Path) -> Result<CorpusManifest, ManifestError> {
    load_manifest_with(path, Catalog::builtin())
}

pub fn load_manifest_with(path: &Path, catalog: &Catalog) -> Result<CorpusManifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = parse_manifest(&text, root)?;
    let mut problems = validate_entries(&manifest.entries, catalog);
    for e in &manifest.entries {
        match std::fs::read_to_string(manifest.resolve(e)) {
            Ok(src) => {
                // Parsing never fails; this only surfaces structural trouble.
                let model = parse(&src, &e.path);
                if model.contracts.is_empty() {
                    problems.push(format!("`{}`: no contract found", e.path));
                }
            }
            Err(err) => problems.push(format!("`{}`: fixture not readable: {err}", e.path)),
        }
    }
    if problems.is_empty() {
        Ok(manifest)
    } else {
        Err(ManifestError::Invalid(problems))
    }
}

/// Parses manifest JSON, reporting every malformed entry at once.
pub fn parse_manifest(text: &str, root: PathBuf) -> Result<CorpusManifest, ManifestError> {
    let value: Value = serde_json::from_str(text)?;
    let (schema_version, raw_entries) = match value {
        Value::Array(items) => (SCHEMA_VERSION.to_string(), items),
        Value::Object(mut obj) => {
            let version = match obj.remove("schema_version") {
                Some(Value::String(s)) => s,
                Some(other) => {
                    return Err(ManifestError::Invalid(vec![format!(
                        "schema_version must be a string, found {other}"
                    )]))
                }
                None => SCHEMA_VERSION.to_string(),
            };
            match obj.remove("entries") {
                Some(Value::Array(items)) => (version, items),
                _ => {
                    return Err(ManifestError::Invalid(vec![
                        "manifest object needs an `entries` array".to_string(),
                    ]))
                }
            }
        }
        _ => {
            return Err(ManifestError::Invalid(vec![
                "manifest must be an array of entries or an object with `entries`".to_string(),
            ]))
        }
    };
    let mut entries = Vec::with_capacity(raw_entries.len());
    let mut problems = Vec::new();
    for (i, raw) in raw_entries.into_iter().enumerate() {
        let label = raw
            .get("path")
            .and_then(Value::as_str)
            .map_or_else(|| format!("entry {i}"), |p| format!("entry {i} (`{p}`)"));
        match serde_json::from_value::<CorpusEntry>(raw) {
            Ok(e) => entries.push(e),
            Err(err) => problems.push(format!("{label}: {err}")),
        }
    }
    if !problems.is_empty() {
        return Err(ManifestError::Invalid(problems));
    }
    Ok(CorpusManifest::from_entries(&schema_version, entries, root))
}

/// Semantic checks that need no filesystem access.
pub fn validate_entries(entries: &[CorpusEntry], catalog: &Catalog) -> Vec<String> {
    let mut problems = Vec::new();
    let mut seen = BTreeSet::new();
    for e in entries {
        let name = &e.path;
        if !seen.insert(name.as_str()) {
            problems.push(format!("`{name}`: duplicate path"));
        }
        match (e.kind, e.strategy) {
            (EntryKind::Crafted, None) => problems.push(format!(
                "`{name}`: crafted entry needs a strategy (1, 2 or 3)"
            )),
            (EntryKind::Crafted, Some(s)) if !(1..=3).contains(&s) => {
                problems.push(format!("`{name}`: strategy {s} is not 1, 2 or 3"))
            }
            (kind @ (EntryKind::Buggy | EntryKind::Fixed), Some(s)) => problems.push(format!(
                "`{name}`: strategy {s} is only allowed on crafted entries, not {}",
                kind.as_str()
            )),
            _ => {}
        }
        if e.kind == EntryKind::Fixed {
            match &e.target {
                Some(t) if e.labels.contains(t) => problems.push(format!(
                    "`{name}`: fixed entry is labeled with its own target `{t}`"
                )),
                None if !e.labels.is_empty() => problems.push(format!(
                    "`{name}`: fixed entry without a target must have no labels"
                )),
                _ => {}
            }
        }
        let ids = e
            .labels
            .iter()
            .chain(e.target.iter())
            .chain(e.expected_findings.iter().flatten());
        for id in ids {
            if !catalog.contains(id) {
                problems.push(format!("`{name}`: unknown bug id `{id}`"));
            }
        }
    }
    problems
}

/// Conjunction of optional clauses; an empty filter selects everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Filter {
    /// Matches entries labeled with, or targeting, this kind.
    pub bug_id: Option<String>,
    pub kind: Option<EntryKind>,
    pub strategy: Option<u8>,
}

pub fn select<'m>(manifest: &'m CorpusManifest, filter: &Filter) -> Vec<&'m CorpusEntry> {
    manifest
        .entries
        .iter()
        .filter(|e| {
            filter
                .bug_id
                .as_deref()
                .is_none_or(|id| e.relevant_ids().contains(id))
        })
        .filter(|e| filter.kind.is_none_or(|k| e.kind == k))
        .filter(|e| filter.strategy.is_none_or(|s| e.strategy == Some(s)))
        .collect()
}

impl fmt::Display for Counts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |m: &BTreeMap<String, usize>| {
            m.iter()
                .map(|(k, v)| format!("{k}:{v}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        write!(
            f,
            "kinds {{{}}} origins {{{}}}",
            join(&self.by_kind),
            join(&self.by_origin)
        )
    }
}
