//! Bug-kind catalog, severity rubric and bug-record merging.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::frontend::PragmaConstraint;

pub const KIND_COUNT: usize = 49;
pub const CATEGORY_COUNT: usize = 9;

const BUILTIN_CATALOG: &str = include_str!("../data/catalog.json");

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("cannot grade an empty effect set")]
    NoEffects,
    #[error("effects {0:?} fall outside the severity rubric")]
    Ungradeable(Vec<Effect>),
    #[error("catalog: {0}")]
    Invalid(String),
    #[error("catalog: {0}")]
    Json(#[from] serde_json::Error),
    #[error("catalog `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Critical,
    High,
    Middle,
    Low,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Critical => "Critical",
            Severity::High => "High",
            Severity::Middle => "Middle",
            Severity::Low => "Low",
        }
    }

    /// True when `self` is as severe as `threshold` or worse.
    pub fn at_least(self, threshold: Severity) -> bool {
        self <= threshold
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "critical" => Ok(Severity::Critical),
            "high" => Ok(Severity::High),
            "middle" | "medium" => Ok(Severity::Middle),
            "low" => Ok(Severity::Low),
            _ => Err(format!("unknown severity `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EffectClass {
    Functionality,
    Performance,
    Security,
    Serviceability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certainty {
    May,
    Must,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Effect {
    pub class: EffectClass,
    pub certainty: Certainty,
}

impl Effect {
    pub const fn new(class: EffectClass, certainty: Certainty) -> Self {
        Effect { class, certainty }
    }
}

/// Grades a set of effects. The first matching rule wins:
/// Critical, then High, then Middle, then Low.
pub fn grade_severity(effects: &[Effect]) -> Result<Severity, TaxonomyError> {
    use Certainty::*;
    use EffectClass::*;
    if effects.is_empty() {
        return Err(TaxonomyError::NoEffects);
    }
    let has = |class, certainty| effects.contains(&Effect::new(class, certainty));
    if has(Security, Must) {
        Ok(Severity::Critical)
    } else if has(Security, May) || has(Functionality, Must) {
        Ok(Severity::High)
    } else if has(Functionality, May) || has(Performance, Must) {
        Ok(Severity::Middle)
    } else if has(Performance, May) || has(Serviceability, Must) {
        Ok(Severity::Low)
    } else {
        Err(TaxonomyError::Ungradeable(effects.to_vec()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: String,
    pub name: String,
    pub definition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugKind {
    pub id: String,
    pub display_name: String,
    pub category: String,
    pub subcategory: String,
    pub severity: Severity,
    pub effects: Vec<Effect>,
    pub affected_versions: PragmaConstraint,
    pub has_detector: bool,
    pub criteria_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub catalog_version: String,
    pub categories: Vec<Category>,
    pub kinds: Vec<BugKind>,
}

impl Catalog {
    /// The catalog compiled into the library.
    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG
            .get_or_init(|| Catalog::from_json(BUILTIN_CATALOG).expect("bundled catalog is valid"))
    }

    pub fn load(path: &Path) -> Result<Catalog, TaxonomyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Catalog::from_json(&text)
    }

    /// Parses and validates a catalog. Kinds come back sorted by id.
    pub fn from_json(text: &str) -> Result<Catalog, TaxonomyError> {
        let mut catalog: Catalog = serde_json::from_str(text)?;
        catalog.kinds.sort_by(|a, b| a.id.cmp(&b.id));
        catalog.validate()?;
        Ok(catalog)
    }

    fn validate(&self) -> Result<(), TaxonomyError> {
        let mut problems = Vec::new();
        if self.categories.len() != CATEGORY_COUNT {
            problems.push(format!(
                "expected {CATEGORY_COUNT} categories, found {}",
                self.categories.len()
            ));
        }
        if self.kinds.len() != KIND_COUNT {
            problems.push(format!(
                "expected {KIND_COUNT} kinds, found {}",
                self.kinds.len()
            ));
        }
        let cat_ids: BTreeSet<&str> = self.categories.iter().map(|c| c.id.as_str()).collect();
        if cat_ids.len() != self.categories.len() {
            problems.push("duplicate category id".to_string());
        }
        for pair in self.kinds.windows(2) {
            if pair[0].id == pair[1].id {
                problems.push(format!("duplicate kind `{}`", pair[0].id));
            }
        }
        for kind in &self.kinds {
            let parts: Vec<&str> = kind.id.splitn(3, '-').collect();
            let well_formed = parts.len() == 3
                && parts[0] == kind.category
                && parts[1] == kind.subcategory
                && parts[1].len() == 1
                && parts[1].chars().all(|c| c.is_ascii_lowercase())
                && !parts[2].is_empty()
                && parts[2].chars().all(|c| c.is_ascii_uppercase());
            if !well_formed {
                problems.push(format!(
                    "`{}` does not match category-subcategory-name",
                    kind.id
                ));
            }
            if !cat_ids.contains(kind.category.as_str()) {
                problems.push(format!(
                    "`{}` has unknown category `{}`",
                    kind.id, kind.category
                ));
            }
            match grade_severity(&kind.effects) {
                Ok(s) if s == kind.severity => {}
                Ok(s) => problems.push(format!(
                    "`{}` is {} but its effects grade as {s}",
                    kind.id, kind.severity
                )),
                Err(e) => problems.push(format!("`{}`: {e}", kind.id)),
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(TaxonomyError::Invalid(problems.join("; ")))
        }
    }

    pub fn get(&self, id: &str) -> Option<&BugKind> {
        self.kinds
            .binary_search_by(|k| k.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.kinds[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn category(&self, id: &str) -> Option<&Category> {
        self.categories
            .iter()
            .find(|c| c.id.eq_ignore_ascii_case(id))
    }

    pub fn in_category<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a BugKind> + 'a {
        self.kinds
            .iter()
            .filter(move |k| k.category.eq_ignore_ascii_case(id))
    }

    pub fn detectable_ids(&self) -> BTreeSet<String> {
        self.kinds
            .iter()
            .filter(|k| k.has_detector)
            .map(|k| k.id.clone())
            .collect()
    }
}

/// All kinds of the bundled catalog, sorted by id.
pub fn catalog() -> &'static [BugKind] {
    &Catalog::builtin().kinds
}

/// One collected description of a bug.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugRecord {
    pub source: String,
    pub name: String,
    pub behavior: String,
    pub consequence: BTreeSet<String>,
    /// Every name folded into this record by merging.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub aliases: BTreeSet<String>,
    /// Set when records with different consequences were combined.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub merged: bool,
}

impl BugRecord {
    pub fn new(source: &str, name: &str, behavior: &str, consequence: &[&str]) -> Self {
        BugRecord {
            source: source.to_string(),
            name: name.to_string(),
            behavior: behavior.to_string(),
            consequence: consequence.iter().map(|c| c.to_string()).collect(),
            aliases: BTreeSet::new(),
            merged: false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if normalize_behavior(&self.behavior).is_empty() {
            return Err(format!("record `{}` has an empty behavior", self.name));
        }
        if self.consequence.is_empty() {
            return Err(format!("record `{}` has no consequence", self.name));
        }
        Ok(())
    }
}

/// Lowercases and collapses runs of whitespace.
pub fn normalize_behavior(behavior: &str) -> String {
    behavior
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Merges records describing the same behavior.
///
/// Records with different normalized behaviors are kept as they are. A group
/// sharing one behavior collapses to a single record whose consequences are
/// the union of the group's; the smallest name is kept and every name is
/// listed in `aliases`. `merged` is set when the consequences disagreed.
/// Output is sorted by normalized behavior.
pub fn merge_records(records: &[BugRecord]) -> Vec<BugRecord> {
    let mut groups: BTreeMap<String, Vec<&BugRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry(normalize_behavior(&r.behavior))
            .or_default()
            .push(r);
    }
    groups
        .into_values()
        .map(|group| {
            if group.len() == 1 {
                return group[0].clone();
            }
            let distinct: BTreeSet<&BTreeSet<String>> =
                group.iter().map(|r| &r.consequence).collect();
            let name = group
                .iter()
                .map(|r| &r.name)
                .min()
                .expect("non-empty")
                .clone();
            let behavior = group
                .iter()
                .map(|r| &r.behavior)
                .min()
                .expect("non-empty")
                .clone();
            let sources: BTreeSet<&str> = group
                .iter()
                .flat_map(|r| r.source.split(", "))
                .filter(|s| !s.is_empty())
                .collect();
            BugRecord {
                source: sources.into_iter().collect::<Vec<_>>().join(", "),
                name,
                behavior,
                consequence: group
                    .iter()
                    .flat_map(|r| r.consequence.iter().cloned())
                    .collect(),
                aliases: group
                    .iter()
                    .flat_map(|r| r.aliases.iter().cloned().chain([r.name.clone()]))
                    .collect(),
                merged: distinct.len() > 1 || group.iter().any(|r| r.merged),
            }
        })
        .collect()
}
