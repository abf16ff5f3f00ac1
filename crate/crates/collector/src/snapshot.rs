use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::CollectorError;

/// One watched project as of the latest poll.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectSnapshot {
    /// `host/owner/name`, lowercase.
    pub id: String,
    pub last_update: DateTime<Utc>,
    /// Every keyword whose results included the project, sorted.
    pub matched_keywords: Vec<String>,
}

/// Normalizes a repository URL or `owner/name` pair to `host/owner/name`.
/// Returns `None` for anything that is not exactly one repository.
pub fn normalize_project_id(raw: &str, default_host: &str) -> Option<String> {
    let s = raw.trim();
    let s = s.split_once("://").map_or(s, |(_, rest)| rest);
    let s = s.trim_end_matches('/');
    let s = s.strip_suffix(".git").unwrap_or(s);
    let parts: Vec<&str> = s.split('/').collect();
    let parts = match parts.len() {
        2 => vec![default_host, parts[0], parts[1]],
        3 => parts,
        _ => return None,
    };
    if parts
        .iter()
        .any(|p| p.is_empty() || p.chars().any(char::is_whitespace))
    {
        return None;
    }
    Some(parts.join("/").to_ascii_lowercase())
}

/// Project ids that changed between two snapshots, each list sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub added: Vec<String>,
    pub updated: Vec<String>,
    pub removed: Vec<String>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.updated.is_empty() && self.removed.is_empty()
    }

    pub fn len(&self) -> usize {
        self.added.len() + self.updated.len() + self.removed.len()
    }
}

pub fn diff(previous: &[ProjectSnapshot], current: &[ProjectSnapshot]) -> ChangeSet {
    let prev: BTreeMap<&str, &ProjectSnapshot> =
        previous.iter().map(|p| (p.id.as_str(), p)).collect();
    let cur: BTreeMap<&str, &ProjectSnapshot> =
        current.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut changes = ChangeSet::default();
    for (id, p) in &cur {
        match prev.get(id) {
            None => changes.added.push(id.to_string()),
            Some(old) if p.last_update > old.last_update => changes.updated.push(id.to_string()),
            Some(_) => {}
        }
    }
    changes.removed = prev
        .keys()
        .filter(|id| !cur.contains_key(*id))
        .map(|id| id.to_string())
        .collect();
    changes
}

/// Persisted watcher state: the last delivered snapshot and when it was taken.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatchState {
    pub cursor: Option<DateTime<Utc>>,
    pub projects: Vec<ProjectSnapshot>,
}

impl WatchState {
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for p in &self.projects {
            if !seen.insert(p.id.as_str()) {
                return Err(format!("duplicate project id {}", p.id));
            }
        }
        Ok(())
    }

    /// Canonical serialization: projects sorted by id, pretty JSON, trailing newline.
    pub fn to_json(&self) -> String {
        let mut sorted = self.clone();
        sorted.projects.sort_by(|a, b| a.id.cmp(&b.id));
        let mut out = serde_json::to_string_pretty(&sorted).expect("state serializes");
        out.push('\n');
        out
    }
}

/// Reads the state file. A missing file is an empty state.
pub fn load_state(path: &Path) -> Result<WatchState, CollectorError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(WatchState::default()),
        Err(e) => return Err(CollectorError::State(format!("{}: {e}", path.display()))),
    };
    let state: WatchState = serde_json::from_str(&text)
        .map_err(|e| CollectorError::State(format!("{}: {e}", path.display())))?;
    state
        .validate()
        .map_err(|e| CollectorError::State(format!("{}: {e}", path.display())))?;
    Ok(state)
}

/// Scratch file a save writes before renaming over `path`. A process
/// killed mid-save leaves at most this file behind.
pub fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map_or_else(|| "state".into(), |n| n.to_string_lossy().into_owned());
    path.with_file_name(format!(".{name}.tmp"))
}

/// Writes the state atomically: temp file, fsync, rename, fsync directory.
pub fn save_state(path: &Path, state: &WatchState) -> Result<(), CollectorError> {
    write_atomic(path, state.to_json().as_bytes())
        .map_err(|e| CollectorError::State(format!("{}: {e}", path.display())))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = temp_path(path);
    {
        let mut f = OpenOptions::new()
            .write(true)
            .create(true)
            .truncate(true)
            .open(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    #[cfg(unix)]
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        File::open(dir)?.sync_all()?;
    }
    Ok(())
}
