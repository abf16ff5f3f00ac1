use std::io::Write;
use std::time::Duration;

use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::json;

use crate::client::http_agent;
use crate::snapshot::ChangeSet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NotifyError {
    #[error("webhook returned HTTP {0}")]
    Status(u16),
    #[error("webhook unreachable: {0}")]
    Transport(String),
    #[error("could not write notification: {0}")]
    Io(String),
}

pub trait Notifier {
    fn deliver(&mut self, changes: &ChangeSet, at: DateTime<Utc>) -> Result<(), NotifyError>;
}

pub fn timestamp(at: DateTime<Utc>) -> String {
    at.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// One line per changed project: `<at> <added|updated|removed> <id>`.
pub fn summary_lines(changes: &ChangeSet, at: DateTime<Utc>) -> Vec<String> {
    let at = timestamp(at);
    let groups = [
        ("added", &changes.added),
        ("updated", &changes.updated),
        ("removed", &changes.removed),
    ];
    groups
        .into_iter()
        .flat_map(|(what, ids)| ids.iter().map(move |id| (what, id)))
        .map(|(what, id)| format!("{at} {what} {id}"))
        .collect()
}

/// Webhook payload. Keys serialize in sorted order.
pub fn webhook_body(changes: &ChangeSet, at: DateTime<Utc>) -> serde_json::Value {
    json!({
        "added": changes.added,
        "updated": changes.updated,
        "removed": changes.removed,
        "at": timestamp(at),
    })
}

pub struct StdoutNotifier<W: Write> {
    out: W,
}

impl<W: Write> StdoutNotifier<W> {
    pub fn new(out: W) -> Self {
        StdoutNotifier { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Notifier for StdoutNotifier<W> {
    fn deliver(&mut self, changes: &ChangeSet, at: DateTime<Utc>) -> Result<(), NotifyError> {
        for line in summary_lines(changes, at) {
            writeln!(self.out, "{line}").map_err(|e| NotifyError::Io(e.to_string()))?;
        }
        self.out.flush().map_err(|e| NotifyError::Io(e.to_string()))
    }
}

pub struct WebhookNotifier {
    agent: ureq::Agent,
    url: String,
}

impl WebhookNotifier {
    pub fn new(url: &str, timeout: Duration) -> Self {
        WebhookNotifier {
            agent: http_agent(timeout),
            url: url.to_string(),
        }
    }
}

impl Notifier for WebhookNotifier {
    fn deliver(&mut self, changes: &ChangeSet, at: DateTime<Utc>) -> Result<(), NotifyError> {
        let resp = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send(webhook_body(changes, at).to_string())
            .map_err(|e| NotifyError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if (200..300).contains(&status) {
            Ok(())
        } else {
            Err(NotifyError::Status(status))
        }
    }
}
