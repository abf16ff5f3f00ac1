use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::CollectorError;

pub const DEFAULT_KEYWORDS: [&str; 6] = [
    "smart contract vulnerabilities",
    "smart contract bugs",
    "smart contract defects",
    "smart contract problems",
    "smart contract security",
    "smart contract analysis tools",
];

pub const DEFAULT_ENDPOINT: &str = "https://api.github.com/search/repositories";
pub const DEFAULT_TOKEN_ENV: &str = "GITHUB_TOKEN";
pub const DEFAULT_INTERVAL_SECS: u64 = 15 * 24 * 60 * 60;

/// Where change notifications go.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NotifyTarget {
    Stdout,
    Webhook(String),
}

/// Watcher configuration, read from a JSON file. Every field has a
/// default, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WatchConfig {
    pub keywords: Vec<String>,
    pub interval_secs: u64,
    /// Search endpoint. `http(s)://` URLs speak the GitHub search API;
    /// `file://` points at a recorded-response file.
    pub endpoint: String,
    /// Environment variable holding the bearer token. The token itself
    /// never lives in the config file.
    pub token_env: String,
    pub state_path: PathBuf,
    pub notify: NotifyTarget,
    pub per_page: u32,
    pub max_pages: u32,
    /// Attempts per request before a network error or rate limit is fatal.
    pub max_retries: u32,
    pub timeout_secs: u64,
}

impl Default for WatchConfig {
    fn default() -> Self {
        WatchConfig {
            keywords: DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect(),
            interval_secs: DEFAULT_INTERVAL_SECS,
            endpoint: DEFAULT_ENDPOINT.to_string(),
            token_env: DEFAULT_TOKEN_ENV.to_string(),
            state_path: PathBuf::from("solbug-watch-state.json"),
            notify: NotifyTarget::Stdout,
            per_page: 100,
            max_pages: 10,
            max_retries: 5,
            timeout_secs: 30,
        }
    }
}

impl WatchConfig {
    pub fn from_json(text: &str) -> Result<Self, CollectorError> {
        let config: WatchConfig =
            serde_json::from_str(text).map_err(|e| CollectorError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a config file. A relative `state_path` is resolved against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self, CollectorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CollectorError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_json(&text).map_err(|e| match e {
            CollectorError::Config(msg) => {
                CollectorError::Config(format!("{}: {msg}", path.display()))
            }
            other => other,
        })?;
        if config.state_path.is_relative() {
            if let Some(dir) = path.parent() {
                config.state_path = dir.join(&config.state_path);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CollectorError> {
        let bad = |msg: &str| Err(CollectorError::Config(msg.to_string()));
        if self.keywords.is_empty() {
            return bad("keywords must not be empty");
        }
        if self.keywords.iter().any(|k| k.trim().is_empty()) {
            return bad("keywords must not be blank");
        }
        if self.interval_secs == 0 {
            return bad("interval_secs must be positive");
        }
        if self.per_page == 0 || self.max_pages == 0 {
            return bad("per_page and max_pages must be positive");
        }
        if !is_url(&self.endpoint) && !self.endpoint.starts_with("file://") {
            return bad("endpoint must be an http(s):// or file:// URL");
        }
        if let NotifyTarget::Webhook(url) = &self.notify {
            if !is_url(url) {
                return bad("webhook must be an http(s):// URL");
            }
        }
        if self.state_path.as_os_str().is_empty() {
            return bad("state_path must not be empty");
        }
        Ok(())
    }

    pub fn interval(&self) -> Duration {
        Duration::from_secs(self.interval_secs)
    }

    /// Token from the configured environment variable; empty counts as unset.
    pub fn token(&self) -> Option<String> {
        std::env::var(&self.token_env)
            .ok()
            .filter(|t| !t.trim().is_empty())
    }
}

fn is_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://")
}

/// Human-readable duration: `15 days`, `1 day 6 hours`, `90 seconds`.
pub struct HumanDuration(pub Duration);

impl fmt::Display for HumanDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut secs = self.0.as_secs();
        let units = [
            ("day", 86_400),
            ("hour", 3_600),
            ("minute", 60),
            ("second", 1),
        ];
        let mut parts = Vec::new();
        for (name, size) in units {
            let n = secs / size;
            secs %= size;
            if n > 0 {
                parts.push(format!("{n} {name}{}", if n == 1 { "" } else { "s" }));
            }
        }
        if parts.is_empty() {
            return f.write_str("0 seconds");
        }
        f.write_str(&parts.join(" "))
    }
}
