//! Periodic watcher over a repository search API.
//!
//! A cycle queries every configured keyword, merges the hits into one
//! snapshot, diffs it against the persisted state and delivers the
//! changes. State only advances once delivery succeeds, and it is always
//! replaced by atomic rename, so a killed process leaves the previous
//! state readable.

mod client;
mod config;
mod notify;
mod snapshot;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use chrono::{DateTime, Utc};

pub use client::{
    file_endpoint, ClientError, GitHubClient, RawProject, ReplayClient, SearchClient, SearchPage,
};
pub use config::{
    HumanDuration, NotifyTarget, WatchConfig, DEFAULT_ENDPOINT, DEFAULT_INTERVAL_SECS,
    DEFAULT_KEYWORDS, DEFAULT_TOKEN_ENV,
};
pub use notify::{
    summary_lines, timestamp, webhook_body, Notifier, NotifyError, StdoutNotifier, WebhookNotifier,
};
pub use snapshot::{
    diff, load_state, normalize_project_id, save_state, temp_path, ChangeSet, ProjectSnapshot,
    WatchState,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CollectorError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("state file: {0}")]
    State(String),
    #[error("{0}")]
    Auth(String),
    #[error("query {keyword:?} failed after {attempts} attempts: {message}")]
    Network {
        keyword: String,
        attempts: u32,
        message: String,
    },
    #[error("query {keyword:?} still rate limited after {attempts} waits")]
    RateLimit { keyword: String, attempts: u32 },
    #[error("query {keyword:?}: {message}")]
    Response { keyword: String, message: String },
    #[error("delivery failed, state not advanced: {0}")]
    Delivery(#[from] NotifyError),
}

impl CollectorError {
    /// Errors that retrying later cannot fix.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            CollectorError::Config(_) | CollectorError::Auth(_) | CollectorError::State(_)
        )
    }
}

/// Source of time. Tests substitute a fake that records sleeps.
pub trait Clock {
    fn now(&self) -> DateTime<Utc>;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

const MAX_BACKOFF: Duration = Duration::from_secs(300);
const MAX_RATE_WAIT: Duration = Duration::from_secs(3600);
const DEFAULT_RATE_WAIT: Duration = Duration::from_secs(60);

fn backoff(attempt: u32) -> Duration {
    Duration::from_secs(1u64 << attempt.min(16)).min(MAX_BACKOFF)
}

fn fetch(
    config: &WatchConfig,
    client: &mut dyn SearchClient,
    clock: &dyn Clock,
    keyword: &str,
    page: u32,
) -> Result<SearchPage, CollectorError> {
    let (mut failures, mut waits) = (0u32, 0u32);
    loop {
        match client.search(keyword, page, config.per_page) {
            Ok(p) => return Ok(p),
            Err(ClientError::Network(message)) => {
                failures += 1;
                if failures >= config.max_retries.max(1) {
                    return Err(CollectorError::Network {
                        keyword: keyword.into(),
                        attempts: failures,
                        message,
                    });
                }
                clock.sleep(backoff(failures - 1));
            }
            Err(ClientError::RateLimited {
                reset_at,
                retry_after,
            }) => {
                waits += 1;
                if waits >= config.max_retries.max(1) {
                    return Err(CollectorError::RateLimit {
                        keyword: keyword.into(),
                        attempts: waits,
                    });
                }
                let until_reset =
                    reset_at.map(|r| (r - clock.now()).to_std().unwrap_or(Duration::ZERO));
                let wait = retry_after.or(until_reset).unwrap_or(DEFAULT_RATE_WAIT);
                clock.sleep(wait.clamp(Duration::from_secs(1), MAX_RATE_WAIT));
            }
            Err(ClientError::Auth(msg)) => return Err(CollectorError::Auth(msg)),
            Err(e) => {
                return Err(CollectorError::Response {
                    keyword: keyword.into(),
                    message: e.to_string(),
                })
            }
        }
    }
}

/// Queries every keyword, following pages until a short page, the reported
/// total, or `max_pages`. Hits are merged by normalized id, keeping the
/// newest timestamp and every matching keyword. Output is sorted by id.
pub fn poll(
    config: &WatchConfig,
    client: &mut dyn SearchClient,
    clock: &dyn Clock,
) -> Result<Vec<ProjectSnapshot>, CollectorError> {
    let mut merged: BTreeMap<String, (DateTime<Utc>, BTreeSet<String>)> = BTreeMap::new();
    for keyword in &config.keywords {
        for page in 1..=config.max_pages {
            let result = fetch(config, client, clock, keyword, page)?;
            let n = result.items.len() as u64;
            for item in result.items {
                let Some(id) = normalize_project_id(&item.locator, client.default_host()) else {
                    continue;
                };
                let entry = merged
                    .entry(id)
                    .or_insert((item.updated_at, BTreeSet::new()));
                entry.0 = entry.0.max(item.updated_at);
                entry.1.insert(keyword.clone());
            }
            let seen = u64::from(page) * u64::from(config.per_page);
            if n < u64::from(config.per_page) || result.total_count.is_some_and(|t| seen >= t) {
                break;
            }
        }
    }
    Ok(merged
        .into_iter()
        .map(|(id, (last_update, kws))| ProjectSnapshot {
            id,
            last_update,
            matched_keywords: kws.into_iter().collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleOutcome {
    pub changes: ChangeSet,
    /// Whether a notification went out. False for an empty change set.
    pub delivered: bool,
    pub state: WatchState,
}

/// One poll, diff, notify round. The state file is rewritten only after
/// the notifier accepts the changes (or there was nothing to send).
pub fn run_cycle(
    config: &WatchConfig,
    client: &mut dyn SearchClient,
    clock: &dyn Clock,
    notifier: &mut dyn Notifier,
) -> Result<CycleOutcome, CollectorError> {
    let previous = load_state(&config.state_path)?;
    let current = poll(config, client, clock)?;
    let changes = diff(&previous.projects, &current);
    let at = clock.now();
    let delivered = !changes.is_empty();
    if delivered {
        notifier.deliver(&changes, at)?;
    }
    let state = WatchState {
        cursor: Some(at),
        projects: current,
    };
    save_state(&config.state_path, &state)?;
    Ok(CycleOutcome {
        changes,
        delivered,
        state,
    })
}

/// Runs cycles forever (or `cycles` times), sleeping `interval` between
/// them. Transient failures are reported through `on_error` and retried
/// next cycle; fatal ones end the loop.
pub fn watch_loop(
    config: &WatchConfig,
    client: &mut dyn SearchClient,
    clock: &dyn Clock,
    notifier: &mut dyn Notifier,
    cycles: Option<u64>,
    mut on_error: impl FnMut(&CollectorError),
) -> Result<(), CollectorError> {
    let mut done = 0u64;
    loop {
        if let Err(e) = run_cycle(config, client, clock, notifier) {
            if e.is_fatal() {
                return Err(e);
            }
            on_error(&e);
        }
        done += 1;
        if cycles.is_some_and(|c| done >= c) {
            return Ok(());
        }
        clock.sleep(config.interval());
    }
}

/// Search client for the configured endpoint.
pub fn client_for(config: &WatchConfig) -> Result<Box<dyn SearchClient>, CollectorError> {
    match file_endpoint(&config.endpoint) {
        Some(path) => Ok(Box::new(ReplayClient::load(&path)?)),
        None => Ok(Box::new(GitHubClient::new(
            &config.endpoint,
            config.token(),
            Duration::from_secs(config.timeout_secs),
        ))),
    }
}

/// Notifier for the configured target; stdout goes to `out`.
pub fn notifier_for<'a, W: std::io::Write + 'a>(
    config: &WatchConfig,
    out: W,
) -> Box<dyn Notifier + 'a> {
    match &config.notify {
        NotifyTarget::Stdout => Box::new(StdoutNotifier::new(out)),
        NotifyTarget::Webhook(url) => Box::new(WebhookNotifier::new(
            url,
            Duration::from_secs(config.timeout_secs),
        )),
    }
}

/// Sends `changes` to the configured target. An empty change set sends
/// nothing and returns `Ok(false)`.
pub fn notify<W: std::io::Write>(
    changes: &ChangeSet,
    config: &WatchConfig,
    at: DateTime<Utc>,
    out: W,
) -> Result<bool, NotifyError> {
    if changes.is_empty() {
        return Ok(false);
    }
    notifier_for(config, out).deliver(changes, at)?;
    Ok(true)
}
