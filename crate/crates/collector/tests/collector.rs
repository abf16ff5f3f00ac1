mod common;

use std::cell::RefCell;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use solbug_collector::*;

use common::{serve, Reply};

struct FixedClock(RefCell<DateTime<Utc>>);

impl FixedClock {
    fn new() -> Self {
        FixedClock(RefCell::new(
            Utc.with_ymd_and_hms(2023, 5, 1, 12, 0, 0).unwrap(),
        ))
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.borrow()
    }
    fn sleep(&self, d: Duration) {
        *self.0.borrow_mut() += chrono::Duration::from_std(d).unwrap();
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn replay(name: &str) -> ReplayClient {
    ReplayClient::load(&fixture(name)).unwrap()
}

fn page(ids: &[&str], day: u32) -> serde_json::Value {
    let items: Vec<_> = ids
        .iter()
        .map(|f| serde_json::json!({"full_name": f, "updated_at": format!("2020-01-{day:02}T00:00:00Z")}))
        .collect();
    serde_json::json!({"total_count": ids.len(), "items": items})
}

fn config(state: &Path) -> WatchConfig {
    WatchConfig {
        state_path: state.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn same_projects_under_two_keywords_dedup() {
    let rec = serde_json::json!({
        "smart contract bugs": [page(&["a/one", "b/two"], 1)],
        "smart contract defects": [page(&["A/One", "b/two"], 3)],
    });
    let mut client = ReplayClient::from_json(&rec.to_string()).unwrap();
    let out = poll(&WatchConfig::default(), &mut client, &FixedClock::new()).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].id, "github.com/a/one");
    assert_eq!(
        out[0].last_update,
        Utc.with_ymd_and_hms(2020, 1, 3, 0, 0, 0).unwrap()
    );
    assert_eq!(
        out[0].matched_keywords,
        vec!["smart contract bugs", "smart contract defects"]
    );
}

#[test]
fn empty_results_give_empty_snapshot() {
    let mut client = ReplayClient::from_json("{}").unwrap();
    assert!(
        poll(&WatchConfig::default(), &mut client, &FixedClock::new())
            .unwrap()
            .is_empty()
    );
}

#[test]
fn recorded_search_yields_266_projects() {
    let out = poll(
        &WatchConfig::default(),
        &mut replay("search_initial.json"),
        &FixedClock::new(),
    )
    .unwrap();
    assert_eq!(out.len(), 266);
    let ids: std::collections::BTreeSet<_> = out.iter().map(|p| &p.id).collect();
    assert_eq!(ids.len(), 266);
    // Overlapping keywords keep the newest timestamp.
    assert!(out
        .iter()
        .all(|p| p.last_update.format("%Y").to_string() == "2019"));
}

#[test]
fn cycle_sequence_reports_changes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir.path().join("state.json"));
    let clock = FixedClock::new();
    let mut out = StdoutNotifier::new(Vec::new());
    let first = run_cycle(&cfg, &mut replay("search_initial.json"), &clock, &mut out).unwrap();
    assert_eq!(first.changes.added.len(), 266);
    assert!(first.delivered);

    let second = run_cycle(&cfg, &mut replay("search_later.json"), &clock, &mut out).unwrap();
    assert_eq!(
        second.changes.added,
        vec!["github.com/newcomer/reentrancy-notes"]
    );
    assert_eq!(
        second.changes.removed,
        vec![
            "github.com/alice/contract-study-000",
            "github.com/bob/contract-study-001"
        ]
    );
    assert_eq!(second.changes.updated.len(), 3);

    // Nothing new: no delivery, but the cursor still advances.
    clock.sleep(Duration::from_secs(60));
    let third = run_cycle(&cfg, &mut replay("search_later.json"), &clock, &mut out).unwrap();
    assert!(third.changes.is_empty() && !third.delivered);
    assert_eq!(
        load_state(&cfg.state_path).unwrap().cursor,
        Some(clock.now())
    );

    let text = String::from_utf8(out.into_inner()).unwrap();
    assert_eq!(text.lines().count(), 266 + 6);
}

#[test]
fn runs_are_byte_identical() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(&dir.path().join("state.json"));
        let clock = FixedClock::new();
        let mut out = StdoutNotifier::new(Vec::new());
        run_cycle(&cfg, &mut replay("search_initial.json"), &clock, &mut out).unwrap();
        let s1 = std::fs::read(&cfg.state_path).unwrap();
        run_cycle(&cfg, &mut replay("search_later.json"), &clock, &mut out).unwrap();
        let s2 = std::fs::read(&cfg.state_path).unwrap();
        (s1, s2, out.into_inner())
    };
    assert_eq!(run(), run());
}

#[test]
fn webhook_failure_leaves_state_unchanged() {
    let server = serve(1, |_| Reply::new(500, "boom"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = WatchConfig {
        notify: NotifyTarget::Webhook(format!("{}/hook", server.url)),
        ..config(&dir.path().join("s.json"))
    };
    let clock = FixedClock::new();
    let prior = WatchState {
        cursor: Some(clock.now()),
        projects: vec![],
    };
    save_state(&cfg.state_path, &prior).unwrap();
    let before = std::fs::read(&cfg.state_path).unwrap();

    let mut notifier = notifier_for(&cfg, Vec::new());
    let err = run_cycle(
        &cfg,
        &mut replay("search_initial.json"),
        &clock,
        notifier.as_mut(),
    )
    .unwrap_err();
    assert!(
        matches!(err, CollectorError::Delivery(NotifyError::Status(500))),
        "{err}"
    );
    assert!(!err.is_fatal());
    assert_eq!(std::fs::read(&cfg.state_path).unwrap(), before);
}

#[test]
fn webhook_receives_change_payload() {
    let server = serve(1, |_| Reply::new(204, ""));
    let dir = tempfile::tempdir().unwrap();
    let cfg = WatchConfig {
        notify: NotifyTarget::Webhook(format!("{}/hook", server.url)),
        ..config(&dir.path().join("s.json"))
    };
    let rec = serde_json::json!({"smart contract bugs": [page(&["x/y"], 2)]});
    let mut client = ReplayClient::from_json(&rec.to_string()).unwrap();
    let mut notifier = notifier_for(&cfg, Vec::new());
    run_cycle(&cfg, &mut client, &FixedClock::new(), notifier.as_mut()).unwrap();
    let reqs = server.requests.lock().unwrap();
    assert_eq!(reqs[0].method, "POST");
    assert_eq!(reqs[0].target, "/hook");
    assert_eq!(
        reqs[0].body,
        r#"{"added":["github.com/x/y"],"at":"2023-05-01T12:00:00Z","removed":[],"updated":[]}"#
    );
}

#[test]
fn github_client_sends_query_and_bearer_token() {
    let body = page(&["o/r"], 1).to_string();
    let server = serve(1, move |_| Reply::new(200, body.clone()));
    let mut client = GitHubClient::new(
        &format!("{}/search/repositories", server.url),
        Some("s3cret".into()),
        Duration::from_secs(5),
    );
    let p = client.search("smart contract bugs", 2, 50).unwrap();
    assert_eq!(p.items.len(), 1);
    let req = &server.requests.lock().unwrap()[0];
    assert_eq!(
        req.target,
        "/search/repositories?q=smart%20contract%20bugs&per_page=50&page=2"
    );
    assert_eq!(req.header("authorization"), Some("Bearer s3cret"));
    assert_eq!(req.header("accept"), Some("application/vnd.github+json"));
}

#[test]
fn github_client_classifies_failures() {
    let server = serve(4, |req| {
        if req.target.ends_with("&page=1") {
            Reply::new(401, r#"{"message":"Bad credentials"}"#)
        } else if req.target.ends_with("&page=2") {
            Reply::new(403, "{}")
                .with_header("x-ratelimit-remaining", "0")
                .with_header("x-ratelimit-reset", "1700000000")
        } else if req.target.ends_with("&page=3") {
            Reply::new(502, "")
        } else {
            Reply::new(422, "nope")
        }
    });
    let mut c = GitHubClient::new(&server.url, None, Duration::from_secs(5));
    assert!(matches!(c.search("k", 1, 10), Err(ClientError::Auth(_))));
    let reset = DateTime::from_timestamp(1_700_000_000, 0);
    assert_eq!(
        c.search("k", 2, 10),
        Err(ClientError::RateLimited {
            reset_at: reset,
            retry_after: None
        })
    );
    assert!(matches!(c.search("k", 3, 10), Err(ClientError::Network(_))));
    assert!(matches!(
        c.search("k", 4, 10),
        Err(ClientError::Http { status: 422, .. })
    ));
}

#[test]
fn unreachable_endpoint_is_retried_then_reported() {
    // Bind and drop to get a port nothing listens on.
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let cfg = WatchConfig {
        keywords: vec!["k".into()],
        endpoint: format!("http://127.0.0.1:{port}/search"),
        max_retries: 3,
        ..Default::default()
    };
    let mut client = client_for(&cfg).unwrap();
    let clock = FixedClock::new();
    let start = clock.now();
    let err = poll(&cfg, client.as_mut(), &clock).unwrap_err();
    assert!(
        matches!(err, CollectorError::Network { attempts: 3, .. }),
        "{err}"
    );
    assert_eq!(clock.now() - start, chrono::Duration::seconds(3));
}

#[test]
fn interrupted_save_keeps_prior_state_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    let cfg = config(&path);
    let clock = FixedClock::new();
    let mut out = StdoutNotifier::new(Vec::new());
    let prior = run_cycle(&cfg, &mut replay("search_initial.json"), &clock, &mut out)
        .unwrap()
        .state;
    let next = WatchState {
        cursor: None,
        projects: vec![],
    }
    .to_json();
    // Every prefix of the next state, as a killed writer would leave it.
    for cut in [0, 1, next.len() / 2, next.len()] {
        std::fs::write(temp_path(&path), &next.as_bytes()[..cut]).unwrap();
        assert_eq!(load_state(&path).unwrap(), prior);
    }
    // The next cycle replaces the stale temp file and completes.
    run_cycle(&cfg, &mut replay("search_later.json"), &clock, &mut out).unwrap();
    assert_eq!(load_state(&path).unwrap().projects.len(), 265);
}
