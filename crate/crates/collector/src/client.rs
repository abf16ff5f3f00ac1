use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use crate::CollectorError;

/// One search hit before id normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawProject {
    /// Repository URL or `owner/name`.
    pub locator: String,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchPage {
    pub items: Vec<RawProject>,
    /// Total hits reported by the endpoint, if it says.
    pub total_count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    /// Connection trouble or a 5xx. Worth retrying.
    #[error("network error: {0}")]
    Network(String),
    #[error("rate limited")]
    RateLimited {
        reset_at: Option<DateTime<Utc>>,
        retry_after: Option<Duration>,
    },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("unexpected HTTP status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Decode(String),
}

/// Narrow interface over a repository search endpoint. Pages are 1-based.
pub trait SearchClient {
    fn search(
        &mut self,
        keyword: &str,
        page: u32,
        per_page: u32,
    ) -> Result<SearchPage, ClientError>;

    /// Host prepended to bare `owner/name` locators.
    fn default_host(&self) -> &str {
        "github.com"
    }
}

#[derive(Deserialize)]
struct GhResponse {
    total_count: Option<u64>,
    items: Vec<GhItem>,
}

#[derive(Deserialize)]
struct GhItem {
    full_name: Option<String>,
    html_url: Option<String>,
    updated_at: DateTime<Utc>,
}

fn parse_page(text: &str) -> Result<SearchPage, ClientError> {
    let resp: GhResponse =
        serde_json::from_str(text).map_err(|e| ClientError::Decode(e.to_string()))?;
    page_from(resp)
}

fn page_from(resp: GhResponse) -> Result<SearchPage, ClientError> {
    let items =
        resp.items
            .into_iter()
            .map(|it| {
                let locator = it.html_url.or(it.full_name).ok_or_else(|| {
                    ClientError::Decode("item without html_url or full_name".into())
                })?;
                Ok(RawProject {
                    locator,
                    updated_at: it.updated_at,
                })
            })
            .collect::<Result<_, _>>()?;
    Ok(SearchPage {
        items,
        total_count: resp.total_count,
    })
}

/// Client for the GitHub repository search API.
pub struct GitHubClient {
    agent: ureq::Agent,
    endpoint: String,
    token: Option<String>,
    host: String,
}

impl GitHubClient {
    pub fn new(endpoint: &str, token: Option<String>, timeout: Duration) -> Self {
        let host = endpoint
            .split_once("://")
            .map_or(endpoint, |(_, rest)| rest)
            .split(['/', ':'])
            .next()
            .unwrap_or("github.com");
        let host = host.strip_prefix("api.").unwrap_or(host).to_string();
        GitHubClient {
            agent: http_agent(timeout),
            endpoint: endpoint.to_string(),
            token,
            host,
        }
    }
}

pub(crate) fn http_agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(timeout))
        .user_agent("solbug-collector")
        .build()
        .into()
}

fn header<'a>(resp: &'a ureq::http::Response<ureq::Body>, name: &str) -> Option<&'a str> {
    resp.headers()
        .get(name)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
}

impl SearchClient for GitHubClient {
    fn search(
        &mut self,
        keyword: &str,
        page: u32,
        per_page: u32,
    ) -> Result<SearchPage, ClientError> {
        let mut req = self
            .agent
            .get(&self.endpoint)
            .header("Accept", "application/vnd.github+json")
            .query("q", keyword)
            .query("per_page", per_page.to_string())
            .query("page", page.to_string());
        if let Some(token) = &self.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req
            .call()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let exhausted = header(&resp, "x-ratelimit-remaining") == Some("0");
        let reset_at = header(&resp, "x-ratelimit-reset")
            .and_then(|v| v.parse::<i64>().ok())
            .and_then(|s| DateTime::from_timestamp(s, 0));
        let retry_after = header(&resp, "retry-after")
            .and_then(|v| v.parse::<u64>().ok())
            .map(Duration::from_secs);
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Network(e.to_string()))?;
        match status {
            200..=299 => parse_page(&body),
            403 | 429 if exhausted || retry_after.is_some() || status == 429 => {
                Err(ClientError::RateLimited { reset_at, retry_after })
            }
            401 => Err(ClientError::Auth(
                "the search endpoint rejected the credentials (HTTP 401); check the token environment variable"
                    .into(),
            )),
            403 => Err(ClientError::Auth(format!(
                "access forbidden (HTTP 403); check the token's permissions: {}",
                snippet(&body)
            ))),
            408 | 500..=599 => Err(ClientError::Network(format!("HTTP {status}"))),
            _ => Err(ClientError::Http { status, body: snippet(&body) }),
        }
    }

    fn default_host(&self) -> &str {
        &self.host
    }
}

fn snippet(body: &str) -> String {
    body.chars().take(200).collect()
}

/// Serves responses recorded in a JSON file shaped as
/// `{"<keyword>": [<page 1>, <page 2>, ...]}`, each page in the search
/// API's response format. Unknown keywords and pages past the end are empty.
pub struct ReplayClient {
    pages: BTreeMap<String, Vec<serde_json::Value>>,
}

impl ReplayClient {
    pub fn from_json(text: &str) -> Result<Self, CollectorError> {
        let pages = serde_json::from_str(text)
            .map_err(|e| CollectorError::Config(format!("recorded responses: {e}")))?;
        Ok(ReplayClient { pages })
    }

    pub fn load(path: &Path) -> Result<Self, CollectorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CollectorError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl SearchClient for ReplayClient {
    fn search(
        &mut self,
        keyword: &str,
        page: u32,
        _per_page: u32,
    ) -> Result<SearchPage, ClientError> {
        let recorded = self
            .pages
            .get(keyword)
            .and_then(|pages| pages.get(page.checked_sub(1)? as usize));
        match recorded {
            None => Ok(SearchPage::default()),
            Some(v) => {
                let resp: GhResponse = serde_json::from_value(v.clone())
                    .map_err(|e| ClientError::Decode(e.to_string()))?;
                page_from(resp)
            }
        }
    }
}

/// Path behind a `file://` endpoint.
pub fn file_endpoint(endpoint: &str) -> Option<PathBuf> {
    endpoint.strip_prefix("file://").map(PathBuf::from)
}
