use std::time::Duration;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::{extract_text, validate_url, RelationalStore, SnapshotOutcome};
use crate::clock::Clock;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchOptions {
    pub concurrency: usize,
    pub timeout_secs: u64,
    /// Responses larger than this are treated as fetch failures.
    pub max_body_bytes: usize,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self { concurrency: 8, timeout_secs: 15, max_body_bytes: 10 * 1024 * 1024 }
    }
}

/// A non-comment line of a URL list file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrlLine {
    /// 1-based line number in the list file.
    pub line: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum UrlStatus {
    Snapshot { outcome: SnapshotOutcome },
    Invalid { reason: String },
    FetchFailed { reason: String },
    StoreFailed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrlReport {
    pub line: usize,
    pub url: String,
    #[serde(flatten)]
    pub status: UrlStatus,
}

/// Lines that are neither blank nor `#` comments.
pub fn parse_url_list(text: &str) -> Vec<UrlLine> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let t = l.trim();
            (!t.is_empty() && !t.starts_with('#')).then(|| UrlLine { line: i + 1, text: t.to_owned() })
        })
        .collect()
}

async fn fetch_one(client: &reqwest::Client, url: url::Url, limit: usize) -> Result<Vec<u8>, String> {
    let resp = client.get(url).send().await.map_err(|e| {
        if e.is_timeout() {
            "timed out".to_owned()
        } else {
            format!("request failed: {}", e.without_url())
        }
    })?;
    let status = resp.status();
    if !status.is_success() {
        return Err(format!("HTTP {}", status.as_u16()));
    }
    if resp.content_length().is_some_and(|n| n as usize > limit) {
        return Err("response too large".into());
    }
    let body = resp.bytes().await.map_err(|e| {
        if e.is_timeout() {
            "timed out".to_owned()
        } else {
            "body read failed".to_owned()
        }
    })?;
    if body.len() > limit {
        return Err("response too large".into());
    }
    Ok(body.to_vec())
}

/// Fetches every URL in a list file and records a snapshot of its text.
///
/// Up to `concurrency` requests are in flight; snapshots are written one at a
/// time in input order. One report per listed URL, in input order. A failing
/// URL never affects the others.
pub async fn fetch_urls(
    store: &RelationalStore,
    list: &str,
    options: &FetchOptions,
    clock: &dyn Clock,
) -> Vec<UrlReport> {
    let client = match reqwest::Client::builder()
        .timeout(Duration::from_secs(options.timeout_secs))
        .user_agent(concat!("unirag/", env!("CARGO_PKG_VERSION")))
        .build()
    {
        Ok(c) => c,
        Err(e) => {
            return parse_url_list(list)
                .into_iter()
                .map(|l| UrlReport {
                    line: l.line,
                    url: l.text,
                    status: UrlStatus::FetchFailed { reason: format!("client setup: {e}") },
                })
                .collect()
        }
    };

    let lines = parse_url_list(list);
    let limit = options.max_body_bytes;
    let client = &client;
    let mut fetched = stream::iter(lines.into_iter().map(|l| async move {
        let result = match validate_url(&l.text) {
            Ok(url) => Ok(fetch_one(client, url, limit).await),
            Err(e) => Err(e.to_string()),
        };
        (l, result)
    }))
    .buffered(options.concurrency.max(1));

    let mut reports = Vec::new();
    while let Some((l, result)) = fetched.next().await {
        let status = match result {
            Err(reason) => UrlStatus::Invalid { reason },
            Ok(Err(reason)) => {
                log::warn!("fetch {} failed: {reason}", l.text);
                UrlStatus::FetchFailed { reason }
            }
            Ok(Ok(body)) => match store.record_snapshot(&l.text, &extract_text(&body), clock) {
                Ok(outcome) => UrlStatus::Snapshot { outcome },
                Err(e) => UrlStatus::StoreFailed { reason: e.to_string() },
            },
        };
        reports.push(UrlReport { line: l.line, url: l.text, status });
    }
    reports
}
