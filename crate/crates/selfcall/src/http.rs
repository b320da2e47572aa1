//! HTTP client for the external QA and translation services.
//!
//! Wire contract: `POST {url}` with `{"input": ..., "source_lang": ...}`,
//! answered by `{"output": ...}`. A 404 or a null/empty output means the
//! service has no answer.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anyhow::{bail, Result};
use serde::Deserialize;

use selfcall_core::tools::{Failure, FixtureService, ServiceRequest, TextService};

use crate::formats::{read_jsonl, FixtureRecord};

#[derive(Debug, Deserialize)]
struct ServiceResponse {
    output: Option<String>,
}

pub struct HttpService {
    agent: ureq::Agent,
    url: String,
    min_interval: Duration,
    last_request: Mutex<Option<Instant>>,
}

impl HttpService {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .max_idle_connections_per_host(4)
            .build()
            .into();
        HttpService {
            agent,
            url: url.into(),
            min_interval: Duration::ZERO,
            last_request: Mutex::new(None),
        }
    }

    /// Spaces requests at least `interval` apart across all threads.
    pub fn with_min_interval(mut self, interval: Duration) -> Self {
        self.min_interval = interval;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn pace(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let mut last = self.last_request.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let wait = self.min_interval.saturating_sub(t.elapsed());
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        *last = Some(Instant::now());
    }
}

impl TextService for HttpService {
    fn request(&self, req: &ServiceRequest) -> Result<Option<String>, Failure> {
        self.pace();
        let mut resp = self.agent.post(&self.url).send_json(req).map_err(classify)?;
        match resp.status().as_u16() {
            200 => {
                let body: ServiceResponse = resp.body_mut().read_json().map_err(classify)?;
                Ok(body.output.filter(|o| !o.trim().is_empty()))
            }
            404 => Ok(None),
            code => Err(Failure::Transport(format!("HTTP status {code}"))),
        }
    }
}

fn classify(e: ureq::Error) -> Failure {
    match e {
        ureq::Error::Timeout(_) => Failure::Timeout,
        ureq::Error::Io(ref io) if matches!(io.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) => {
            Failure::Timeout
        }
        other => Failure::Transport(other.to_string()),
    }
}

/// Loads `{input, output}` lines. Repeated inputs must agree.
pub fn load_fixtures(path: &Path) -> Result<FixtureService> {
    let mut answers: BTreeMap<String, String> = BTreeMap::new();
    for r in read_jsonl::<FixtureRecord>(path)? {
        let key = r.input.trim().to_string();
        if let Some(prev) = answers.get(&key) {
            if *prev != r.output {
                bail!("{}: conflicting fixtures for {:?}", path.display(), key);
            }
        }
        answers.insert(key, r.output);
    }
    Ok(FixtureService {
        answers,
        fail_with: None,
    })
}
