//! Fetch stack: plain HTTP, bounded retries with exponential backoff, and a
//! verbatim on-disk response cache keyed by URL hash.

use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::HarvestError;

/// A completed HTTP exchange. Any status is a successful fetch at this
/// level; policy lives in the layers above.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchResponse {
    pub status: u16,
    pub body: String,
}

pub trait Fetch {
    fn get(&self, url: &str) -> Result<FetchResponse, HarvestError>;
}

/// Blocking HTTP GET with a descriptive User-Agent and a minimum delay
/// between consecutive requests.
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
    delay: Duration,
    last_request: Mutex<Option<Instant>>,
}

impl HttpFetcher {
    pub fn new(user_agent: &str, delay: Duration) -> Result<Self, HarvestError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(user_agent)
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| HarvestError::Transport {
                url: String::new(),
                detail: e.to_string(),
            })?;
        Ok(HttpFetcher {
            client,
            delay,
            last_request: Mutex::new(None),
        })
    }

    fn wait_politely(&self) {
        let mut last = self.last_request.lock().expect("politeness lock");
        if let Some(at) = *last {
            let elapsed = at.elapsed();
            if elapsed < self.delay {
                std::thread::sleep(self.delay - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

impl Fetch for HttpFetcher {
    fn get(&self, url: &str) -> Result<FetchResponse, HarvestError> {
        self.wait_politely();
        let response = self
            .client
            .get(url)
            .send()
            .map_err(|e| HarvestError::Transport {
                url: url.to_string(),
                detail: e.to_string(),
            })?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| HarvestError::Transport {
            url: url.to_string(),
            detail: e.to_string(),
        })?;
        Ok(FetchResponse { status, body })
    }
}

/// Retries transport failures and 429/5xx responses with exponential
/// backoff; other statuses pass straight through.
pub struct RetryingFetch<F> {
    inner: F,
    retries: usize,
    base_backoff: Duration,
}

impl<F> RetryingFetch<F> {
    pub fn new(inner: F, retries: usize, base_backoff: Duration) -> Self {
        RetryingFetch {
            inner,
            retries,
            base_backoff,
        }
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

impl<F: Fetch> Fetch for RetryingFetch<F> {
    fn get(&self, url: &str) -> Result<FetchResponse, HarvestError> {
        let attempts = self.retries + 1;
        let mut last_detail = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.base_backoff * 2u32.pow(attempt as u32 - 1));
            }
            match self.inner.get(url) {
                Ok(response) if !retryable(response.status) => return Ok(response),
                Ok(response) => {
                    last_detail = format!("HTTP status {}", response.status);
                }
                Err(e) => {
                    last_detail = e.to_string();
                }
            }
        }
        Err(HarvestError::RetriesExhausted {
            url: url.to_string(),
            attempts,
            detail: last_detail,
        })
    }
}

/// On-disk cache: one file per request, filename = SHA-256 of the URL,
/// content = the verbatim response body. Only 200s are cached.
pub struct CachedFetch<F> {
    inner: F,
    dir: PathBuf,
}

impl<F> CachedFetch<F> {
    pub fn new(inner: F, dir: impl Into<PathBuf>) -> Self {
        CachedFetch {
            inner,
            dir: dir.into(),
        }
    }

    pub fn cache_path(&self, url: &str) -> PathBuf {
        let digest = Sha256::digest(url.as_bytes());
        let mut name = String::with_capacity(64);
        for byte in digest {
            name.push_str(&format!("{byte:02x}"));
        }
        self.dir.join(name)
    }
}

impl<F: Fetch> Fetch for CachedFetch<F> {
    fn get(&self, url: &str) -> Result<FetchResponse, HarvestError> {
        let path = self.cache_path(url);
        if path.exists() {
            let body = fs::read_to_string(&path).map_err(|e| HarvestError::Cache {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
            return Ok(FetchResponse { status: 200, body });
        }
        let response = self.inner.get(url)?;
        if response.status == 200 {
            fs::create_dir_all(&self.dir).map_err(|e| HarvestError::Cache {
                path: self.dir.display().to_string(),
                detail: e.to_string(),
            })?;
            fs::write(&path, &response.body).map_err(|e| HarvestError::Cache {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
        }
        Ok(response)
    }
}
