//! Optional acquisition client: walks a MediaWiki category tree breadth
//! first and exports the collected pages as a technology roster CSV.
//!
//! The crawler is built over a small [`Fetch`] trait so the traversal,
//! retry, and caching layers are testable without a network. The production
//! stack is `CachedFetch(RetryingFetch(HttpFetcher))`: cache hits skip the
//! network entirely, retries apply exponential backoff on 429/5xx, and the
//! HTTP layer enforces a politeness delay between consecutive requests.

use thiserror::Error;

mod crawl;
mod export;
mod fetch;

pub use crawl::{fetch_category_tree, CategoryKind, CategoryPage, CrawlConfig, CrawlOutcome};
pub use export::export_roster;
pub use fetch::{CachedFetch, Fetch, FetchResponse, HttpFetcher, RetryingFetch};

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("transport failure for {url}: {detail}")]
    Transport { url: String, detail: String },
    #[error("request for {url} failed after {attempts} attempts: {detail}")]
    RetriesExhausted {
        url: String,
        attempts: usize,
        detail: String,
    },
    #[error("unexpected HTTP status {status} for {url}")]
    Status { url: String, status: u16 },
    #[error("malformed response from {url}: {detail}")]
    Malformed { url: String, detail: String },
    #[error("invalid endpoint url {url:?}: {detail}")]
    BadEndpoint { url: String, detail: String },
    #[error("cache error at {path}: {detail}")]
    Cache { path: String, detail: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
