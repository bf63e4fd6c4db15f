//! Blocking JSON-over-HTTP client shared by the remote predictors.

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts, the first one included.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub backoff_factor: f64,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            initial_backoff: Duration::from_millis(200),
            backoff_factor: 2.0,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` (attempts are counted from 0).
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.initial_backoff
            .mul_f64(self.backoff_factor.powi(attempt as i32))
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("request to {url} failed after {attempts} attempts: {last}")]
    Exhausted {
        url: String,
        attempts: u32,
        last: String,
    },
    #[error("server rejected request to {url} with status {status}: {body}")]
    Rejected { url: String, status: u16, body: String },
    #[error("could not decode response from {url}: {message}")]
    Decode { url: String, message: String },
    #[error("could not build HTTP client: {0}")]
    Client(String),
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().unwrap();
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap();
        }
        *active += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// A base URL plus retry policy. Clones share the in-flight limit.
#[derive(Clone)]
pub struct JsonClient {
    base: String,
    policy: RetryPolicy,
    http: reqwest::blocking::Client,
    in_flight: Arc<InFlight>,
}

impl std::fmt::Debug for JsonClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JsonClient")
            .field("base", &self.base)
            .field("policy", &self.policy)
            .field("max_in_flight", &self.in_flight.limit)
            .finish()
    }
}

impl JsonClient {
    pub fn new(base: &str, policy: RetryPolicy, max_in_flight: usize) -> Result<Self, TransportError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(policy.timeout)
            .build()
            .map_err(|e| TransportError::Client(e.to_string()))?;
        Ok(JsonClient {
            base: base.trim_end_matches('/').to_string(),
            policy,
            http,
            in_flight: Arc::new(InFlight {
                limit: max_in_flight.max(1),
                active: Mutex::new(0),
                freed: Condvar::new(),
            }),
        })
    }

    pub fn with_defaults(base: &str) -> Result<Self, TransportError> {
        JsonClient::new(base, RetryPolicy::default(), DEFAULT_MAX_IN_FLIGHT)
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    /// POSTs `body` to `path`. Connection failures, timeouts and 5xx replies
    /// are retried; 4xx replies are returned immediately as `Rejected`.
    pub fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, TransportError> {
        let url = format!("{}{}", self.base, path);
        let text = self.send(&url, |c| c.post(&url).json(body))?;
        serde_json::from_str(&text).map_err(|e| TransportError::Decode {
            url,
            message: e.to_string(),
        })
    }

    pub fn get_text(&self, path: &str) -> Result<String, TransportError> {
        let url = format!("{}{}", self.base, path);
        self.send(&url, |c| c.get(&url))
    }

    fn send(
        &self,
        url: &str,
        build: impl Fn(&reqwest::blocking::Client) -> reqwest::blocking::RequestBuilder,
    ) -> Result<String, TransportError> {
        let _permit = self.in_flight.acquire();
        let mut last = String::new();
        let attempts = self.policy.max_attempts.max(1);
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.policy.backoff(attempt - 1));
            }
            match build(&self.http).send() {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let body = resp.text().unwrap_or_default();
                    if status < 400 {
                        return Ok(body);
                    }
                    if status < 500 {
                        return Err(TransportError::Rejected {
                            url: url.to_string(),
                            status,
                            body,
                        });
                    }
                    last = format!("status {status}: {body}");
                }
                Err(e) => last = e.to_string(),
            }
            log::debug!("attempt {} to {url} failed: {last}", attempt + 1);
        }
        Err(TransportError::Exhausted {
            url: url.to_string(),
            attempts,
            last,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_is_exponential() {
        let p = RetryPolicy {
            initial_backoff: Duration::from_millis(100),
            ..RetryPolicy::default()
        };
        assert_eq!(p.backoff(0), Duration::from_millis(100));
        assert_eq!(p.backoff(1), Duration::from_millis(200));
        assert_eq!(p.backoff(2), Duration::from_millis(400));
    }

    #[test]
    fn unreachable_host_exhausts_attempts() {
        let policy = RetryPolicy {
            max_attempts: 2,
            initial_backoff: Duration::from_millis(1),
            backoff_factor: 2.0,
            timeout: Duration::from_millis(200),
        };
        // port 9 on localhost is discard; nothing listens in the sandbox
        let c = JsonClient::new("http://127.0.0.1:9", policy, 2).unwrap();
        let r: Result<serde_json::Value, _> = c.post("/x", &serde_json::json!({}));
        match r {
            Err(TransportError::Exhausted { attempts, .. }) => assert_eq!(attempts, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn in_flight_limit_blocks() {
        let f = Arc::new(InFlight {
            limit: 2,
            active: Mutex::new(0),
            freed: Condvar::new(),
        });
        let a = f.acquire();
        let _b = f.acquire();
        assert_eq!(*f.active.lock().unwrap(), 2);
        let f2 = Arc::clone(&f);
        let h = thread::spawn(move || {
            let _c = f2.acquire();
            let active = *f2.active.lock().unwrap();
            active
        });
        thread::sleep(Duration::from_millis(20));
        drop(a);
        assert_eq!(h.join().unwrap(), 2);
    }
}
