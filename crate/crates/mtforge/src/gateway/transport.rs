//! The wire boundary. A [`Transport`] takes a fully prepared request and
//! returns raw status plus body bytes; everything above it (retries,
//! caching, rate limits, decoding) lives in the gateway.

use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    Generate,
    Score,
    Reward,
    Info,
}

impl Route {
    pub fn path(self) -> &'static str {
        match self {
            Route::Generate => "generate",
            Route::Score => "score",
            Route::Reward => "reward",
            Route::Info => "info",
        }
    }

    /// Info is a GET, everything else POSTs a JSON body.
    pub fn is_get(self) -> bool {
        matches!(self, Route::Info)
    }
}

#[derive(Debug, Clone)]
pub struct WireRequest {
    pub endpoint_id: String,
    pub base_url: String,
    pub route: Route,
    pub body: Option<serde_json::Value>,
    pub auth_token: Option<String>,
    pub timeout: Duration,
}

impl WireRequest {
    pub fn url(&self) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), self.route.path())
    }
}

#[derive(Debug, Clone)]
pub struct WireResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

/// Failure to obtain any HTTP response at all. Responses with error status
/// codes are not transport errors; they come back as [`WireResponse`].
#[derive(Debug, Clone, Error)]
pub enum TransportError {
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
}

pub trait Transport: Send + Sync {
    fn execute(&self, request: &WireRequest) -> Result<WireResponse, TransportError>;
}

/// Real HTTP transport on a shared blocking client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Self {
        let client = reqwest::blocking::Client::builder()
            .build()
            .expect("default client configuration is valid");
        Self { client }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn execute(&self, request: &WireRequest) -> Result<WireResponse, TransportError> {
        let url = request.url();
        let mut builder = if request.route.is_get() {
            self.client.get(&url)
        } else {
            self.client.post(&url).json(request.body.as_ref().unwrap_or(&serde_json::Value::Null))
        };
        builder = builder.timeout(request.timeout);
        if let Some(token) = &request.auth_token {
            builder = builder.bearer_auth(token);
        }
        match builder.send() {
            Ok(response) => {
                let status = response.status().as_u16();
                let body = response
                    .bytes()
                    .map_err(|e| TransportError::Connect(format!("reading body: {e}")))?
                    .to_vec();
                Ok(WireResponse { status, body })
            }
            Err(e) if e.is_timeout() => Err(TransportError::Timeout(request.timeout)),
            Err(e) => Err(TransportError::Connect(e.to_string())),
        }
    }
}
