//! Access to external model services. Every neural component (generation,
//! quality estimation, pairwise judging, reward scoring) sits behind an
//! HTTP endpoint speaking a small JSON protocol:
//!
//! * `POST {base}/generate` — sample completions for a conversation
//! * `POST {base}/score`    — score a hypothesis, direction per `/info`
//! * `POST {base}/reward`   — reference-free quality for a candidate
//! * `GET  {base}/info`     — metric identity: `metric_id`, `direction`
//!
//! The gateway owns retries, client-side rate limiting, bounded in-flight
//! concurrency, and content-addressed response caching. Scores never guess
//! their direction: it always comes from the endpoint's own handshake.

pub mod cache;
pub mod limiter;
pub mod mock;
pub mod transport;

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::hashing::sha256_hex;
use crate::model::{Conversation, Direction, MetricScore, Role};
use crate::pipeline::Semaphore;
use cache::ResponseCache;
use limiter::{Clock, RateLimiter, SystemClock};
use transport::{HttpTransport, Route, Transport, WireRequest};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no endpoint registered under id {0:?}")]
    UnknownEndpoint(String),
    #[error("endpoint {endpoint:?} unavailable after {attempts} attempt(s): {message}")]
    EndpointUnavailable { endpoint: String, attempts: u32, message: String },
    #[error("endpoint {endpoint:?} returned a malformed response: {message}")]
    MalformedResponse { endpoint: String, message: String },
    #[error("endpoint {endpoint:?} requires an auth token but env var {env_var} is unset")]
    AuthMissing { endpoint: String, env_var: String },
    #[error("endpoint {endpoint:?} declares no score direction in /info")]
    DirectionMissing { endpoint: String },
    #[error("cannot open response cache: {0}")]
    CacheUnavailable(String),
}

/// How to reach one service and how hard to lean on it.
#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub base_url: String,
    /// Name of the env var holding a bearer token, if the service needs one.
    pub auth_token_env: Option<String>,
    pub timeout: Duration,
    /// Additional attempts after the first failure.
    pub max_retries: u32,
    pub requests_per_minute: Option<usize>,
    pub max_in_flight: Option<usize>,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            auth_token_env: None,
            timeout: Duration::from_secs(30),
            max_retries: 2,
            requests_per_minute: None,
            max_in_flight: None,
        }
    }
}

/// Sampling parameters for a generate call.
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub temperature: f64,
    pub num_samples: usize,
    pub max_tokens: Option<u32>,
    /// Server-side sampling seed. Setting it makes the call reproducible
    /// and therefore cacheable even at nonzero temperature.
    pub seed: Option<u64>,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { temperature: 0.0, num_samples: 1, max_tokens: None, seed: None }
    }
}

impl GenParams {
    pub fn sampling(temperature: f64, num_samples: usize) -> Self {
        Self { temperature, num_samples, ..Self::default() }
    }

    fn deterministic(&self) -> bool {
        self.temperature == 0.0 || self.seed.is_some()
    }
}

/// What a metric endpoint says about itself.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EndpointInfo {
    pub metric_id: String,
    #[serde(default)]
    pub direction: Option<Direction>,
    #[serde(default)]
    pub version: Option<String>,
}

/// Inputs for a score call. `source` and `reference` are optional because
/// quality-estimation metrics are reference-free.
#[derive(Debug, Clone, Default)]
pub struct ScoreRequest {
    pub source: Option<String>,
    pub hypothesis: String,
    pub reference: Option<String>,
    pub lp: Option<String>,
}

struct Endpoint {
    config: EndpointConfig,
    limiter: Option<RateLimiter>,
    semaphore: Option<Semaphore>,
    info: OnceLock<EndpointInfo>,
}

pub struct Gateway {
    endpoints: BTreeMap<String, Endpoint>,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    cache: Option<ResponseCache>,
}

pub struct GatewayBuilder {
    endpoints: BTreeMap<String, EndpointConfig>,
    transport: Option<Arc<dyn Transport>>,
    clock: Option<Arc<dyn Clock>>,
    cache_dir: Option<std::path::PathBuf>,
}

impl GatewayBuilder {
    pub fn endpoint(mut self, id: impl Into<String>, config: EndpointConfig) -> Self {
        self.endpoints.insert(id.into(), config);
        self
    }

    pub fn transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = Some(transport);
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = Some(clock);
        self
    }

    pub fn cache_dir(mut self, dir: impl Into<std::path::PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn build(self) -> Result<Gateway, GatewayError> {
        let cache = match self.cache_dir {
            Some(dir) => Some(
                ResponseCache::open(dir).map_err(|e| GatewayError::CacheUnavailable(e.to_string()))?,
            ),
            None => None,
        };
        let endpoints = self
            .endpoints
            .into_iter()
            .map(|(id, config)| {
                let limiter = config.requests_per_minute.map(RateLimiter::per_minute);
                let semaphore = config.max_in_flight.map(Semaphore::new);
                (id, Endpoint { config, limiter, semaphore, info: OnceLock::new() })
            })
            .collect();
        Ok(Gateway {
            endpoints,
            transport: self.transport.unwrap_or_else(|| Arc::new(HttpTransport::new())),
            clock: self.clock.unwrap_or_else(|| Arc::new(SystemClock)),
            cache,
        })
    }
}

#[derive(Deserialize)]
struct GenerateResponse {
    texts: Vec<String>,
}

#[derive(Deserialize)]
struct ValueResponse {
    value: f64,
}

impl Gateway {
    pub fn builder() -> GatewayBuilder {
        GatewayBuilder {
            endpoints: BTreeMap::new(),
            transport: None,
            clock: None,
            cache_dir: None,
        }
    }

    pub fn has_endpoint(&self, id: &str) -> bool {
        self.endpoints.contains_key(id)
    }

    pub fn endpoint_ids(&self) -> impl Iterator<Item = &str> {
        self.endpoints.keys().map(String::as_str)
    }

    /// Samples `params.num_samples` completions for the conversation.
    /// Responses are cached only when the call is reproducible, meaning
    /// temperature zero or an explicit sampling seed.
    pub fn generate(
        &self,
        endpoint_id: &str,
        prompt: &Conversation,
        params: &GenParams,
    ) -> Result<Vec<String>, GatewayError> {
        let messages: Vec<_> = prompt
            .turns()
            .iter()
            .map(|t| {
                json!({
                    "role": match t.role { Role::User => "user", Role::Assistant => "assistant" },
                    "text": t.text,
                })
            })
            .collect();
        let mut body = json!({
            "messages": messages,
            "temperature": params.temperature,
            "num_samples": params.num_samples,
        });
        if let Some(max_tokens) = params.max_tokens {
            body["max_tokens"] = json!(max_tokens);
        }
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        let expected = params.num_samples;
        let response: GenerateResponse =
            self.call(endpoint_id, Route::Generate, Some(body), params.deterministic(), |bytes| {
                let parsed: GenerateResponse =
                    serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
                if parsed.texts.len() != expected {
                    return Err(format!(
                        "expected {expected} texts, got {}",
                        parsed.texts.len()
                    ));
                }
                Ok(parsed)
            })?;
        Ok(response.texts)
    }

    /// Scores a hypothesis. The returned score's `metric_id` and direction
    /// come from the endpoint's `/info` handshake, fetched once and cached.
    pub fn score(&self, endpoint_id: &str, request: &ScoreRequest) -> Result<MetricScore, GatewayError> {
        let info = self.info(endpoint_id)?;
        let direction = info
            .direction
            .ok_or_else(|| GatewayError::DirectionMissing { endpoint: endpoint_id.to_owned() })?;
        let mut body = json!({ "hypothesis": request.hypothesis });
        if let Some(source) = &request.source {
            body["source"] = json!(source);
        }
        if let Some(reference) = &request.reference {
            body["reference"] = json!(reference);
        }
        if let Some(lp) = &request.lp {
            body["lp"] = json!(lp);
        }
        let response: ValueResponse =
            self.call(endpoint_id, Route::Score, Some(body), true, |bytes| {
                serde_json::from_slice(bytes).map_err(|e| e.to_string())
            })?;
        MetricScore::new(&info.metric_id, response.value, direction).map_err(|e| {
            GatewayError::MalformedResponse { endpoint: endpoint_id.to_owned(), message: e.to_string() }
        })
    }

    /// Reference-free quality of a candidate answer for a source text,
    /// used as the verifiable-reward quality gate.
    pub fn reward(
        &self,
        endpoint_id: &str,
        source: &str,
        candidate: &str,
        lp: Option<&str>,
    ) -> Result<f64, GatewayError> {
        let mut body = json!({ "source": source, "candidate": candidate });
        if let Some(lp) = lp {
            body["lp"] = json!(lp);
        }
        let response: ValueResponse =
            self.call(endpoint_id, Route::Reward, Some(body), true, |bytes| {
                serde_json::from_slice(bytes).map_err(|e| e.to_string())
            })?;
        Ok(response.value)
    }

    pub fn info(&self, endpoint_id: &str) -> Result<EndpointInfo, GatewayError> {
        let endpoint = self.endpoint(endpoint_id)?;
        if let Some(info) = endpoint.info.get() {
            return Ok(info.clone());
        }
        let info: EndpointInfo = self.call(endpoint_id, Route::Info, None, true, |bytes| {
            serde_json::from_slice(bytes).map_err(|e| e.to_string())
        })?;
        let _ = endpoint.info.set(info.clone());
        Ok(info)
    }

    fn endpoint(&self, id: &str) -> Result<&Endpoint, GatewayError> {
        self.endpoints.get(id).ok_or_else(|| GatewayError::UnknownEndpoint(id.to_owned()))
    }

    fn cache_key(&self, endpoint: &Endpoint, id: &str, route: Route, body: &Option<serde_json::Value>) -> String {
        let body_canonical = body
            .as_ref()
            .map(|v| serde_json::to_string(v).expect("json value serializes"))
            .unwrap_or_default();
        let material = format!(
            "{id}\n{base}\n{path}\n{body_canonical}",
            base = endpoint.config.base_url,
            path = route.path()
        );
        sha256_hex(material.as_bytes())
    }

    /// Shared request path: auth, cache lookup, rate limit, bounded
    /// concurrency, retry loop, decode, cache store. `parse` must fully
    /// validate the body; its failure on a cached entry demotes the entry
    /// to a miss, and on a live response becomes `MalformedResponse`.
    fn call<T>(
        &self,
        endpoint_id: &str,
        route: Route,
        body: Option<serde_json::Value>,
        cacheable: bool,
        parse: impl Fn(&[u8]) -> Result<T, String>,
    ) -> Result<T, GatewayError> {
        let endpoint = self.endpoint(endpoint_id)?;

        let auth_token = match &endpoint.config.auth_token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| GatewayError::AuthMissing {
                endpoint: endpoint_id.to_owned(),
                env_var: var.clone(),
            })?),
            None => None,
        };

        let cache_key = self.cache_key(endpoint, endpoint_id, route, &body);
        if cacheable {
            if let Some(cache) = &self.cache {
                if let Some(bytes) = cache.get(&cache_key) {
                    if let Ok(value) = parse(&bytes) {
                        return Ok(value);
                    }
                    // Unreadable entry: fall through and rewrite below.
                }
            }
        }

        let request = WireRequest {
            endpoint_id: endpoint_id.to_owned(),
            base_url: endpoint.config.base_url.clone(),
            route,
            body,
            auth_token,
            timeout: endpoint.config.timeout,
        };

        let _permit = endpoint.semaphore.as_ref().map(|s| s.acquire());
        if let Some(limiter) = &endpoint.limiter {
            limiter.acquire(self.clock.as_ref());
        }

        let mut attempts = 0;
        let mut last_failure = String::new();
        let max_attempts = endpoint.config.max_retries + 1;
        while attempts < max_attempts {
            if attempts > 0 {
                let backoff = Duration::from_millis(100 << (attempts - 1).min(6));
                self.clock.sleep(backoff);
                if let Some(limiter) = &endpoint.limiter {
                    limiter.acquire(self.clock.as_ref());
                }
            }
            attempts += 1;
            match self.transport.execute(&request) {
                Ok(response) if (200..300).contains(&response.status) => {
                    let value = parse(&response.body).map_err(|message| {
                        GatewayError::MalformedResponse {
                            endpoint: endpoint_id.to_owned(),
                            message,
                        }
                    })?;
                    if cacheable {
                        if let Some(cache) = &self.cache {
                            let _ = cache.put(&cache_key, &response.body);
                        }
                    }
                    return Ok(value);
                }
                Ok(response) => {
                    let snippet: String =
                        String::from_utf8_lossy(&response.body).chars().take(200).collect();
                    last_failure = format!("HTTP {}: {snippet}", response.status);
                    let retryable = response.status == 429 || response.status >= 500;
                    if !retryable {
                        break;
                    }
                }
                Err(e) => last_failure = e.to_string(),
            }
        }
        Err(GatewayError::EndpointUnavailable {
            endpoint: endpoint_id.to_owned(),
            attempts,
            message: last_failure,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Turn;
    use mock::{MockReply, MockTransport};
    use serde_json::json;

    fn score_backend(mock: &MockTransport, id: &str, value: f64) {
        mock.on(id, Route::Info, |_| {
            MockReply::ok(json!({"metric_id": "mockmetric", "direction": "higher_better"}))
        });
        mock.on(id, Route::Score, move |_| MockReply::ok(json!({ "value": value })));
    }

    fn gateway_with(mock: Arc<MockTransport>) -> Gateway {
        Gateway::builder()
            .endpoint("metric", EndpointConfig::new("mock://metric"))
            .endpoint("generator", EndpointConfig::new("mock://generator"))
            .transport(mock)
            .clock(Arc::new(limiter::ManualClock::new()))
            .build()
            .unwrap()
    }

    fn prompt() -> Conversation {
        Conversation::new(vec![Turn::user("translate this")], "test").unwrap()
    }

    #[test]
    fn score_direction_comes_from_info_handshake() {
        let mock = Arc::new(MockTransport::new());
        mock.on("metric", Route::Info, |_| {
            MockReply::ok(json!({"metric_id": "metricx", "direction": "lower_better"}))
        });
        mock.on("metric", Route::Score, |_| MockReply::ok(json!({"value": -4.58})));
        let gateway = gateway_with(mock);
        let score = gateway
            .score("metric", &ScoreRequest { hypothesis: "h".into(), ..Default::default() })
            .unwrap();
        assert_eq!(score.metric_id(), "metricx");
        assert_eq!(score.direction(), Direction::LowerBetter);
        assert_eq!(score.value(), -4.58);
    }

    #[test]
    fn info_is_fetched_once() {
        let mock = Arc::new(MockTransport::new());
        score_backend(&mock, "metric", 0.5);
        let gateway = gateway_with(Arc::clone(&mock));
        for _ in 0..3 {
            gateway
                .score("metric", &ScoreRequest { hypothesis: "h".into(), ..Default::default() })
                .unwrap();
        }
        assert_eq!(mock.call_count("metric", Route::Info), 1);
        assert_eq!(mock.call_count("metric", Route::Score), 3);
    }

    #[test]
    fn missing_direction_cannot_score() {
        let mock = Arc::new(MockTransport::new());
        mock.on("metric", Route::Info, |_| MockReply::ok(json!({"metric_id": "m"})));
        let gateway = gateway_with(mock);
        let err = gateway
            .score("metric", &ScoreRequest { hypothesis: "h".into(), ..Default::default() })
            .unwrap_err();
        assert!(matches!(err, GatewayError::DirectionMissing { .. }));
    }

    #[test]
    fn generate_returns_requested_sample_count() {
        let mock = Arc::new(MockTransport::new());
        mock.on("generator", Route::Generate, |req| {
            let n = req.body.as_ref().unwrap()["num_samples"].as_u64().unwrap();
            MockReply::ok(json!({ "texts": (0..n).map(|i| format!("t{i}")).collect::<Vec<_>>() }))
        });
        let gateway = gateway_with(mock);
        let texts =
            gateway.generate("generator", &prompt(), &GenParams::sampling(1.0, 4)).unwrap();
        assert_eq!(texts, vec!["t0", "t1", "t2", "t3"]);
    }

    #[test]
    fn short_sample_count_is_malformed() {
        let mock = Arc::new(MockTransport::new());
        mock.on("generator", Route::Generate, |_| MockReply::ok(json!({"texts": ["only one"]})));
        let gateway = gateway_with(mock);
        let err =
            gateway.generate("generator", &prompt(), &GenParams::sampling(1.0, 3)).unwrap_err();
        assert!(matches!(err, GatewayError::MalformedResponse { .. }));
    }

    #[test]
    fn retries_scripted_failures_then_succeeds() {
        let mock = Arc::new(MockTransport::new());
        mock.script(
            "metric",
            Route::Score,
            vec![MockReply::connect_error(), MockReply::status(503, json!({}))],
        );
        score_backend(&mock, "metric", 0.9);
        let gateway = gateway_with(Arc::clone(&mock));
        let score = gateway
            .score("metric", &ScoreRequest { hypothesis: "h".into(), ..Default::default() })
            .unwrap();
        assert_eq!(score.value(), 0.9);
        // Default config allows 2 retries: 3 attempts total.
        assert_eq!(mock.call_count("metric", Route::Score), 3);
    }

    #[test]
    fn exhausted_retries_surface_unavailable() {
        let mock = Arc::new(MockTransport::new());
        mock.on("metric", Route::Info, |_| {
            MockReply::ok(json!({"metric_id": "m", "direction": "higher_better"}))
        });
        mock.on("metric", Route::Score, |_| MockReply::connect_error());
        let gateway = gateway_with(Arc::clone(&mock));
        let err = gateway
            .score("metric", &ScoreRequest { hypothesis: "h".into(), ..Default::default() })
            .unwrap_err();
        match err {
            GatewayError::EndpointUnavailable { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("expected EndpointUnavailable, got {other}"),
        }
    }

    #[test]
    fn client_errors_do_not_retry() {
        let mock = Arc::new(MockTransport::new());
        mock.on("metric", Route::Info, |_| {
            MockReply::ok(json!({"metric_id": "m", "direction": "higher_better"}))
        });
        mock.on("metric", Route::Score, |_| MockReply::status(400, json!({"error": "bad"})));
        let gateway = gateway_with(Arc::clone(&mock));
        let err = gateway
            .score("metric", &ScoreRequest { hypothesis: "h".into(), ..Default::default() })
            .unwrap_err();
        assert!(matches!(err, GatewayError::EndpointUnavailable { attempts: 1, .. }));
        assert_eq!(mock.call_count("metric", Route::Score), 1);
    }

    #[test]
    fn malformed_json_does_not_retry() {
        let mock = Arc::new(MockTransport::new());
        mock.on("metric", Route::Info, |_| {
            MockReply::ok(json!({"metric_id": "m", "direction": "higher_better"}))
        });
        mock.on("metric", Route::Score, |_| MockReply::ok(json!({"wrong_field": true})));
        let gateway = gateway_with(Arc::clone(&mock));
        let err = gateway
            .score("metric", &ScoreRequest { hypothesis: "h".into(), ..Default::default() })
            .unwrap_err();
        assert!(matches!(err, GatewayError::MalformedResponse { .. }));
        assert_eq!(mock.call_count("metric", Route::Score), 1);
    }

    #[test]
    fn unknown_endpoint() {
        let gateway = gateway_with(Arc::new(MockTransport::new()));
        assert!(matches!(
            gateway.info("nope"),
            Err(GatewayError::UnknownEndpoint(id)) if id == "nope"
        ));
    }

    #[test]
    fn auth_env_missing_fails_before_any_transport_call() {
        let mock = Arc::new(MockTransport::new());
        score_backend(&mock, "metric", 0.5);
        let mut config = EndpointConfig::new("mock://metric");
        config.auth_token_env = Some("MTFORGE_TEST_TOKEN_THAT_IS_NOT_SET".into());
        let gateway = Gateway::builder()
            .endpoint("metric", config)
            .transport(mock.clone())
            .build()
            .unwrap();
        let err = gateway.info("metric").unwrap_err();
        assert!(matches!(err, GatewayError::AuthMissing { .. }));
        assert_eq!(mock.total_calls(), 0);
    }

    #[test]
    fn deterministic_generation_caches() {
        let dir = tempfile::tempdir().unwrap();
        let mock = Arc::new(MockTransport::new());
        mock.on("generator", Route::Generate, |_| MockReply::ok(json!({"texts": ["x"]})));
        let gateway = Gateway::builder()
            .endpoint("generator", EndpointConfig::new("mock://generator"))
            .transport(mock.clone())
            .cache_dir(dir.path())
            .build()
            .unwrap();

        let zero_temp = GenParams::default();
        gateway.generate("generator", &prompt(), &zero_temp).unwrap();
        gateway.generate("generator", &prompt(), &zero_temp).unwrap();
        assert_eq!(mock.call_count("generator", Route::Generate), 1);

        let sampled = GenParams::sampling(0.9, 1);
        gateway.generate("generator", &prompt(), &sampled).unwrap();
        gateway.generate("generator", &prompt(), &sampled).unwrap();
        assert_eq!(mock.call_count("generator", Route::Generate), 3);

        let seeded = GenParams { seed: Some(7), ..GenParams::sampling(0.9, 1) };
        gateway.generate("generator", &prompt(), &seeded).unwrap();
        gateway.generate("generator", &prompt(), &seeded).unwrap();
        assert_eq!(mock.call_count("generator", Route::Generate), 4);
    }

    #[test]
    fn cache_survives_new_gateway_on_same_dir() {
        let dir = tempfile::tempdir().unwrap();
        let build = |mock: Arc<MockTransport>| {
            Gateway::builder()
                .endpoint("metric", EndpointConfig::new("mock://metric"))
                .transport(mock)
                .cache_dir(dir.path())
                .build()
                .unwrap()
        };
        let request = ScoreRequest { hypothesis: "h".into(), ..Default::default() };

        let first_mock = Arc::new(MockTransport::new());
        score_backend(&first_mock, "metric", 0.7);
        let first = build(Arc::clone(&first_mock));
        first.score("metric", &request).unwrap();
        assert_eq!(first_mock.total_calls(), 2);

        // Fresh gateway, no handlers installed: everything must come from disk.
        let second_mock = Arc::new(MockTransport::new());
        let second = build(Arc::clone(&second_mock));
        let score = second.score("metric", &request).unwrap();
        assert_eq!(score.value(), 0.7);
        assert_eq!(second_mock.total_calls(), 0);
    }

    #[test]
    fn corrupt_cache_entry_is_a_miss_and_gets_rewritten() {
        let dir = tempfile::tempdir().unwrap();
        let mock = Arc::new(MockTransport::new());
        score_backend(&mock, "metric", 0.7);
        let gateway = Gateway::builder()
            .endpoint("metric", EndpointConfig::new("mock://metric"))
            .transport(mock.clone())
            .cache_dir(dir.path())
            .build()
            .unwrap();
        let request = ScoreRequest { hypothesis: "h".into(), ..Default::default() };
        gateway.score("metric", &request).unwrap();

        // Vandalize every cache entry.
        let mut entries = Vec::new();
        fn walk(dir: &std::path::Path, out: &mut Vec<std::path::PathBuf>) {
            for entry in std::fs::read_dir(dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    walk(&path, out);
                } else {
                    out.push(path);
                }
            }
        }
        walk(dir.path(), &mut entries);
        assert!(!entries.is_empty());
        for path in &entries {
            std::fs::write(path, b"{corrupt").unwrap();
        }

        // A fresh gateway sees only the vandalized disk entries, treats
        // them as misses, refetches, and rewrites them.
        let fresh = Gateway::builder()
            .endpoint("metric", EndpointConfig::new("mock://metric"))
            .transport(mock.clone())
            .cache_dir(dir.path())
            .build()
            .unwrap();
        let score = fresh.score("metric", &request).unwrap();
        assert_eq!(score.value(), 0.7);
        for path in &entries {
            let bytes = std::fs::read(path).unwrap();
            assert!(serde_json::from_slice::<serde_json::Value>(&bytes).is_ok());
        }
    }

    #[test]
    fn in_flight_concurrency_is_bounded() {
        let mock = Arc::new(MockTransport::new());
        mock.on("metric", Route::Info, |_| {
            MockReply::ok(json!({"metric_id": "m", "direction": "higher_better"}))
        });
        mock.on("metric", Route::Score, |_| MockReply::ok(json!({"value": 0.1})));
        mock.set_latency(Duration::from_millis(2));
        let mut config = EndpointConfig::new("mock://metric");
        config.max_in_flight = Some(2);
        let gateway = Gateway::builder()
            .endpoint("metric", config)
            .transport(mock.clone())
            .build()
            .unwrap();
        gateway.info("metric").unwrap();

        crate::pipeline::par_map_ordered((0..24).collect(), 8, |_, _: i32| {
            gateway
                .score("metric", &ScoreRequest { hypothesis: "h".into(), ..Default::default() })
                .unwrap()
        });
        assert!(mock.peak_in_flight() <= 2, "peak was {}", mock.peak_in_flight());
    }

    #[test]
    fn rate_limited_calls_never_exceed_budget_in_simulated_time() {
        let mock = Arc::new(MockTransport::new());
        mock.on("metric", Route::Info, |_| {
            MockReply::ok(json!({"metric_id": "m", "direction": "higher_better"}))
        });
        mock.on("metric", Route::Score, |_| MockReply::ok(json!({"value": 0.1})));
        let clock = Arc::new(limiter::ManualClock::new());
        let mut config = EndpointConfig::new("mock://metric");
        config.requests_per_minute = Some(4);
        let gateway = Gateway::builder()
            .endpoint("metric", config)
            .transport(mock.clone())
            .clock(Arc::clone(&clock) as Arc<dyn Clock>)
            .build()
            .unwrap();

        let start = clock.now();
        for _ in 0..9 {
            gateway
                .score("metric", &ScoreRequest { hypothesis: "h".into(), ..Default::default() })
                .unwrap();
        }
        // 9 score calls + 1 info call = 10 acquisitions at 4/min: the last
        // one cannot happen before two full windows have elapsed.
        assert!(clock.now() - start >= Duration::from_secs(120));
    }
}
