//! An in-memory [`Transport`] for tests and offline runs. Handlers are
//! plain closures keyed by endpoint and route; scripted replies let tests
//! express "fail twice, then succeed" without any timing dependence.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;

use super::transport::{Route, Transport, TransportError, WireRequest, WireResponse};

pub enum MockReply {
    Json(u16, Value),
    Fail(TransportError),
}

impl MockReply {
    /// A 200 reply with the given JSON body.
    pub fn ok(body: Value) -> Self {
        MockReply::Json(200, body)
    }

    pub fn status(code: u16, body: Value) -> Self {
        MockReply::Json(code, body)
    }

    pub fn connect_error() -> Self {
        MockReply::Fail(TransportError::Connect("mock connection refused".into()))
    }
}

type Handler = Box<dyn Fn(&WireRequest) -> MockReply + Send + Sync>;

#[derive(Default)]
struct Entry {
    script: VecDeque<MockReply>,
    handler: Option<Handler>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    pub endpoint_id: String,
    pub route: &'static str,
}

#[derive(Default)]
pub struct MockTransport {
    entries: Mutex<HashMap<(String, &'static str), Entry>>,
    log: Mutex<Vec<CallRecord>>,
    latency: Mutex<Option<Duration>>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl MockTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Installs the steady-state handler for an endpoint and route.
    pub fn on(
        &self,
        endpoint_id: &str,
        route: Route,
        handler: impl Fn(&WireRequest) -> MockReply + Send + Sync + 'static,
    ) {
        let mut entries = self.entries.lock().unwrap();
        entries.entry((endpoint_id.to_owned(), route.path())).or_default().handler =
            Some(Box::new(handler));
    }

    /// Queues one-shot replies consumed before the steady-state handler.
    pub fn script(&self, endpoint_id: &str, route: Route, replies: Vec<MockReply>) {
        let mut entries = self.entries.lock().unwrap();
        entries
            .entry((endpoint_id.to_owned(), route.path()))
            .or_default()
            .script
            .extend(replies);
    }

    /// Adds an artificial per-call delay, useful for observing concurrency.
    pub fn set_latency(&self, latency: Duration) {
        *self.latency.lock().unwrap() = Some(latency);
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.log.lock().unwrap().clone()
    }

    pub fn call_count(&self, endpoint_id: &str, route: Route) -> usize {
        self.log
            .lock()
            .unwrap()
            .iter()
            .filter(|c| c.endpoint_id == endpoint_id && c.route == route.path())
            .count()
    }

    pub fn total_calls(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    /// Highest number of concurrently executing calls observed so far.
    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }
}

impl Transport for MockTransport {
    fn execute(&self, request: &WireRequest) -> Result<WireResponse, TransportError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        self.log.lock().unwrap().push(CallRecord {
            endpoint_id: request.endpoint_id.clone(),
            route: request.route.path(),
        });

        let latency = *self.latency.lock().unwrap();
        if let Some(latency) = latency {
            std::thread::sleep(latency);
        }

        let reply = {
            let mut entries = self.entries.lock().unwrap();
            let key = (request.endpoint_id.clone(), request.route.path());
            match entries.get_mut(&key) {
                Some(entry) => match entry.script.pop_front() {
                    Some(reply) => Some(reply),
                    None => entry.handler.as_ref().map(|h| h(request)),
                },
                None => None,
            }
        };

        self.in_flight.fetch_sub(1, Ordering::SeqCst);

        match reply {
            Some(MockReply::Json(status, value)) => Ok(WireResponse {
                status,
                body: serde_json::to_vec(&value).expect("mock body serializes"),
            }),
            Some(MockReply::Fail(error)) => Err(error),
            None => Ok(WireResponse {
                status: 404,
                body: format!(
                    "no mock handler for {} {}",
                    request.endpoint_id,
                    request.route.path()
                )
                .into_bytes(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn request(endpoint: &str, route: Route) -> WireRequest {
        WireRequest {
            endpoint_id: endpoint.into(),
            base_url: "mock://".into(),
            route,
            body: None,
            auth_token: None,
            timeout: Duration::from_secs(1),
        }
    }

    #[test]
    fn script_consumed_before_handler() {
        let mock = MockTransport::new();
        mock.on("m", Route::Score, |_| MockReply::ok(json!({"value": 1.0})));
        mock.script("m", Route::Score, vec![MockReply::status(500, json!({}))]);

        let first = mock.execute(&request("m", Route::Score)).unwrap();
        assert_eq!(first.status, 500);
        let second = mock.execute(&request("m", Route::Score)).unwrap();
        assert_eq!(second.status, 200);
        assert_eq!(mock.call_count("m", Route::Score), 2);
    }

    #[test]
    fn unhandled_route_is_404() {
        let mock = MockTransport::new();
        let response = mock.execute(&request("ghost", Route::Info)).unwrap();
        assert_eq!(response.status, 404);
    }
}
