//! Session-oriented analysis server speaking newline-delimited JSON.
//!
//! Each request is one JSON object on one line:
//!
//! ```text
//! {"op": "open", "input_dim": 1}
//! {"op": "append", "session": "<token>", "layer": {"type": "relu"}}
//! {"op": "line", "session": "<token>", "a": [-1.0], "b": [2.0]}
//! {"op": "plane", "session": "<token>", "vertices": [[0, 0], [1, 0], [0, 1]]}
//! {"op": "close", "session": "<token>"}
//! ```
//!
//! Every request line gets exactly one reply line, either
//! `{"ok":true,...}` or `{"ok":false,"error":{"kind":...,"detail":...}}`.
//! Results of `line` and `plane` are embedded verbatim under `"result"` in
//! the same canonical form the CLI writes.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};

use crate::geometry::{validate_region, GeometryError, Point};
use crate::network::{parse_json_layer, Network, NetworkError};
use crate::symbolic::{Engine, EngineError};

pub const DEFAULT_PORT: u16 = 7878;

/// Structured failure of one request.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceError {
    pub kind: &'static str,
    pub detail: String,
    /// Regions produced before a budget error.
    pub count: Option<usize>,
}

impl ServiceError {
    fn new(kind: &'static str, detail: impl Into<String>) -> Self {
        Self {
            kind,
            detail: detail.into(),
            count: None,
        }
    }

    fn to_json(&self) -> Value {
        let mut err = json!({ "kind": self.kind, "detail": self.detail });
        if let Some(count) = self.count {
            err["count"] = json!(count);
        }
        json!({ "ok": false, "error": err })
    }
}

impl From<GeometryError> for ServiceError {
    fn from(e: GeometryError) -> Self {
        ServiceError::new("geometry", e.to_string())
    }
}

impl From<NetworkError> for ServiceError {
    fn from(e: NetworkError) -> Self {
        let kind = match e {
            NetworkError::DimensionMismatch { .. } => "dimension",
            _ => "network",
        };
        ServiceError::new(kind, e.to_string())
    }
}

impl From<EngineError> for ServiceError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Geometry(g) => g.into(),
            EngineError::Network(n) => n.into(),
            EngineError::DimensionMismatch { .. } => ServiceError::new("dimension", e.to_string()),
            EngineError::DegenerateLine => ServiceError::new("geometry", e.to_string()),
            EngineError::BudgetExceeded { count, .. } => ServiceError {
                count: Some(count),
                ..ServiceError::new("resource", e.to_string())
            },
            _ => ServiceError::new("internal", e.to_string()),
        }
    }
}

#[derive(Deserialize)]
struct Envelope {
    op: String,
    session: Option<String>,
    #[serde(default)]
    id: Option<Value>,
}

#[derive(Deserialize)]
struct OpenArgs {
    input_dim: usize,
}

#[derive(Deserialize)]
struct AppendArgs {
    layer: Value,
}

#[derive(Deserialize)]
struct LineArgs {
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Deserialize)]
struct PlaneArgs {
    vertices: Vec<Vec<f64>>,
}

type Session = Arc<Mutex<Network>>;

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn args<T: for<'de> Deserialize<'de>>(request: &Value) -> Result<T, ServiceError> {
    T::deserialize(request).map_err(|e| ServiceError::new("request", e.to_string()))
}

/// Session table plus the shared engine. Cheap to share behind an `Arc`.
#[derive(Debug, Default)]
pub struct Service {
    engine: Engine,
    sessions: Mutex<HashMap<String, Session>>,
}

impl Service {
    pub fn new(engine: Engine) -> Self {
        Self {
            engine,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn session_count(&self) -> usize {
        lock(&self.sessions).len()
    }

    fn session(&self, token: Option<&str>) -> Result<Session, ServiceError> {
        let token = token.ok_or_else(|| ServiceError::new("request", "missing \"session\""))?;
        lock(&self.sessions)
            .get(token)
            .cloned()
            .ok_or_else(|| ServiceError::new("session", format!("unknown session {token:?}")))
    }

    /// Handles one request line and returns the reply line (without the
    /// trailing newline). Never panics.
    pub fn handle_line(&self, line: &str) -> String {
        self.handle_logged(line).0
    }

    fn handle_logged(&self, line: &str) -> (String, String) {
        let request: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                return (
                    ServiceError::new("parse", e.to_string()).to_json().to_string(),
                    "?".into(),
                )
            }
        };
        let envelope: Envelope = match args(&request) {
            Ok(e) => e,
            Err(e) => return (e.to_json().to_string(), "?".into()),
        };
        let outcome = catch_unwind(AssertUnwindSafe(|| self.dispatch(&envelope, &request)))
            .unwrap_or_else(|_| Err(ServiceError::new("internal", "request handler panicked")));
        let status = match &outcome {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("error {}", e.kind),
        };
        let reply = match outcome {
            Ok(reply) => reply,
            Err(e) => e.to_json().to_string(),
        };
        let reply = match &envelope.id {
            // Splice the id in front so embedded results stay byte-exact.
            Some(id) => format!("{{\"id\":{},{}", id, &reply[1..]),
            None => reply,
        };
        (reply, format!("{} {}", envelope.op, status))
    }

    fn dispatch(&self, env: &Envelope, request: &Value) -> Result<String, ServiceError> {
        match env.op.as_str() {
            "open" => {
                let OpenArgs { input_dim } = args(request)?;
                if input_dim == 0 {
                    return Err(ServiceError::new("request", "input_dim must be positive"));
                }
                let token = uuid::Uuid::new_v4().simple().to_string();
                lock(&self.sessions).insert(token.clone(), Arc::new(Mutex::new(Network::identity(input_dim))));
                Ok(json!({ "ok": true, "session": token }).to_string())
            }
            "close" => {
                let token = env.session.as_deref().unwrap_or_default();
                match lock(&self.sessions).remove(token) {
                    Some(_) => Ok(json!({ "ok": true }).to_string()),
                    None => Err(ServiceError::new("session", format!("unknown session {token:?}"))),
                }
            }
            "append" => {
                let AppendArgs { layer } = args(request)?;
                let layer = parse_json_layer(layer)?;
                let session = self.session(env.session.as_deref())?;
                let mut net = lock(&session);
                net.push(layer)?;
                Ok(json!({
                    "ok": true,
                    "layers": net.layers().len(),
                    "output_dim": net.output_dim(),
                })
                .to_string())
            }
            "line" => {
                let LineArgs { a, b } = args(request)?;
                let (a, b) = (Point::new(a)?, Point::new(b)?);
                let session = self.session(env.session.as_deref())?;
                let net = lock(&session);
                let line = self.engine.symbolic_rep_1d(&net, &a, &b)?;
                Ok(format!("{{\"ok\":true,\"result\":{}}}", line.to_json_string()))
            }
            "plane" => {
                let PlaneArgs { vertices } = args(request)?;
                let vertices = vertices.into_iter().map(Point::new).collect::<Result<Vec<_>, _>>()?;
                let session = self.session(env.session.as_deref())?;
                let net = lock(&session);
                if let Some(v) = vertices.iter().find(|v| v.dim() != net.input_dim()) {
                    return Err(ServiceError::new(
                        "dimension",
                        format!("vertex has dimension {}, session expects {}", v.dim(), net.input_dim()),
                    ));
                }
                let x = validate_region(vertices, self.engine.tolerances())?;
                let parts = self.engine.symbolic_rep_2d(&net, &x)?;
                Ok(format!("{{\"ok\":true,\"result\":{}}}", parts.to_json_string()))
            }
            other => Err(ServiceError::new("request", format!("unknown op {other:?}"))),
        }
    }

    /// Serves one connection until EOF or `shutdown` is set.
    pub fn serve_connection(&self, stream: TcpStream, shutdown: &AtomicBool) -> io::Result<()> {
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_else(|_| "?".into());
        stream.set_nonblocking(false)?;
        stream.set_read_timeout(Some(Duration::from_millis(200)))?;
        let mut writer = stream.try_clone()?;
        let mut reader = BufReader::new(stream);
        let mut buf = Vec::new();
        loop {
            match reader.read_until(b'\n', &mut buf) {
                Ok(0) if buf.is_empty() => return Ok(()),
                Ok(_) => {}
                Err(e)
                    if matches!(
                        e.kind(),
                        ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted
                    ) =>
                {
                    if shutdown.load(Ordering::SeqCst) {
                        return Ok(());
                    }
                    continue;
                }
                Err(e) => return Err(e),
            }
            let text = String::from_utf8_lossy(&buf);
            let text = text.trim();
            if !text.is_empty() {
                let started = Instant::now();
                let (reply, status) = self.handle_logged(text);
                log::info!("{peer} {status} {:.3}ms", started.elapsed().as_secs_f64() * 1e3);
                writer.write_all(reply.as_bytes())?;
                writer.write_all(b"\n")?;
                writer.flush()?;
            }
            let eof = buf.last() != Some(&b'\n');
            buf.clear();
            if eof {
                return Ok(());
            }
        }
    }
}

/// Accepts connections on `listener` until `shutdown` is set, one thread
/// per connection. Returns after every connection thread has finished.
pub fn serve(listener: TcpListener, service: Arc<Service>, shutdown: Arc<AtomicBool>) -> io::Result<()> {
    listener.set_nonblocking(true)?;
    let mut workers = Vec::new();
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let (service, shutdown) = (Arc::clone(&service), Arc::clone(&shutdown));
                workers.push(std::thread::spawn(move || {
                    if let Err(e) = service.serve_connection(stream, &shutdown) {
                        log::warn!("connection closed: {e}");
                    }
                }));
                workers.retain(|w| !w.is_finished());
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(20)),
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reply(s: &Service, line: &str) -> Value {
        serde_json::from_str(&s.handle_line(line)).unwrap()
    }

    fn open(s: &Service, dim: usize) -> String {
        let r = reply(s, &format!(r#"{{"op":"open","input_dim":{dim}}}"#));
        r["session"].as_str().unwrap().to_string()
    }

    fn example_session(s: &Service) -> String {
        let t = open(s, 1);
        for layer in [
            r#"{"type":"affine","weights":[[1],[1],[-1]],"bias":[-1,0,0]}"#,
            r#"{"type":"relu"}"#,
            r#"{"type":"affine","weights":[[1,-1,-1]],"bias":[0]}"#,
        ] {
            let r = reply(s, &format!(r#"{{"op":"append","session":"{t}","layer":{layer}}}"#));
            assert_eq!(r["ok"], true, "{r}");
        }
        t
    }

    #[test]
    fn example_session_line() {
        let s = Service::default();
        let t = example_session(&s);
        let r = reply(&s, &format!(r#"{{"op":"line","session":"{t}","a":[-1],"b":[2]}}"#));
        let bp: Vec<f64> = serde_json::from_value(r["result"]["breakpoints"].clone()).unwrap();
        assert_eq!(bp.len(), 4);
        assert!((bp[1] - 1.0 / 3.0).abs() < 1e-12 && (bp[2] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_session_line() {
        let s = Service::default();
        let t = open(&s, 2);
        let r = reply(&s, &format!(r#"{{"op":"line","session":"{t}","a":[0,0],"b":[1,1]}}"#));
        assert_eq!(r["result"]["breakpoints"], json!([0.0, 1.0]));
        let r = reply(&s, &format!(r#"{{"op":"line","session":"{t}","a":[0],"b":[1]}}"#));
        assert_eq!(r["error"]["kind"], "dimension");
    }

    #[test]
    fn bad_append_leaves_session_unchanged() {
        let s = Service::default();
        let t = open(&s, 2);
        let r = reply(
            &s,
            &format!(r#"{{"op":"append","session":"{t}","layer":{{"type":"relu"}}}}"#),
        );
        assert_eq!(r["layers"], 1);
        let r = reply(
            &s,
            &format!(r#"{{"op":"append","session":"{t}","layer":{{"type":"affine","weights":[[1,2,3]],"bias":[0]}}}}"#),
        );
        assert_eq!(r["ok"], false);
        assert_eq!(r["error"]["kind"], "dimension");
        let r = reply(
            &s,
            &format!(r#"{{"op":"append","session":"{t}","layer":{{"type":"relu"}}}}"#),
        );
        assert_eq!(r["layers"], 2);
    }

    #[test]
    fn plane_requests() {
        let s = Service::default();
        let t = open(&s, 2);
        reply(
            &s,
            &format!(r#"{{"op":"append","session":"{t}","layer":{{"type":"relu"}}}}"#),
        );
        let square = "[[-0.5,-0.5],[0.5,-0.5],[0.5,0.5],[-0.5,0.5]]";
        let r = reply(&s, &format!(r#"{{"op":"plane","session":"{t}","vertices":{square}}}"#));
        assert_eq!(r["result"]["regions"].as_array().unwrap().len(), 4);
        let cw = "[[-0.5,-0.5],[-0.5,0.5],[0.5,0.5],[0.5,-0.5]]";
        let r = reply(&s, &format!(r#"{{"op":"plane","session":"{t}","vertices":{cw}}}"#));
        assert_eq!(r["error"]["kind"], "geometry");
    }

    #[test]
    fn budget_error_reports_count() {
        let engine = Engine::new(crate::symbolic::EngineConfig {
            region_budget: 3,
            ..Default::default()
        })
        .unwrap();
        let s = Service::new(engine);
        let t = open(&s, 2);
        reply(
            &s,
            &format!(r#"{{"op":"append","session":"{t}","layer":{{"type":"relu"}}}}"#),
        );
        let square = "[[-0.5,-0.5],[0.5,-0.5],[0.5,0.5],[-0.5,0.5]]";
        let r = reply(&s, &format!(r#"{{"op":"plane","session":"{t}","vertices":{square}}}"#));
        assert_eq!(r["error"]["kind"], "resource");
        assert!(r["error"]["count"].as_u64().unwrap() > 3);
    }

    #[test]
    fn every_line_gets_one_reply() {
        let s = Service::default();
        for line in [
            "",
            "not json",
            "[]",
            "{}",
            r#"{"op":"bogus"}"#,
            r#"{"op":"line","session":"nope","a":[0],"b":[1]}"#,
            r#"{"op":"open"}"#,
            r#"{"op":"open","input_dim":0}"#,
            r#"{"op":"close","session":"nope"}"#,
            r#"{"op":"append","session":"nope","layer":{"type":"conv"}}"#,
        ] {
            let r = reply(&s, line);
            assert_eq!(r["ok"], false, "{line}");
            assert!(r["error"]["kind"].is_string());
            assert!(!s.handle_line(line).contains('\n'));
        }
    }

    #[test]
    fn id_is_echoed() {
        let s = Service::default();
        let r = reply(&s, r#"{"op":"open","input_dim":1,"id":7}"#);
        assert_eq!(r["id"], 7);
        assert_eq!(r["ok"], true);
    }

    #[test]
    fn sessions_are_isolated() {
        let s = Arc::new(Service::default());
        let tokens: Vec<String> = (0..8).map(|_| open(&s, 2)).collect();
        std::thread::scope(|scope| {
            for (i, t) in tokens.iter().enumerate() {
                let s = Arc::clone(&s);
                scope.spawn(move || {
                    for _ in 0..=i {
                        let r = reply(
                            &s,
                            &format!(r#"{{"op":"append","session":"{t}","layer":{{"type":"relu"}}}}"#),
                        );
                        assert_eq!(r["ok"], true);
                    }
                });
            }
        });
        for (i, t) in tokens.iter().enumerate() {
            let session = s.session(Some(t)).unwrap();
            assert_eq!(lock(&session).layers().len(), i + 1);
        }
        let r = reply(&s, &format!(r#"{{"op":"close","session":"{}"}}"#, tokens[0]));
        assert_eq!(r["ok"], true);
        assert_eq!(s.session_count(), 7);
    }

    #[test]
    fn tcp_round_trip_and_shutdown() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let shutdown = Arc::new(AtomicBool::new(false));
        let server = {
            let shutdown = Arc::clone(&shutdown);
            std::thread::spawn(move || serve(listener, Arc::new(Service::default()), shutdown))
        };
        let mut stream = TcpStream::connect(addr).unwrap();
        stream
            .write_all(b"garbage\n{\"op\":\"open\",\"input_dim\":1}\n")
            .unwrap();
        let mut lines = BufReader::new(stream.try_clone().unwrap()).lines();
        let first: Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
        let second: Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
        assert_eq!(first["ok"], false);
        assert_eq!(second["ok"], true);
        shutdown.store(true, Ordering::SeqCst);
        server.join().unwrap().unwrap();
    }
}
