//! Stdio request/response protocol over a [`Session`].
//!
//! Messages are JSON-RPC 2.0 objects in `Content-Length` frames. Every
//! request with an id gets exactly one response; notifications queued by a
//! command are written before its response. See `docs/protocol.md`.

pub mod framing;

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::config::check_against_source;
use crate::session::{Mode, Notification, Rejection, Session};
use crate::source_scan::{scan, SourceDoc};

pub use framing::{read_frame, write_frame, FrameError};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const INTERNAL_ERROR: i64 = -32603;
/// A session command was refused; `data` holds the typed rejection.
pub const REJECTED: i64 = -32000;

pub const METHODS: &[&str] = &[
    "scan",
    "check",
    "files",
    "offers",
    "offer",
    "start",
    "advance",
    "continue",
    "jump_into",
    "step_back",
    "open_task",
    "edit",
    "submit",
    "validate",
    "exit",
    "state",
    "shutdown",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<Json>,
}

impl RpcError {
    fn new(code: i64, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            data: None,
        }
    }
}

impl From<Rejection> for RpcError {
    fn from(r: Rejection) -> Self {
        Self {
            code: REJECTED,
            message: r.to_string(),
            data: serde_json::to_value(&r).ok(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PathParams {
    path: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OfferParams {
    path: PathBuf,
    line: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StartParams {
    function: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OpenTaskParams {
    #[serde(default)]
    index: usize,
    #[serde(default)]
    confirm: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextParams {
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn params<T: DeserializeOwned>(p: Json) -> Result<T, RpcError> {
    let p = if p.is_null() { json!({}) } else { p };
    serde_json::from_value(p).map_err(|e| RpcError::new(INVALID_PARAMS, format!("invalid params: {e}")))
}

fn to_json<T: Serialize>(v: &T) -> Result<Json, RpcError> {
    serde_json::to_value(v).map_err(|e| RpcError::new(INTERNAL_ERROR, e.to_string()))
}

/// What to do after handling one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Shutdown,
}

pub struct Server {
    session: Session,
    last_id: Option<i64>,
}

impl Server {
    pub fn new(session: Session) -> Self {
        Self {
            session,
            last_id: None,
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    fn workspace(&self) -> &Path {
        &self.session.options().workspace
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.workspace().join(p)
        }
    }

    /// Run one method against the session.
    pub fn call(&mut self, method: &str, p: Json) -> Result<Json, RpcError> {
        let s = &mut self.session;
        match method {
            "scan" => {
                let PathParams { path } = params(p)?;
                let doc = SourceDoc::read(&self.resolve(&path)).map_err(|e| {
                    RpcError::new(INVALID_PARAMS, format!("cannot read {}: {e}", path.display()))
                })?;
                to_json(&scan(&doc))
            }
            "check" => {
                let NoParams {} = params(p)?;
                let findings = check_against_source(s.config(), &s.options().workspace);
                Ok(json!({ "findings": findings }))
            }
            "files" => {
                let NoParams {} = params(p)?;
                to_json(&s.config().files)
            }
            "offers" => {
                let NoParams {} = params(p)?;
                to_json(&s.offers())
            }
            "offer" => {
                let OfferParams { path, line } = params(p)?;
                to_json(&s.offer(&path, line)?)
            }
            "start" => {
                let StartParams { function } = params(p)?;
                to_json(&s.start(&function)?)
            }
            "advance" | "continue" => {
                let NoParams {} = params(p)?;
                to_json(&s.advance()?)
            }
            "jump_into" => {
                let NoParams {} = params(p)?;
                to_json(&s.jump_into()?)
            }
            "step_back" => {
                let NoParams {} = params(p)?;
                to_json(&s.step_back()?)
            }
            "open_task" => {
                let OpenTaskParams { index, confirm } = params(p)?;
                to_json(&s.open_task(index, confirm)?)
            }
            "edit" => {
                let TextParams { text } = params(p)?;
                to_json(&s.edit(&text)?)
            }
            "submit" | "validate" => {
                let TextParams { text } = params(p)?;
                to_json(&s.submit(&text)?)
            }
            "exit" => {
                let NoParams {} = params(p)?;
                let restored = s.exit();
                Ok(json!({ "restored": restored }))
            }
            "state" => {
                let NoParams {} = params(p)?;
                to_json(&s.state())
            }
            "shutdown" => {
                let NoParams {} = params(p)?;
                if s.mode() != Mode::Idle {
                    s.exit();
                }
                Ok(Json::Null)
            }
            _ => Err(RpcError::new(
                METHOD_NOT_FOUND,
                format!("unknown method `{method}`"),
            )),
        }
    }

    /// Handle one frame body; returns the messages to write, in order.
    pub fn handle_frame(&mut self, body: &[u8]) -> (Vec<Json>, Flow) {
        let msg: Json = match serde_json::from_slice(body) {
            Ok(v) => v,
            Err(e) => {
                return (
                    vec![error_response(
                        Json::Null,
                        RpcError::new(PARSE_ERROR, format!("parse error: {e}")),
                    )],
                    Flow::Continue,
                )
            }
        };
        let Some(obj) = msg.as_object() else {
            return (
                vec![error_response(
                    Json::Null,
                    RpcError::new(INVALID_REQUEST, "request must be an object"),
                )],
                Flow::Continue,
            );
        };
        let id = obj.get("id").cloned();
        let reply_id = id.clone().unwrap_or(Json::Null);
        let Some(method) = obj.get("method").and_then(Json::as_str) else {
            return (
                vec![error_response(
                    reply_id,
                    RpcError::new(INVALID_REQUEST, "missing method"),
                )],
                Flow::Continue,
            );
        };
        if let Some(v) = obj.get("jsonrpc") {
            if v != "2.0" {
                return (
                    vec![error_response(
                        reply_id,
                        RpcError::new(INVALID_REQUEST, "unsupported jsonrpc version"),
                    )],
                    Flow::Continue,
                );
            }
        }
        let id = match id {
            None => None,
            Some(Json::Number(n)) if n.as_i64().is_some() => {
                let n = n.as_i64().expect("checked");
                if self.last_id.is_some_and(|last| n <= last) {
                    return (
                        vec![error_response(
                            reply_id,
                            RpcError::new(INVALID_REQUEST, "request ids must increase"),
                        )],
                        Flow::Continue,
                    );
                }
                self.last_id = Some(n);
                Some(n)
            }
            Some(_) => {
                return (
                    vec![error_response(
                        Json::Null,
                        RpcError::new(INVALID_REQUEST, "id must be an integer"),
                    )],
                    Flow::Continue,
                );
            }
        };
        let p = obj.get("params").cloned().unwrap_or(Json::Null);
        log::debug!("-> {method}");
        let outcome = self.call(method, p);
        let mut out: Vec<Json> = self
            .session
            .drain_notifications()
            .iter()
            .map(notification_message)
            .collect();
        let flow = if method == "shutdown" && outcome.is_ok() {
            Flow::Shutdown
        } else {
            Flow::Continue
        };
        // requests without an id are fire-and-forget
        if let Some(id) = id {
            out.push(match outcome {
                Ok(result) => json!({ "jsonrpc": "2.0", "id": id, "result": result }),
                Err(e) => error_response(json!(id), e),
            });
        } else if let Err(e) = outcome {
            log::warn!("{method} (no id) failed: {}", e.message);
        }
        (out, flow)
    }

    /// Serve frames until end of input or `shutdown`. Output errors are fatal.
    pub fn serve<R: BufRead, W: Write>(&mut self, mut input: R, mut output: W) -> io::Result<()> {
        loop {
            let (messages, flow) = match read_frame(&mut input) {
                Ok(Some(body)) => self.handle_frame(&body),
                Ok(None) => break,
                Err(e) if e.recoverable() => {
                    log::warn!("malformed frame: {e}");
                    let err = RpcError::new(PARSE_ERROR, format!("malformed frame: {e}"));
                    (vec![error_response(Json::Null, err)], Flow::Continue)
                }
                Err(FrameError::Io(e)) => return Err(e),
                Err(e) => {
                    log::warn!("input closed: {e}");
                    break;
                }
            };
            for m in &messages {
                write_frame(&mut output, &encode(m))?;
            }
            if flow == Flow::Shutdown {
                return Ok(());
            }
        }
        // input closed: end any session so the workspace is restored
        if self.session.mode() != Mode::Idle {
            self.session.exit();
        }
        Ok(())
    }
}

pub fn encode(msg: &Json) -> Vec<u8> {
    serde_json::to_vec(msg).expect("json values always serialize")
}

fn error_response(id: Json, e: RpcError) -> Json {
    json!({ "jsonrpc": "2.0", "id": id, "error": e })
}

/// Wrap a session notification as a JSON-RPC notification.
pub fn notification_message(n: &Notification) -> Json {
    let mut params = serde_json::to_value(n).expect("notifications serialize");
    let method = params
        .as_object_mut()
        .and_then(|o| o.shift_remove("type"))
        .and_then(|t| t.as_str().map(str::to_owned))
        .unwrap_or_default();
    json!({ "jsonrpc": "2.0", "method": method, "params": params })
}
