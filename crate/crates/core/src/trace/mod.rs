//! Line-stepping execution of a materialized sandbox.
//!
//! The child runs a generated shim that reports events over a dedicated
//! pipe (fd 3, with commands read from fd 4), or over magic-prefixed
//! stderr lines when [`Transport::Stderr`] is selected. Program stdout is
//! never parsed except for the result line, which the shim also forwards.

mod shim;
pub mod wire;

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::os::fd::{AsRawFd, OwnedFd};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::interpreter::{resolve_named, InterpreterNotFound};
use crate::sandbox::run::{base_command, kill_group};
use crate::source_scan::LineRange;

pub use shim::{shim_source, ShimConfig, MAX_DEPTH, MAX_ITEMS, STDERR_MAGIC};
pub use wire::{StepCommand, WireMessage};

pub const DEFAULT_STEP_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    InterpreterNotFound(#[from] InterpreterNotFound),
    #[error("trace shim did not start: {0}")]
    ShimHandshakeFailure(String),
    #[error("no trace event within {0:?}; process killed")]
    StepTimeout(Duration),
    #[error("protocol desync: {0}")]
    ProtocolDesync(String),
    #[error("trace session is not paused")]
    NotPaused,
    #[error("trace session already finished")]
    Finished,
    #[error("trace i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Line,
    Call,
    Return,
    Result,
    Exit,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub func: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub locals: BTreeMap<String, String>,
    /// Result literal, return value or error text.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    /// Exit status; `None` when the process was killed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code: Option<i32>,
}

impl TraceEvent {
    fn new(kind: EventKind) -> Self {
        Self {
            kind,
            line: None,
            func: None,
            locals: BTreeMap::new(),
            payload: None,
            code: None,
        }
    }

    fn exit(code: Option<i32>, reason: Option<&str>) -> Self {
        Self {
            code,
            payload: reason.map(str::to_owned),
            ..Self::new(EventKind::Exit)
        }
    }

    fn from_wire(msg: WireMessage) -> Self {
        match msg {
            WireMessage::Ready { .. } => unreachable!("handled during handshake"),
            WireMessage::Line { line, func, locals } => Self {
                line: Some(line),
                func: Some(func),
                locals,
                ..Self::new(EventKind::Line)
            },
            WireMessage::Call { line, func } => Self {
                line: Some(line),
                func: Some(func),
                ..Self::new(EventKind::Call)
            },
            WireMessage::Return { line, func, v } => Self {
                line: Some(line),
                func: Some(func),
                payload: v,
                ..Self::new(EventKind::Return)
            },
            WireMessage::Result { v } => Self {
                payload: Some(v),
                ..Self::new(EventKind::Result)
            },
            WireMessage::Error { text } => Self {
                payload: Some(text),
                ..Self::new(EventKind::Error)
            },
            WireMessage::Exit { code } => Self::exit(Some(code), None),
        }
    }

    pub fn is_pause(&self) -> bool {
        self.kind == EventKind::Line
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transport {
    #[default]
    Fd,
    Stderr,
}

#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub interpreter: PathBuf,
    pub step_timeout: Duration,
    pub transport: Transport,
}

impl TraceOptions {
    pub fn new(interpreter: impl Into<PathBuf>) -> Self {
        Self {
            interpreter: interpreter.into(),
            step_timeout: DEFAULT_STEP_TIMEOUT,
            transport: Transport::Fd,
        }
    }
}

enum Incoming {
    Msg(WireMessage),
    Junk(String),
    Closed,
}

enum CommandSink {
    Pipe(io::PipeWriter),
    Stdin(std::process::ChildStdin),
}

impl CommandSink {
    fn send(&mut self, cmd: &StepCommand) -> io::Result<()> {
        let line = wire::encode_command(cmd);
        match self {
            CommandSink::Pipe(w) => w.write_all(line.as_bytes()),
            CommandSink::Stdin(w) => w.write_all(line.as_bytes()).and_then(|_| w.flush()),
        }
    }
}

/// One traced child process.
pub struct TraceSession {
    child: Option<Child>,
    commands: Option<CommandSink>,
    rx: Receiver<Incoming>,
    timeout: Duration,
    paused: bool,
    finished: bool,
    current: Option<TraceEvent>,
    log: Vec<TraceEvent>,
    stdout: Arc<Mutex<String>>,
    stderr: Arc<Mutex<String>>,
    shim_path: PathBuf,
}

impl std::fmt::Debug for TraceSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceSession")
            .field("pid", &self.pid())
            .field("paused", &self.paused)
            .field("finished", &self.finished)
            .finish()
    }
}

fn spawn_lines<R: Read + Send + 'static>(
    reader: R,
    tx: Sender<Incoming>,
    text: Arc<Mutex<String>>,
    magic: Option<&'static str>,
) {
    thread::spawn(move || {
        let mut reader = BufReader::new(reader);
        let mut buf = Vec::new();
        loop {
            buf.clear();
            match reader.read_until(b'\n', &mut buf) {
                Ok(0) | Err(_) => break,
                Ok(_) => {}
            }
            let line = String::from_utf8_lossy(&buf);
            match magic {
                // event stream
                None => {
                    let msg = match wire::decode_message(&line) {
                        Ok(m) => Incoming::Msg(m),
                        Err(_) => Incoming::Junk(line.trim_end().to_owned()),
                    };
                    if tx.send(msg).is_err() {
                        return;
                    }
                }
                // stderr carrying framed events
                Some(magic) => match line.find(magic) {
                    Some(at) => {
                        text.lock().unwrap().push_str(&line[..at]);
                        let body = &line[at + magic.len()..];
                        let msg = match wire::decode_message(body) {
                            Ok(m) => Incoming::Msg(m),
                            Err(_) => Incoming::Junk(body.trim_end().to_owned()),
                        };
                        if tx.send(msg).is_err() {
                            return;
                        }
                    }
                    None => text.lock().unwrap().push_str(&line),
                },
            }
        }
        let _ = tx.send(Incoming::Closed);
    });
}

fn spawn_drain<R: Read + Send + 'static>(reader: R, text: Arc<Mutex<String>>) {
    thread::spawn(move || {
        let mut reader = BufReader::new(reader);
        let mut buf = Vec::new();
        while let Ok(n) = reader.read_until(b'\n', &mut buf) {
            if n == 0 {
                break;
            }
            text.lock().unwrap().push_str(&String::from_utf8_lossy(&buf));
            buf.clear();
        }
    });
}

/// First line of the sandbox that belongs to the generated renderer; lines
/// from there on are plumbing and never pause.
fn hidden_from(sandbox_text: &str) -> usize {
    sandbox_text
        .lines()
        .position(|l| l.starts_with("def __compass_canon("))
        .map(|i| i + 1)
        .unwrap_or(usize::MAX >> 1)
}

/// Move `fd` to `target` in a freshly forked child, clearing close-on-exec.
fn install_fd(fd: i32, target: i32) -> io::Result<()> {
    // SAFETY: only async-signal-safe calls between fork and exec.
    unsafe {
        if fd == target {
            let flags = libc::fcntl(fd, libc::F_GETFD);
            if flags < 0 || libc::fcntl(fd, libc::F_SETFD, flags & !libc::FD_CLOEXEC) < 0 {
                return Err(io::Error::last_os_error());
            }
        } else if libc::dup2(fd, target) < 0 {
            return Err(io::Error::last_os_error());
        }
    }
    Ok(())
}

fn raise_fd(fd: OwnedFd) -> io::Result<OwnedFd> {
    // keep pipe ends clear of 3 and 4 so the dup2 order cannot clobber them
    let raised = fd.try_clone()?;
    // SAFETY: F_DUPFD_CLOEXEC returns a new descriptor we take ownership of.
    let n = unsafe { libc::fcntl(raised.as_raw_fd(), libc::F_DUPFD_CLOEXEC, 10) };
    if n < 0 {
        return Err(io::Error::last_os_error());
    }
    use std::os::fd::FromRawFd;
    // SAFETY: `n` is a fresh descriptor owned by nobody else.
    Ok(unsafe { OwnedFd::from_raw_fd(n) })
}

impl TraceSession {
    /// Launch the sandbox under the shim and wait for the first pause (or
    /// for an error/exit if the program never reaches `focus`).
    pub fn start(
        temp_path: &Path,
        focus: LineRange,
        opts: &TraceOptions,
    ) -> Result<(TraceSession, TraceEvent), TraceError> {
        let interpreter = resolve_named(&opts.interpreter)?;
        let sandbox_text = std::fs::read_to_string(temp_path)?;
        let abs = std::path::absolute(temp_path)?;
        let shim_path = abs.with_extension("shim.py");
        let cfg = ShimConfig {
            path: abs.to_string_lossy().into_owned(),
            focus: [focus.start, focus.end],
            hide_from: hidden_from(&sandbox_text),
            max_items: MAX_ITEMS,
            max_depth: MAX_DEPTH,
            magic: (opts.transport == Transport::Stderr).then(|| STDERR_MAGIC.to_owned()),
        };
        std::fs::write(&shim_path, shim_source())?;

        let cwd = abs.parent().unwrap_or(Path::new("."));
        let mut cmd = base_command(&interpreter, cwd);
        cmd.arg(&shim_path)
            .arg(serde_json::to_string(&cfg).expect("config serializes"))
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());

        let (tx, rx) = mpsc::channel();
        let stdout = Arc::new(Mutex::new(String::new()));
        let stderr = Arc::new(Mutex::new(String::new()));

        let spawned = match opts.transport {
            Transport::Fd => {
                let (ev_r, ev_w) = io::pipe()?;
                let (cmd_r, cmd_w) = io::pipe()?;
                let ev_w = raise_fd(OwnedFd::from(ev_w))?;
                let cmd_r = raise_fd(OwnedFd::from(cmd_r))?;
                let (ev_fd, cmd_fd) = (ev_w.as_raw_fd(), cmd_r.as_raw_fd());
                cmd.stdin(Stdio::null());
                // SAFETY: the closure only calls dup2/fcntl.
                unsafe {
                    cmd.pre_exec(move || {
                        install_fd(ev_fd, 3)?;
                        install_fd(cmd_fd, 4)
                    });
                }
                let child = cmd.spawn();
                drop(ev_w);
                drop(cmd_r);
                child.map(|c| (c, Some(ev_r), CommandSink::Pipe(cmd_w)))
            }
            Transport::Stderr => {
                cmd.stdin(Stdio::piped());
                cmd.spawn().map(|mut c| {
                    let sink = CommandSink::Stdin(c.stdin.take().expect("piped stdin"));
                    (c, None, sink)
                })
            }
        };
        let (mut child, events, sink) = match spawned {
            Ok(v) => v,
            Err(e) => {
                let _ = std::fs::remove_file(&shim_path);
                return Err(e.into());
            }
        };
        spawn_drain(child.stdout.take().expect("piped stdout"), stdout.clone());
        let child_err = child.stderr.take().expect("piped stderr");
        match events {
            Some(ev_r) => {
                spawn_lines(ev_r, tx, stderr.clone(), None);
                spawn_drain(child_err, stderr.clone());
            }
            None => spawn_lines(child_err, tx, stderr.clone(), Some(STDERR_MAGIC)),
        }

        let mut session = TraceSession {
            child: Some(child),
            commands: Some(sink),
            rx,
            timeout: opts.step_timeout,
            paused: false,
            finished: false,
            current: None,
            log: Vec::new(),
            stdout,
            stderr,
            shim_path,
        };
        session.handshake()?;
        let first = session.next_significant()?;
        Ok((session, first))
    }

    fn handshake(&mut self) -> Result<(), TraceError> {
        let failure = |s: &mut Self, why: String| {
            s.kill();
            let stderr = s.stderr_text();
            let detail = stderr.lines().last().unwrap_or("").to_owned();
            Err(TraceError::ShimHandshakeFailure(if detail.is_empty() {
                why
            } else {
                format!("{why}: {detail}")
            }))
        };
        match self.rx.recv_timeout(self.timeout) {
            Ok(Incoming::Msg(WireMessage::Ready { v })) if v == wire::WIRE_VERSION => Ok(()),
            Ok(Incoming::Msg(WireMessage::Ready { v })) => {
                failure(self, format!("unsupported wire version {v}"))
            }
            Ok(Incoming::Msg(other)) => failure(self, format!("expected ready, got {other:?}")),
            Ok(Incoming::Junk(line)) => failure(self, format!("unexpected output {line:?}")),
            Ok(Incoming::Closed) | Err(RecvTimeoutError::Disconnected) => {
                // let stderr drain before reporting
                if let Some(c) = self.child.as_mut() {
                    let _ = c.wait();
                }
                thread::sleep(Duration::from_millis(20));
                failure(self, "child exited before handshake".into())
            }
            Err(RecvTimeoutError::Timeout) => {
                failure(self, format!("no ready message within {:?}", self.timeout))
            }
        }
    }

    /// Wait for the next line, result, error or exit event.
    fn next_significant(&mut self) -> Result<TraceEvent, TraceError> {
        if self.finished {
            return Err(TraceError::Finished);
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let incoming = match self.rx.recv_timeout(remaining) {
                Ok(m) => m,
                Err(RecvTimeoutError::Timeout) => {
                    self.kill();
                    self.finish(TraceEvent::exit(None, Some("timeout")));
                    return Err(TraceError::StepTimeout(self.timeout));
                }
                Err(RecvTimeoutError::Disconnected) => Incoming::Closed,
            };
            let event = match incoming {
                Incoming::Msg(WireMessage::Ready { .. }) => {
                    return Err(self.desync("second ready message".into()));
                }
                Incoming::Msg(msg) => TraceEvent::from_wire(msg),
                Incoming::Junk(line) => return Err(self.desync(format!("unparseable message {line:?}"))),
                Incoming::Closed => {
                    let code = self.reap(Duration::from_secs(1));
                    let ev = TraceEvent::exit(code, Some("event stream closed"));
                    self.finish(ev.clone());
                    return Ok(ev);
                }
            };
            match event.kind {
                EventKind::Call | EventKind::Return => self.log.push(event),
                EventKind::Line => {
                    self.paused = true;
                    self.current = Some(event.clone());
                    self.log.push(event.clone());
                    return Ok(event);
                }
                EventKind::Result | EventKind::Error => {
                    self.log.push(event.clone());
                    return Ok(event);
                }
                EventKind::Exit => {
                    let code = self.reap(Duration::from_secs(2));
                    let ev = TraceEvent {
                        code: event.code.or(code),
                        ..event
                    };
                    self.finish(ev.clone());
                    return Ok(ev);
                }
            }
        }
    }

    fn desync(&mut self, why: String) -> TraceError {
        self.kill();
        self.finish(TraceEvent::exit(None, Some("protocol desync")));
        TraceError::ProtocolDesync(why)
    }

    fn finish(&mut self, exit: TraceEvent) {
        self.paused = false;
        self.finished = true;
        self.commands = None;
        self.log.push(exit);
    }

    /// Wait briefly for a clean exit, then force it.
    fn reap(&mut self, grace: Duration) -> Option<i32> {
        let mut child = self.child.take()?;
        let deadline = Instant::now() + grace;
        loop {
            match child.try_wait() {
                Ok(Some(status)) => return status.code(),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(2)),
                _ => {
                    kill_group(&mut child);
                    return None;
                }
            }
        }
    }

    fn kill(&mut self) {
        self.commands = None;
        if let Some(mut child) = self.child.take() {
            kill_group(&mut child);
        }
    }

    /// Send a step command while paused and return the next significant
    /// event. When not paused (after a result or error) the command is not
    /// sent and the next pending event is returned instead.
    pub fn step(&mut self, cmd: StepCommand) -> Result<TraceEvent, TraceError> {
        if self.finished {
            return Err(TraceError::Finished);
        }
        if self.paused {
            self.paused = false;
            self.current = None;
            let sent = self.commands.as_mut().map(|c| c.send(&cmd)).unwrap_or(Ok(()));
            if sent.is_err() {
                // child is gone; the reader reports the closed stream
                log::debug!("command {} not delivered", cmd.name());
            }
        }
        let ev = self.next_significant();
        if cmd == StepCommand::Quit && !self.finished {
            if let Ok(ev) = &ev {
                if ev.kind != EventKind::Exit {
                    return self.terminate();
                }
            }
        }
        ev
    }

    /// Drain to the end of the session, killing the child if it pauses.
    pub fn terminate(&mut self) -> Result<TraceEvent, TraceError> {
        if self.finished {
            return Ok(self.exit_event().cloned().unwrap_or(TraceEvent::exit(None, None)));
        }
        if self.paused {
            return self.step(StepCommand::Quit);
        }
        self.kill();
        let ev = TraceEvent::exit(None, Some("terminated"));
        self.finish(ev.clone());
        Ok(ev)
    }

    /// Locals of the innermost frame at the current pause.
    pub fn locals_at(&self) -> Result<&BTreeMap<String, String>, TraceError> {
        match &self.current {
            Some(ev) if self.paused => Ok(&ev.locals),
            _ => Err(TraceError::NotPaused),
        }
    }

    pub fn current(&self) -> Option<&TraceEvent> {
        self.current.as_ref()
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Every event delivered so far, including call/return.
    pub fn events(&self) -> &[TraceEvent] {
        &self.log
    }

    pub fn exit_event(&self) -> Option<&TraceEvent> {
        self.log.iter().rev().find(|e| e.kind == EventKind::Exit)
    }

    pub fn pid(&self) -> Option<u32> {
        self.child.as_ref().map(|c| c.id())
    }

    pub fn stdout_text(&self) -> String {
        self.stdout.lock().unwrap().clone()
    }

    pub fn stderr_text(&self) -> String {
        self.stderr.lock().unwrap().clone()
    }

    /// Kill the child abruptly without a protocol exchange; the next read
    /// observes the closed stream. Used for crash injection.
    pub fn kill_child(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let pid = child.id() as libc::pid_t;
            // SAFETY: signalling our own child's process group.
            unsafe {
                libc::kill(-pid, libc::SIGKILL);
            }
        }
    }
}

impl Drop for TraceSession {
    fn drop(&mut self) {
        self.kill();
        if !self.finished {
            self.finish(TraceEvent::exit(None, Some("dropped")));
        }
        let _ = std::fs::remove_file(&self.shim_path);
    }
}

/// Start a trace (free-function form of [`TraceSession::start`]).
pub fn start_trace(
    temp_path: &Path,
    focus: LineRange,
    opts: &TraceOptions,
) -> Result<(TraceSession, TraceEvent), TraceError> {
    TraceSession::start(temp_path, focus, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renderer_start_is_hidden() {
        let text = "import os\n\ndef f():\n    return 1\n\ndef __compass_canon(v, limit=None, depth=0):\n";
        assert_eq!(hidden_from(text), 6);
        assert!(hidden_from("x = 1\n") > 1_000_000);
    }

    #[test]
    fn exit_event_shape() {
        let ev = TraceEvent::exit(None, Some("timeout"));
        assert_eq!(
            serde_json::to_string(&ev).unwrap(),
            r#"{"kind":"exit","payload":"timeout"}"#
        );
    }
}
