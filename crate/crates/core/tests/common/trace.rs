//! Shared driver for the hand-traced fixtures.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use code_compass::sandbox::{gen_sandbox, SandboxDir, SandboxDoc};
use code_compass::source_scan::{get_imports, scan_functions, SourceDoc};
use code_compass::trace::{EventKind, StepCommand, TraceEvent, TraceOptions, TraceSession, Transport};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct TraceFixture {
    pub file: String,
    pub function: String,
    pub inputs: Vec<String>,
    pub steps: Vec<String>,
    pub lines: Vec<usize>,
    pub result: String,
}

pub fn fixtures() -> BTreeMap<String, TraceFixture> {
    let text = std::fs::read_to_string(super::corpus("trace/expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn command(name: &str) -> StepCommand {
    match name {
        "step_into" => StepCommand::StepInto,
        "step_over" => StepCommand::StepOver,
        "continue" => StepCommand::CONTINUE,
        "quit" => StepCommand::Quit,
        other => panic!("unknown step {other}"),
    }
}

pub fn sandbox_for(dir: &SandboxDir, file: &str, function: &str, inputs: &[String]) -> SandboxDoc {
    let doc = SourceDoc::read(&super::corpus("trace").join(file)).unwrap();
    let span = scan_functions(&doc)
        .into_iter()
        .find(|s| s.qualname == function)
        .unwrap();
    let mut sb = gen_sandbox(&doc, &span, &get_imports(&doc), inputs).unwrap();
    dir.materialize(&mut sb).unwrap();
    sb
}

pub struct Observed {
    /// Original-file lines of the pause events.
    pub lines: Vec<usize>,
    pub result: Option<String>,
    pub exits: usize,
    pub events: Vec<TraceEvent>,
}

pub fn run_fixture(py: &Path, fx: &TraceFixture, transport: Transport) -> Observed {
    let tmp = tempfile::tempdir().unwrap();
    let dir = SandboxDir::create_in(tmp.path(), "trace").unwrap();
    let sb = sandbox_for(&dir, &fx.file, &fx.function, &fx.inputs);
    let mut opts = TraceOptions::new(py);
    opts.transport = transport;
    opts.step_timeout = Duration::from_secs(10);
    let body = sb.body_lines();
    let (mut session, first) = TraceSession::start(sb.temp_path.as_ref().unwrap(), body, &opts).unwrap();
    let mut pauses = vec![first];
    for step in &fx.steps {
        if !session.is_paused() {
            break;
        }
        pauses.push(session.step(command(step)).unwrap());
    }
    while !session.is_finished() {
        pauses.push(session.step(StepCommand::CONTINUE).unwrap());
    }
    let lines = pauses
        .iter()
        .filter(|e| e.kind == EventKind::Line)
        .map(|e| sb.original_line(e.line.unwrap()).unwrap_or(0))
        .collect();
    let result = pauses
        .iter()
        .find(|e| e.kind == EventKind::Result)
        .and_then(|e| e.payload.clone());
    let events = session.events().to_vec();
    let exits = events.iter().filter(|e| e.kind == EventKind::Exit).count();
    Observed {
        lines,
        result,
        exits,
        events,
    }
}

/// True when no process in the group led by `pid` is alive.
pub fn group_gone(pid: u32) -> bool {
    // SAFETY: signal 0 only probes for existence.
    unsafe { libc::kill(-(pid as libc::pid_t), 0) != 0 }
}
