mod common;

use std::time::{Duration, Instant};

use code_compass::sandbox::SandboxDir;
use code_compass::source_scan::LineRange;
use code_compass::trace::{EventKind, StepCommand, TraceError, TraceOptions, TraceSession, Transport};
use common::trace::{fixtures, group_gone, run_fixture, sandbox_for};

macro_rules! python_or_skip {
    () => {
        match common::python() {
            Some(p) => p,
            None => {
                eprintln!("no interpreter; skipping");
                return;
            }
        }
    };
}

#[test]
fn hand_traced_line_sequences() {
    let py = python_or_skip!();
    let all = fixtures();
    assert_eq!(all.len(), 5);
    for (name, fx) in &all {
        let got = run_fixture(&py, fx, Transport::Fd);
        assert_eq!(got.lines, fx.lines, "{name}");
        assert_eq!(got.result.as_deref(), Some(fx.result.as_str()), "{name}");
        assert_eq!(got.exits, 1, "{name}");
        assert_eq!(got.events.last().unwrap().kind, EventKind::Exit);
        assert_eq!(got.events.last().unwrap().code, Some(0));
    }
}

#[test]
fn stderr_transport_gives_the_same_sequences() {
    let py = python_or_skip!();
    for (name, fx) in &fixtures() {
        let got = run_fixture(&py, fx, Transport::Stderr);
        assert_eq!(got.lines, fx.lines, "{name}");
        assert_eq!(got.result.as_deref(), Some(fx.result.as_str()), "{name}");
        assert_eq!(got.exits, 1, "{name}");
    }
}

#[test]
fn call_and_return_events_surround_helper() {
    let py = python_or_skip!();
    let fx = &fixtures()["step_over"];
    let got = run_fixture(&py, fx, Transport::Fd);
    let helper: Vec<_> = got
        .events
        .iter()
        .filter(|e| e.func.as_deref() == Some("helper") && e.kind != EventKind::Line)
        .map(|e| (e.kind, e.payload.clone()))
        .collect();
    assert_eq!(
        helper,
        [(EventKind::Call, None), (EventKind::Return, Some("51".into()))]
    );
}

fn start(
    py: &std::path::Path,
    dir: &SandboxDir,
    file: &str,
    function: &str,
    inputs: &[&str],
    timeout: Duration,
) -> (
    TraceSession,
    code_compass::trace::TraceEvent,
    code_compass::sandbox::SandboxDoc,
) {
    let inputs: Vec<String> = inputs.iter().map(|s| s.to_string()).collect();
    let sb = sandbox_for(dir, file, function, &inputs);
    let mut opts = TraceOptions::new(py);
    opts.step_timeout = timeout;
    let (s, first) = TraceSession::start(sb.temp_path.as_ref().unwrap(), sb.body_lines(), &opts).unwrap();
    (s, first, sb)
}

#[test]
fn locals_snapshots() {
    let py = python_or_skip!();
    let tmp = tempfile::tempdir().unwrap();
    let dir = SandboxDir::create_in(tmp.path(), "l").unwrap();
    let (mut s, first, sb) = start(&py, &dir, "locals.py", "snapshot", &[], Duration::from_secs(10));
    assert_eq!(sb.original_line(first.line.unwrap()), Some(5));
    assert!(s.locals_at().unwrap().is_empty());
    s.step(StepCommand::CONTINUE).unwrap();
    assert_eq!(s.locals_at().unwrap()["x"], "2");
    for _ in 0..4 {
        s.step(StepCommand::CONTINUE).unwrap();
    }
    let locals = s.locals_at().unwrap().clone();
    assert_eq!(locals["xs"], "[1, 2]");
    let big: Vec<String> = (0..32).map(|i| i.to_string()).collect();
    assert_eq!(locals["big"], format!("[{}, \"...\"]", big.join(", ")));
    assert_eq!(locals["deep"], "[[[\"<list>\"]]]");
    assert_eq!(locals["fh"], "\"<StringIO>\"");
    // program output containing the marker mid-line is not a result
    let ev = s.step(StepCommand::CONTINUE).unwrap();
    assert_eq!(sb.original_line(ev.line.unwrap()), Some(11));
    let ev = s.step(StepCommand::CONTINUE).unwrap();
    assert_eq!((ev.kind, ev.payload.as_deref()), (EventKind::Result, Some("2")));
    assert!(s.locals_at().is_err());
    let ev = s.step(StepCommand::CONTINUE).unwrap();
    assert_eq!(ev.kind, EventKind::Exit);
    assert!(s.stdout_text().contains("noise ##RESULT## fake?"));
    assert!(matches!(s.step(StepCommand::CONTINUE), Err(TraceError::Finished)));
}

#[test]
fn import_error_reports_error_then_exit() {
    let py = python_or_skip!();
    let tmp = tempfile::tempdir().unwrap();
    let dir = SandboxDir::create_in(tmp.path(), "e").unwrap();
    let (mut s, first, _) = start(
        &py,
        &dir,
        "oddities.py",
        "uses_missing",
        &["1"],
        Duration::from_secs(10),
    );
    assert_eq!(first.kind, EventKind::Error);
    assert!(first.payload.unwrap().starts_with("ModuleNotFoundError"));
    let exit = s.step(StepCommand::CONTINUE).unwrap();
    assert_eq!(exit.kind, EventKind::Exit);
    assert_ne!(exit.code, Some(0));
    assert!(s.stderr_text().contains("nonexistent_module_for_trace"));
}

#[test]
fn missing_interpreter_fails_before_spawning() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = SandboxDir::create_in(tmp.path(), "m").unwrap();
    let sb = sandbox_for(&dir, "straight.py", "straight", &["1".into(), "2".into()]);
    let opts = TraceOptions::new("/nonexistent/python-xyz");
    let err = TraceSession::start(sb.temp_path.as_ref().unwrap(), sb.body_lines(), &opts).unwrap_err();
    assert!(matches!(err, TraceError::InterpreterNotFound(_)));
    // no shim written
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
}

#[test]
fn non_python_interpreter_fails_handshake() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = SandboxDir::create_in(tmp.path(), "h").unwrap();
    let sb = sandbox_for(&dir, "straight.py", "straight", &["1".into(), "2".into()]);
    let mut opts = TraceOptions::new("true");
    opts.step_timeout = Duration::from_secs(2);
    let err = TraceSession::start(sb.temp_path.as_ref().unwrap(), sb.body_lines(), &opts).unwrap_err();
    assert!(matches!(err, TraceError::ShimHandshakeFailure(_)), "{err}");
}

#[test]
fn runaway_loop_times_out_and_is_killed() {
    let py = python_or_skip!();
    let tmp = tempfile::tempdir().unwrap();
    let dir = SandboxDir::create_in(tmp.path(), "t").unwrap();
    let (mut s, first, sb) = start(&py, &dir, "spin.py", "spin", &["1"], Duration::from_millis(600));
    assert_eq!(sb.original_line(first.line.unwrap()), Some(2));
    let pid = s.pid().unwrap();
    let spin_line = sb.sandbox_line(5).unwrap();
    let began = Instant::now();
    let err = s
        .step(StepCommand::Continue {
            line: Some(spin_line),
        })
        .unwrap_err();
    assert!(matches!(err, TraceError::StepTimeout(_)));
    assert!(began.elapsed() < Duration::from_secs(5));
    assert!(s.is_finished());
    let exits: Vec<_> = s.events().iter().filter(|e| e.kind == EventKind::Exit).collect();
    assert_eq!(exits.len(), 1);
    assert_eq!(exits[0].payload.as_deref(), Some("timeout"));
    assert!(group_gone(pid));
}

#[test]
fn killed_child_yields_single_exit_and_no_orphan() {
    let py = python_or_skip!();
    let tmp = tempfile::tempdir().unwrap();
    let dir = SandboxDir::create_in(tmp.path(), "k").unwrap();
    let mut pids = Vec::new();
    for round in 0..5 {
        let (mut s, _, _) = start(
            &py,
            &dir,
            "loop.py",
            "total",
            &["[1, 2, 3]"],
            Duration::from_secs(10),
        );
        let pid = s.pid().unwrap();
        pids.push(pid);
        for _ in 0..round {
            s.step(StepCommand::CONTINUE).unwrap();
        }
        s.kill_child();
        let ev = s.step(StepCommand::CONTINUE).unwrap();
        assert_eq!(ev.kind, EventKind::Exit);
        let exits = s.events().iter().filter(|e| e.kind == EventKind::Exit).count();
        assert_eq!(exits, 1);
        drop(s);
    }
    // dropping a paused session also kills it
    let (s, _, _) = start(&py, &dir, "spin.py", "spin", &["1"], Duration::from_secs(10));
    pids.push(s.pid().unwrap());
    drop(s);
    for pid in pids {
        assert!(group_gone(pid), "pid {pid} survived");
    }
}

#[test]
fn quit_ends_session_promptly() {
    let py = python_or_skip!();
    let tmp = tempfile::tempdir().unwrap();
    let dir = SandboxDir::create_in(tmp.path(), "q").unwrap();
    let (mut s, _, _) = start(&py, &dir, "loop.py", "total", &["[1]"], Duration::from_secs(10));
    let pid = s.pid().unwrap();
    let ev = s.step(StepCommand::Quit).unwrap();
    assert_eq!(ev.kind, EventKind::Exit);
    assert!(s.is_finished());
    assert!(group_gone(pid));
    drop(s);
    // the shim file is removed with the session
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".shim.py"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn focus_outside_executed_lines_runs_to_completion() {
    let py = python_or_skip!();
    let tmp = tempfile::tempdir().unwrap();
    let dir = SandboxDir::create_in(tmp.path(), "f").unwrap();
    let sb = sandbox_for(&dir, "branch.py", "classify", &["5".into()]);
    let opts = TraceOptions::new(&py);
    let never = LineRange::single(sb.sandbox_line(3).unwrap());
    let (mut s, first) = TraceSession::start(sb.temp_path.as_ref().unwrap(), never, &opts).unwrap();
    assert_eq!(
        (first.kind, first.payload.as_deref()),
        (EventKind::Result, Some("\"pos\""))
    );
    assert_eq!(s.step(StepCommand::CONTINUE).unwrap().kind, EventKind::Exit);
}
