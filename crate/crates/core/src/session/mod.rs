//! The walkthrough state machine.
//!
//! A [`Session`] owns at most one active walkthrough. Commands either
//! succeed (possibly queueing [`Notification`]s) or return a [`Rejection`].

mod types;
mod validate;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;

use crate::config::{FunctionGuide, ResolvedGuide, TaskSpec, WalkthroughConfig};
use crate::sandbox::{gen_sandbox, SandboxDir, SandboxDoc, SandboxError};
use crate::source_scan::{function_at, get_imports, scan_functions, FunctionSpan, LineRange, SourceDoc};
use crate::trace::{EventKind, StepCommand, TraceError, TraceEvent, TraceOptions, TraceSession};

pub use types::{
    CaseResult, Mode, Notification, Offer, Rejection, StateView, TaskEntry, TaskView, ValidationResult,
};
pub use validate::validate_candidate;

static CALL_SITE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([^\W\d]\w*)\s*\(").unwrap());

#[derive(Debug, Clone)]
pub struct SessionOptions {
    pub workspace: PathBuf,
    pub trace: TraceOptions,
    /// Parent of the per-session temp directory; the system temp dir if unset.
    pub temp_base: Option<PathBuf>,
}

impl SessionOptions {
    pub fn new(workspace: impl Into<PathBuf>, interpreter: impl Into<PathBuf>) -> Self {
        Self {
            workspace: workspace.into(),
            trace: TraceOptions::new(interpreter),
            temp_base: None,
        }
    }

    pub fn step_timeout(&self) -> Duration {
        self.trace.step_timeout
    }
}

/// One guide on the stack.
struct Frame {
    guide: ResolvedGuide,
    doc: SourceDoc,
    sandbox: Option<SandboxDoc>,
    trace: Option<TraceSession>,
    /// Index into `guide.notes` of the focused note, if focus is on a note.
    note: Option<usize>,
    focused_line: usize,
    offered: bool,
    locals: BTreeMap<String, String>,
}

struct ActiveTask {
    function: String,
    index: usize,
    working_text: String,
    edited: bool,
}

pub struct Session {
    cfg: WalkthroughConfig,
    opts: SessionOptions,
    mode: Mode,
    stack: Vec<Frame>,
    task: Option<ActiveTask>,
    revert_set: BTreeMap<PathBuf, Vec<u8>>,
    temp: Option<SandboxDir>,
    session_id: String,
    outbox: Vec<Notification>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("mode", &self.mode)
            .field("depth", &self.stack.len())
            .finish()
    }
}

type Outcome<T> = Result<T, Rejection>;

fn io_rejection(e: impl std::fmt::Display) -> Rejection {
    Rejection::Io {
        message: e.to_string(),
    }
}

impl Session {
    pub fn new(cfg: WalkthroughConfig, opts: SessionOptions) -> Self {
        Self {
            cfg,
            opts,
            mode: Mode::Idle,
            stack: Vec::new(),
            task: None,
            revert_set: BTreeMap::new(),
            temp: None,
            session_id: uuid::Uuid::new_v4().to_string(),
            outbox: Vec::new(),
        }
    }

    pub fn config(&self) -> &WalkthroughConfig {
        &self.cfg
    }

    pub fn options(&self) -> &SessionOptions {
        &self.opts
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn focused_line(&self) -> Option<usize> {
        self.stack.last().map(|f| f.focused_line)
    }

    /// Per-session temp directory, while a walkthrough is active.
    pub fn temp_dir(&self) -> Option<&Path> {
        self.temp.as_ref().map(|t| t.path())
    }

    /// Files snapshotted for restoration on exit.
    pub fn revert_files(&self) -> impl Iterator<Item = &Path> {
        self.revert_set.keys().map(PathBuf::as_path)
    }

    /// Take the notifications queued since the last call.
    pub fn drain_notifications(&mut self) -> Vec<Notification> {
        std::mem::take(&mut self.outbox)
    }

    pub fn state(&self) -> StateView {
        let top = self.stack.last();
        StateView {
            mode: self.mode,
            depth: self.stack.len(),
            function: top.map(|f| f.guide.function.clone()),
            file: top.map(|f| f.guide.file.clone()),
            focused_line: top.map(|f| f.focused_line),
            note: top.and_then(|f| f.note.map(|i| f.guide.notes[i].text.clone())),
            live: top.is_some_and(|f| f.trace.is_some()),
            dim_ranges: top.map(|f| dim_ranges(&f.doc, &f.guide.span)).unwrap_or_default(),
            task: self.task.as_ref().map(|t| TaskView {
                function: t.function.clone(),
                index: t.index,
                working_text: t.working_text.clone(),
                edited: t.edited,
            }),
            offered: top.is_some_and(|f| f.offered),
        }
    }

    fn invalid(&self, command: &str) -> Rejection {
        if self.mode == Mode::Idle {
            Rejection::NoActiveSession
        } else {
            Rejection::InvalidInMode {
                command: command.to_owned(),
                mode: self.mode,
            }
        }
    }

    fn find_guide(&self, function: &str) -> Outcome<FunctionGuide> {
        if let Some(g) = self.cfg.guide(function) {
            return Ok(g.clone());
        }
        let mut named = self.cfg.guides_named(function);
        match (named.next(), named.next()) {
            (Some(g), None) => Ok(g.clone()),
            _ => Err(Rejection::NoGuide {
                function: function.to_owned(),
            }),
        }
    }

    fn read_doc(&self, rel: &Path) -> Outcome<SourceDoc> {
        SourceDoc::read(&self.opts.workspace.join(rel)).map_err(io_rejection)
    }

    /// Guided function containing `line` of `file`, if any.
    pub fn offer(&self, file: &Path, line: usize) -> Outcome<Option<Offer>> {
        let rel = file.strip_prefix(&self.opts.workspace).unwrap_or(file);
        let doc = self.read_doc(rel)?;
        let spans = scan_functions(&doc);
        let Some(span) = function_at(&spans, line) else {
            return Ok(None);
        };
        Ok(self
            .cfg
            .guide(&span.qualname)
            .filter(|g| g.file == rel)
            .map(|g| Offer {
                function: g.function.clone(),
                file: g.file.clone(),
                header_line: span.header_line,
                summary: g.summary.clone(),
                doc_link: g.doc_link.clone(),
                tasks: g.tasks.len(),
            }))
    }

    /// Every guided function with a discovered span, in config order.
    pub fn offers(&self) -> Vec<Offer> {
        let mut out = Vec::new();
        for g in self.cfg.guides.values() {
            let Ok(doc) = self.read_doc(&g.file) else { continue };
            if let Some(span) = scan_functions(&doc)
                .into_iter()
                .find(|s| s.qualname == g.function)
            {
                out.push(Offer {
                    function: g.function.clone(),
                    file: g.file.clone(),
                    header_line: span.header_line,
                    summary: g.summary.clone(),
                    doc_link: g.doc_link.clone(),
                    tasks: g.tasks.len(),
                });
            }
        }
        out
    }

    fn snapshot(&mut self, rel: &Path) -> Outcome<()> {
        if !self.revert_set.contains_key(rel) {
            let bytes = std::fs::read(self.opts.workspace.join(rel)).map_err(io_rejection)?;
            self.revert_set.insert(rel.to_owned(), bytes);
        }
        Ok(())
    }

    fn temp(&mut self) -> Outcome<&SandboxDir> {
        if self.temp.is_none() {
            let dir = match &self.opts.temp_base {
                Some(base) => SandboxDir::create_in(base, &self.session_id),
                None => SandboxDir::create(&self.session_id),
            }
            .map_err(io_rejection)?;
            if dir.path().starts_with(&self.opts.workspace) {
                log::warn!(
                    "temp directory {} lies inside the workspace",
                    dir.path().display()
                );
            }
            self.temp = Some(dir);
        }
        Ok(self.temp.as_ref().expect("just created"))
    }

    /// Build, materialize and (when possible) trace a frame for `guide`,
    /// leaving focus on its first note.
    fn open_frame(&mut self, guide: &FunctionGuide) -> Outcome<Frame> {
        let doc = self.read_doc(&guide.file)?;
        let span = scan_functions(&doc)
            .into_iter()
            .find(|s| s.qualname == guide.function)
            .ok_or_else(|| Rejection::FunctionNotFound {
                function: guide.function.clone(),
                file: guide.file.clone(),
            })?;
        let resolved = guide.resolve(&span).map_err(|e| Rejection::ResolveFailed {
            message: e.to_string(),
        })?;
        let inputs = guide
            .tasks
            .first()
            .and_then(|t| t.inputs.first())
            .cloned()
            .unwrap_or_default();

        let mut notices = Vec::new();
        let sandbox = match gen_sandbox(&doc, &span, &get_imports(&doc), &inputs) {
            Ok(sb) => Some(sb),
            Err(e @ SandboxError::ArityMismatch { .. }) => {
                notices.push(format!("{e}; walking through without execution"));
                None
            }
            Err(e) => {
                notices.push(format!("{e}; walking through without execution"));
                None
            }
        };
        let first_target = resolved
            .notes
            .first()
            .map(|n| n.line)
            .unwrap_or(span.body_range.start);
        let mut frame = Frame {
            guide: resolved,
            doc,
            sandbox,
            trace: None,
            note: None,
            focused_line: first_target,
            offered: false,
            locals: BTreeMap::new(),
        };
        if let Some(sb) = frame.sandbox.as_mut() {
            for w in &sb.warnings {
                let crate::sandbox::SandboxWarning::UnsupportedFreeVariable { name, line } = w;
                notices.push(format!("`{name}` (line {line}) is not defined in the sandbox"));
            }
            let temp = self.temp()?;
            let path = temp.materialize(sb).map_err(io_rejection)?;
            let focus = sb.body_lines();
            match TraceSession::start(&path, focus, &self.opts.trace) {
                Ok((trace, first)) => {
                    frame.trace = Some(trace);
                    if first.kind == EventKind::Error {
                        let message = first.payload.unwrap_or_default();
                        self.close_frame(frame);
                        return Err(Rejection::StartFailed { message });
                    }
                    self.settle(&mut frame, first, first_target)?;
                }
                Err(TraceError::InterpreterNotFound(e)) => {
                    self.close_frame(frame);
                    return Err(Rejection::StartFailed {
                        message: e.to_string(),
                    });
                }
                Err(e) => {
                    notices.push(format!(
                        "trace unavailable ({e}); walking through without execution"
                    ));
                }
            }
        }
        frame.note = frame
            .guide
            .notes
            .iter()
            .position(|n| n.line == frame.focused_line);
        self.outbox.extend(
            notices
                .into_iter()
                .map(|message| Notification::Notice { message }),
        );
        Ok(frame)
    }

    /// Drive the frame's trace from `event` until it pauses on `target`.
    /// Falls back to static focus when the program ends first.
    fn settle(&mut self, frame: &mut Frame, mut event: TraceEvent, target: usize) -> Outcome<()> {
        let target_sb = frame.sandbox.as_ref().and_then(|sb| sb.sandbox_line(target));
        loop {
            match event.kind {
                EventKind::Line if event.line == target_sb => {
                    frame.locals = event.locals;
                    frame.focused_line = target;
                    return Ok(());
                }
                EventKind::Line => {}
                EventKind::Exit => {
                    frame.trace = None;
                    break;
                }
                EventKind::Result | EventKind::Error | EventKind::Call | EventKind::Return => {}
            }
            let Some(trace) = frame.trace.as_mut() else { break };
            let cmd = if trace.is_paused() {
                StepCommand::Continue { line: target_sb }
            } else {
                StepCommand::CONTINUE
            };
            event = match trace.step(cmd) {
                Ok(ev) => ev,
                Err(TraceError::StepTimeout(_)) => {
                    frame.trace = None;
                    return Err(Rejection::StepTimeout);
                }
                Err(e) => {
                    log::warn!("trace abandoned: {e}");
                    self.outbox.push(Notification::Notice {
                        message: format!("trace ended ({e}); continuing without execution"),
                    });
                    frame.trace = None;
                    break;
                }
            };
        }
        frame.locals.clear();
        frame.focused_line = target;
        Ok(())
    }

    fn close_frame(&mut self, mut frame: Frame) {
        if let Some(mut t) = frame.trace.take() {
            let _ = t.terminate();
        }
        if let (Some(sb), Some(temp)) = (frame.sandbox.as_mut(), self.temp.as_ref()) {
            if let Err(e) = temp.dispose(sb) {
                log::warn!("dispose failed: {e}");
            }
        }
    }

    fn push_focus(&mut self, summary: bool) {
        let depth = self.stack.len();
        let Some(f) = self.stack.last() else { return };
        self.outbox.push(Notification::Focus {
            function: f.guide.function.clone(),
            file: f.guide.file.clone(),
            line: f.focused_line,
            depth,
            summary: summary.then(|| f.guide.summary.clone()),
            note: f.note.map(|i| f.guide.notes[i].text.clone()),
            live: f.trace.is_some(),
            locals: f.locals.clone(),
        });
    }

    fn push_dim(&mut self) {
        let Some(f) = self.stack.last() else { return };
        self.outbox.push(Notification::Dim {
            file: f.guide.file.clone(),
            ranges: dim_ranges(&f.doc, &f.guide.span),
        });
    }

    fn push_offer(&mut self) {
        let Some(f) = self.stack.last() else { return };
        let tasks = self
            .cfg
            .guide(&f.guide.function)
            .map(|g| {
                g.tasks
                    .iter()
                    .enumerate()
                    .map(|(index, t)| TaskEntry {
                        index,
                        kind: t.kind,
                        prompt: t.prompt.clone(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        self.outbox.push(Notification::TaskOffer {
            function: f.guide.function.clone(),
            tasks,
        });
    }

    pub fn start(&mut self, function: &str) -> Outcome<StateView> {
        if self.mode != Mode::Idle {
            return Err(Rejection::SessionBusy);
        }
        let guide = self.find_guide(function)?;
        let opened = self.snapshot(&guide.file).and_then(|_| self.open_frame(&guide));
        match opened {
            Ok(frame) => self.stack.push(frame),
            Err(e) => {
                self.teardown();
                return Err(e);
            }
        }
        self.mode = Mode::Walkthrough;
        self.push_dim();
        self.push_focus(true);
        Ok(self.state())
    }

    /// Move focus to the next annotated line, or offer tasks past the last.
    pub fn advance(&mut self) -> Outcome<StateView> {
        if self.mode != Mode::Walkthrough {
            return Err(self.invalid("advance"));
        }
        let mut frame = self.stack.pop().expect("walkthrough has a frame");
        let next = match frame.note {
            Some(i) => i + 1,
            None => frame
                .guide
                .notes
                .iter()
                .position(|n| n.line > frame.focused_line)
                .unwrap_or(frame.guide.notes.len()),
        };
        if next >= frame.guide.notes.len() {
            frame.offered = true;
            self.stack.push(frame);
            self.push_offer();
            return Ok(self.state());
        }
        let target = frame.guide.notes[next].line;
        let result = match frame.trace.as_mut() {
            Some(trace) if trace.is_paused() || !trace.is_finished() => {
                let target_sb = frame.sandbox.as_ref().and_then(|sb| sb.sandbox_line(target));
                let cmd = if trace.is_paused() {
                    StepCommand::Continue { line: target_sb }
                } else {
                    StepCommand::CONTINUE
                };
                match trace.step(cmd) {
                    Ok(ev) => self.settle(&mut frame, ev, target),
                    Err(TraceError::StepTimeout(_)) => Err(Rejection::StepTimeout),
                    Err(e) => {
                        self.outbox.push(Notification::Notice {
                            message: format!("trace ended ({e}); continuing without execution"),
                        });
                        frame.trace = None;
                        frame.locals.clear();
                        frame.focused_line = target;
                        Ok(())
                    }
                }
            }
            _ => {
                frame.trace = None;
                frame.locals.clear();
                frame.focused_line = target;
                Ok(())
            }
        };
        frame.note = Some(next);
        self.stack.push(frame);
        if let Err(Rejection::StepTimeout) = result {
            self.exit();
            return Err(Rejection::StepTimeout);
        }
        result?;
        self.push_focus(false);
        Ok(self.state())
    }

    /// Push the guide of a function called on the focused line.
    pub fn jump_into(&mut self) -> Outcome<StateView> {
        if self.mode != Mode::Walkthrough {
            return Err(self.invalid("jump_into"));
        }
        let top = self.stack.last().expect("walkthrough has a frame");
        let line = top.focused_line;
        let text = top.doc.line(line).unwrap_or("");
        let code = text.split('#').next().unwrap_or("");
        let caller = top.guide.function.clone();
        let caller_file = top.guide.file.clone();
        let mut callee = None;
        for caps in CALL_SITE.captures_iter(code) {
            let name = caps.get(1).expect("group").as_str();
            let m = caps.get(0).expect("match");
            if code[..m.start()].trim_end().ends_with("def") {
                continue;
            }
            let nested = format!("{caller}.{name}");
            let mut candidates: Vec<&FunctionGuide> = self.cfg.guides_named(name).collect();
            candidates.sort_by_key(|g| {
                (
                    g.function != nested,
                    g.file != caller_file,
                    g.function.matches('.').count(),
                )
            });
            if let Some(g) = candidates.into_iter().find(|g| g.function != caller) {
                callee = Some(g.clone());
                break;
            }
        }
        let Some(guide) = callee else {
            return Err(Rejection::NoGuideForCallee { line });
        };
        let fresh_snapshot = !self.revert_set.contains_key(&guide.file);
        self.snapshot(&guide.file)?;
        match self.open_frame(&guide) {
            Ok(frame) => self.stack.push(frame),
            Err(e) => {
                if fresh_snapshot {
                    self.revert_set.remove(&guide.file);
                }
                return Err(e);
            }
        }
        self.push_dim();
        self.push_focus(true);
        Ok(self.state())
    }

    /// Pop the callee and restore the caller's focus.
    pub fn step_back(&mut self) -> Outcome<StateView> {
        if self.mode != Mode::Walkthrough {
            return Err(self.invalid("step_back"));
        }
        if self.stack.len() < 2 {
            return Err(Rejection::NothingToStepBack);
        }
        let frame = self.stack.pop().expect("checked depth");
        self.close_frame(frame);
        self.push_dim();
        self.push_focus(false);
        Ok(self.state())
    }

    fn top_tasks(&self) -> (String, Vec<TaskSpec>) {
        let f = self.stack.last().expect("active session has a frame");
        let tasks = self
            .cfg
            .guide(&f.guide.function)
            .map(|g| g.tasks.clone())
            .unwrap_or_default();
        (f.guide.function.clone(), tasks)
    }

    pub fn open_task(&mut self, index: usize, confirm: bool) -> Outcome<StateView> {
        if !matches!(self.mode, Mode::Walkthrough | Mode::Task | Mode::Done) {
            return Err(self.invalid("open_task"));
        }
        let (function, tasks) = self.top_tasks();
        let Some(spec) = tasks.get(index) else {
            return Err(Rejection::NoSuchTask {
                index,
                count: tasks.len(),
            });
        };
        if self.task.as_ref().is_some_and(|t| t.edited) && !confirm {
            return Err(Rejection::ConfirmRequired);
        }
        self.task = Some(ActiveTask {
            function: function.clone(),
            index,
            working_text: spec.template.clone(),
            edited: false,
        });
        self.mode = Mode::Task;
        self.outbox.push(Notification::TaskOpened {
            function,
            index,
            kind: spec.kind,
            prompt: spec.prompt.clone(),
            template: spec.template.clone(),
        });
        Ok(self.state())
    }

    /// Replace the playground text without validating it.
    pub fn edit(&mut self, text: &str) -> Outcome<StateView> {
        if self.mode != Mode::Task {
            return Err(self.invalid("edit"));
        }
        let task = self.task.as_mut().expect("task mode has a task");
        if task.working_text != text {
            task.working_text = text.to_owned();
            task.edited = true;
        }
        Ok(self.state())
    }

    /// Validate `candidate` against every case of the open task.
    pub fn submit(&mut self, candidate: &str) -> Outcome<ValidationResult> {
        if self.mode != Mode::Task {
            return Err(self.invalid("submit"));
        }
        self.edit(candidate)?;
        let task = self.task.as_ref().expect("task mode has a task");
        let (_, tasks) = self.top_tasks();
        let spec = tasks[task.index].clone();
        let frame = self.stack.last().expect("frame");
        let imports = get_imports(&frame.doc);
        let span = frame.guide.span.clone();
        let doc = frame.doc.clone();
        let interpreter = self.opts.trace.interpreter.clone();
        let timeout = self.opts.trace.step_timeout;
        let temp = self.temp()?;
        let result = validate_candidate(
            &doc,
            &span,
            &imports,
            &spec,
            candidate,
            temp,
            &interpreter,
            timeout,
        )
        .map_err(io_rejection)?;
        if result.passed {
            self.mode = Mode::Done;
        }
        Ok(result)
    }

    /// End everything: terminate traces, delete temp files, restore files.
    /// Always succeeds; problems are logged.
    pub fn exit(&mut self) -> Vec<PathBuf> {
        let restored = self.teardown();
        self.outbox.push(Notification::Exit {
            restored: restored.clone(),
        });
        restored
    }

    fn teardown(&mut self) -> Vec<PathBuf> {
        while let Some(frame) = self.stack.pop() {
            self.close_frame(frame);
        }
        if let Some(temp) = self.temp.take() {
            if let Err(e) = temp.cleanup() {
                log::warn!("could not remove {}: {e}", temp.path().display());
            }
        }
        let mut restored = Vec::new();
        for (rel, bytes) in std::mem::take(&mut self.revert_set) {
            let path = self.opts.workspace.join(&rel);
            let same = std::fs::read(&path).map(|b| b == bytes).unwrap_or(false);
            if !same {
                match std::fs::write(&path, &bytes) {
                    Ok(()) => restored.push(rel),
                    Err(e) => log::error!("could not restore {}: {e}", path.display()),
                }
            }
        }
        self.task = None;
        self.mode = Mode::Idle;
        self.session_id = uuid::Uuid::new_v4().to_string();
        restored
    }

    /// Kill the focused trace's child without telling the session, for
    /// crash-injection tests.
    pub fn inject_crash(&mut self) -> bool {
        match self.stack.last_mut().and_then(|f| f.trace.as_mut()) {
            Some(t) => {
                t.kill_child();
                true
            }
            None => false,
        }
    }

    /// Process id of the focused trace child, if one is running.
    pub fn trace_pid(&self) -> Option<u32> {
        self.stack
            .last()
            .and_then(|f| f.trace.as_ref())
            .and_then(|t| t.pid())
    }

    /// Process ids of every running trace child on the stack.
    pub fn trace_pids(&self) -> Vec<u32> {
        self.stack
            .iter()
            .filter_map(|f| f.trace.as_ref().and_then(|t| t.pid()))
            .collect()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        if self.mode != Mode::Idle || self.temp.is_some() {
            self.teardown();
        }
    }
}

/// The whole file minus the function's decorators, header and body.
pub fn dim_ranges(doc: &SourceDoc, span: &FunctionSpan) -> Vec<LineRange> {
    let full = span.full_range();
    let mut out = Vec::new();
    if full.start > 1 {
        out.push(LineRange::new(1, full.start - 1));
    }
    if full.end < doc.line_count() {
        out.push(LineRange::new(full.end + 1, doc.line_count()));
    }
    out
}
