use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::config::TaskKind;
use crate::source_scan::LineRange;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Walkthrough,
    Task,
    Done,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Idle => "idle",
            Mode::Walkthrough => "walkthrough",
            Mode::Task => "task",
            Mode::Done => "done",
        })
    }
}

/// A guided function under the cursor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Offer {
    pub function: String,
    pub file: PathBuf,
    pub header_line: usize,
    pub summary: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doc_link: Option<String>,
    pub tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskEntry {
    pub index: usize,
    pub kind: TaskKind,
    pub prompt: String,
}

/// Display updates pushed to the client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Notification {
    Focus {
        function: String,
        file: PathBuf,
        line: usize,
        depth: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        summary: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        note: Option<String>,
        /// Whether the focus came from the live trace rather than the guide alone.
        live: bool,
        #[serde(skip_serializing_if = "BTreeMap::is_empty")]
        locals: BTreeMap<String, String>,
    },
    Dim {
        file: PathBuf,
        ranges: Vec<LineRange>,
    },
    TaskOffer {
        function: String,
        tasks: Vec<TaskEntry>,
    },
    TaskOpened {
        function: String,
        index: usize,
        kind: TaskKind,
        prompt: String,
        template: String,
    },
    Notice {
        message: String,
    },
    Exit {
        restored: Vec<PathBuf>,
    },
}

/// A command refused or failed. Rejections for invalid commands leave the
/// state untouched; `StepTimeout` ends the session first.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rejection {
    #[error("a session is already active")]
    SessionBusy,
    #[error("no active session")]
    NoActiveSession,
    #[error("`{command}` is not valid in {mode} mode")]
    InvalidInMode { command: String, mode: Mode },
    #[error("no guide for `{function}`")]
    NoGuide { function: String },
    #[error("no guided function is called on line {line}")]
    NoGuideForCallee { line: usize },
    #[error("nothing to step back to")]
    NothingToStepBack,
    #[error("no task {index} (guide has {count})")]
    NoSuchTask { index: usize, count: usize },
    #[error("working text was edited; resend with confirm to replace it")]
    ConfirmRequired,
    #[error("`{function}` not found in {file}")]
    FunctionNotFound { function: String, file: PathBuf },
    #[error("{message}")]
    ResolveFailed { message: String },
    #[error("could not start: {message}")]
    StartFailed { message: String },
    #[error("step timed out; session ended")]
    StepTimeout,
    #[error("{message}")]
    Io { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseResult {
    pub input: Vec<String>,
    pub expected: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actual: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationResult {
    pub passed: bool,
    pub per_case: Vec<CaseResult>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskView {
    pub function: String,
    pub index: usize,
    pub working_text: String,
    pub edited: bool,
}

/// Serializable snapshot of the session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateView {
    pub mode: Mode,
    pub depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub focused_line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Whether the top frame still has a running trace.
    pub live: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dim_ranges: Vec<LineRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskView>,
    pub offered: bool,
}
