//! Newline-delimited JSON messages exchanged with the trace shim.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const WIRE_VERSION: u32 = 1;

/// Child to engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum WireMessage {
    Ready {
        v: u32,
    },
    Line {
        line: usize,
        func: String,
        #[serde(default)]
        locals: BTreeMap<String, String>,
    },
    Call {
        line: usize,
        func: String,
    },
    Return {
        line: usize,
        func: String,
        #[serde(default)]
        v: Option<String>,
    },
    Result {
        v: String,
    },
    Error {
        text: String,
    },
    Exit {
        code: i32,
    },
}

/// Engine to child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "c", rename_all = "snake_case")]
pub enum StepCommand {
    StepInto,
    StepOver,
    /// Run to the next line in the focus range, or to `line` when given.
    Continue {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        line: Option<usize>,
    },
    Quit,
}

impl StepCommand {
    pub const CONTINUE: StepCommand = StepCommand::Continue { line: None };

    pub fn name(&self) -> &'static str {
        match self {
            StepCommand::StepInto => "step_into",
            StepCommand::StepOver => "step_over",
            StepCommand::Continue { .. } => "continue",
            StepCommand::Quit => "quit",
        }
    }
}

pub fn decode_message(line: &str) -> Result<WireMessage, serde_json::Error> {
    serde_json::from_str(line.trim_end_matches(['\r', '\n']))
}

pub fn encode_command(cmd: &StepCommand) -> String {
    let mut s = serde_json::to_string(cmd).expect("commands always serialize");
    s.push('\n');
    s
}
