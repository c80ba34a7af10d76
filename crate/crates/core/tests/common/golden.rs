//! Protocol transcript replay.
//!
//! A request transcript is JSON Lines: each line is one frame body, except
//! `!frame "<text>"` (frame this exact text) and `!raw "<text>"` (send these
//! bytes unframed, for malformed input).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use code_compass::server::{read_frame, write_frame};

pub const TRANSCRIPTS: &[&str] = &["walkthrough_task", "jump_and_errors", "static_fallback"];

pub fn requests_path(name: &str) -> PathBuf {
    super::corpus("protocol").join(format!("{name}.requests.jsonl"))
}

pub fn responses_path(name: &str) -> PathBuf {
    super::corpus("protocol").join(format!("{name}.responses"))
}

pub fn request_stream(name: &str) -> Vec<u8> {
    let text = std::fs::read_to_string(requests_path(name)).unwrap();
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        if let Some(raw) = line.strip_prefix("!raw ") {
            let s: String = serde_json::from_str(raw).unwrap();
            out.extend_from_slice(s.as_bytes());
        } else if let Some(body) = line.strip_prefix("!frame ") {
            let s: String = serde_json::from_str(body).unwrap();
            write_frame(&mut out, s.as_bytes()).unwrap();
        } else {
            write_frame(&mut out, line.as_bytes()).unwrap();
        }
    }
    out
}

/// Run `serve` over `input` in `workspace`; returns stdout bytes.
pub fn replay(py: &Path, workspace: &Path, input: &[u8]) -> Vec<u8> {
    let mut child = Command::new(env!("CARGO_BIN_EXE_code-compass"))
        .arg("--workspace")
        .arg(workspace)
        .arg("--interpreter")
        .arg(py)
        .arg("serve")
        .current_dir(workspace)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let input = input.to_vec();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let out = child.wait_with_output().unwrap();
    writer.join().unwrap();
    assert!(out.status.success(), "serve exited with {}", out.status);
    out.stdout
}

/// Decode a framed response stream into JSON messages.
pub fn messages(bytes: &[u8]) -> Vec<serde_json::Value> {
    let mut r = std::io::Cursor::new(bytes);
    let mut out = Vec::new();
    while let Some(body) = read_frame(&mut r).unwrap() {
        out.push(serde_json::from_slice(&body).unwrap());
    }
    out
}

pub fn refreeze() -> bool {
    std::env::var_os("COMPASS_REFREEZE").is_some()
}
