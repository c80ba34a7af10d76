//! Differential driver: sandbox result line vs direct invocation.

use std::path::Path;
use std::process::Command;
use std::time::Duration;

use code_compass::sandbox::{execute, gen_sandbox, SandboxDir};
use code_compass::source_scan::{get_imports, scan_functions, SourceDoc};
use code_compass::value::Value;

pub type Case = (String, Vec<String>);

pub fn cases() -> Vec<Case> {
    let text = std::fs::read_to_string(super::corpus("sandbox/cases.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn frozen_expected() -> Vec<String> {
    let text = std::fs::read_to_string(super::corpus("sandbox/expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Canonical results of calling each case directly in the interpreter.
pub fn direct_results(py: &Path) -> Vec<String> {
    let out = Command::new(py)
        .arg(super::corpus("sandbox/direct.py"))
        .arg(super::corpus("sandbox/pure.py"))
        .arg(super::corpus("sandbox/cases.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let reprs: Vec<String> = serde_json::from_slice(&out.stdout).unwrap();
    reprs
        .iter()
        .map(|r| {
            Value::parse(r)
                .unwrap_or_else(|e| panic!("{r}: {e}"))
                .to_canonical()
        })
        .collect()
}

/// Sandbox `##RESULT##` payload for every case, run concurrently.
pub fn sandbox_results(py: &Path, root: &Path) -> Vec<Option<String>> {
    let doc = SourceDoc::read(&super::corpus("sandbox/pure.py")).unwrap();
    let spans = scan_functions(&doc);
    let imports = get_imports(&doc);
    let dir = SandboxDir::create_in(root, "differential").unwrap();
    let mut docs = Vec::new();
    for (qualname, inputs) in cases() {
        let span = spans.iter().find(|s| s.qualname == qualname).unwrap();
        let mut sb = gen_sandbox(&doc, span, &imports, &inputs).unwrap();
        dir.materialize(&mut sb).unwrap();
        docs.push(sb);
    }
    let results = std::thread::scope(|scope| {
        let handles: Vec<_> = docs
            .iter()
            .map(|sb| {
                let path = sb.temp_path.clone().unwrap();
                scope.spawn(move || execute(py, &path, Duration::from_secs(20)).unwrap())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                let out = h.join().unwrap();
                if out.result.is_none() {
                    eprintln!("{}", out.stderr);
                }
                out.result
            })
            .collect()
    });
    for mut sb in docs {
        dir.dispose(&mut sb).unwrap();
    }
    assert!(dir.is_empty());
    results
}
