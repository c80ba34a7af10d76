//! The published schema and example agree with the loader.

use std::path::{Path, PathBuf};
use std::process::Command;

use code_compass::config::{read_config, WalkthroughConfig};
use serde_json::{json, Value as Json};

fn docs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs")
}

fn example_text() -> String {
    std::fs::read_to_string(docs().join("compass.example.json")).unwrap()
}

/// Validate each document against the schema with python jsonschema.
/// `None` when python or the package is unavailable.
fn schema_verdicts(docs_: &[Json]) -> Option<Vec<bool>> {
    let script = r#"
import json, sys
import jsonschema
schema = json.load(open(sys.argv[1]))
cls = jsonschema.validators.validator_for(schema)
cls.check_schema(schema)
v = cls(schema)
for doc in json.load(sys.stdin):
    print("ok" if v.is_valid(doc) else "bad")
"#;
    let py = std::env::var("CODE_COMPASS_INTERPRETER").unwrap_or_else(|_| "python3".into());
    let mut child = Command::new(py)
        .arg("-c")
        .arg(script)
        .arg(docs().join("compass.schema.json"))
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .ok()?;
    {
        use std::io::Write;
        let mut stdin = child.stdin.take().unwrap();
        stdin
            .write_all(serde_json::to_string(docs_).unwrap().as_bytes())
            .unwrap();
    }
    let out = child.wait_with_output().ok()?;
    if !out.status.success() {
        let err = String::from_utf8_lossy(&out.stderr);
        if err.contains("No module named") {
            return None;
        }
        panic!("schema check failed: {err}");
    }
    Some(
        String::from_utf8_lossy(&out.stdout)
            .lines()
            .map(|l| l == "ok")
            .collect(),
    )
}

#[test]
fn example_loads_and_is_canonical() {
    let text = example_text();
    let cfg = WalkthroughConfig::parse(&text).unwrap();
    assert_eq!(cfg.to_canonical_json(), text);
    let loaded = read_config(&docs().join("compass.example.json")).unwrap();
    assert_eq!(loaded.to_canonical_json(), text);
}

fn variants() -> Vec<(&'static str, Json)> {
    let base: Json = serde_json::from_str(&example_text()).unwrap();
    let edit = |f: &dyn Fn(&mut Json)| {
        let mut v = base.clone();
        f(&mut v);
        v
    };
    vec![
        (
            "no version",
            edit(&|v| {
                v.as_object_mut().unwrap().remove("version");
            }),
        ),
        (
            "no guides",
            edit(&|v| {
                v.as_object_mut().unwrap().remove("guides");
            }),
        ),
        (
            "guide without file",
            edit(&|v| {
                v["guides"]["describe"].as_object_mut().unwrap().remove("file");
            }),
        ),
        (
            "unknown guide key",
            edit(&|v| v["guides"]["describe"]["colour"] = json!("red")),
        ),
        (
            "bad kind",
            edit(&|v| v["guides"]["describe"]["tasks"][0]["kind"] = json!("essay")),
        ),
        (
            "blank missing",
            edit(&|v| v["guides"]["Rect.area"]["tasks"][0]["template"] = json!("return w * h")),
        ),
        (
            "negative offset",
            edit(&|v| v["guides"]["describe"]["lines"][0]["offset"] = json!(-1)),
        ),
        (
            "empty inputs",
            edit(&|v| {
                v["guides"]["describe"]["tasks"][0]["inputs"] = json!([]);
                v["guides"]["describe"]["tasks"][0]["expected"] = json!([]);
            }),
        ),
        ("zero priority", edit(&|v| v["files"][0]["priority"] = json!(0))),
        (
            "non-string literal",
            edit(&|v| v["guides"]["describe"]["tasks"][0]["expected"][0] = json!(4)),
        ),
    ]
}

#[test]
fn invalid_variants_rejected_by_loader() {
    for (name, doc) in variants() {
        let text = serde_json::to_string_pretty(&doc).unwrap();
        assert!(
            WalkthroughConfig::parse(&text).is_err(),
            "loader accepted: {name}"
        );
    }
}

#[test]
fn schema_agrees_with_loader() {
    let fixture: Json = serde_json::from_str(
        &std::fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus/workspace/compass.json"),
        )
        .unwrap(),
    )
    .unwrap();
    let example: Json = serde_json::from_str(&example_text()).unwrap();
    let mut docs_ = vec![example, fixture];
    let bad = variants();
    docs_.extend(bad.iter().map(|(_, d)| d.clone()));
    let Some(verdicts) = schema_verdicts(&docs_) else {
        eprintln!("python jsonschema unavailable, skipping");
        return;
    };
    assert_eq!(verdicts.len(), docs_.len());
    assert!(verdicts[0], "example fails the schema");
    assert!(verdicts[1], "fixture fails the schema");
    for ((name, _), ok) in bad.iter().zip(&verdicts[2..]) {
        assert!(!ok, "schema accepted: {name}");
    }
}
