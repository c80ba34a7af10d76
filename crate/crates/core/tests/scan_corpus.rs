mod common;

use std::collections::BTreeMap;
use std::process::Command;

use code_compass::source_scan::{
    fn_range, get_imports, scan, scan_functions, LineRange, ScanWarning, SourceDoc,
};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Debug, Deserialize, PartialEq)]
struct OracleSpan {
    qualname: String,
    header_line: usize,
    body_range: [usize; 2],
    decorators: Option<[usize; 2]>,
}

#[derive(Debug, Deserialize, PartialEq)]
struct OracleFile {
    functions: Vec<OracleSpan>,
    imports: Vec<[usize; 2]>,
}

fn frozen() -> BTreeMap<String, OracleFile> {
    let text = std::fs::read_to_string(common::corpus("scan/expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn load(name: &str) -> SourceDoc {
    SourceDoc::read(&common::corpus("scan/supported").join(name)).unwrap()
}

#[test]
fn spans_match_frozen_reference_parser_output() {
    let expected = frozen();
    let mut total = 0;
    for (file, want) in &expected {
        let doc = load(file);
        let report = scan(&doc);
        assert!(report.warnings.is_empty(), "{file}: {:?}", report.warnings);
        let got: Vec<OracleSpan> = report
            .functions
            .iter()
            .map(|s| OracleSpan {
                qualname: s.qualname.clone(),
                header_line: s.header_line,
                body_range: [s.body_range.start, s.body_range.end],
                decorators: s.decorators.map(|d| [d.start, d.end]),
            })
            .collect();
        assert_eq!(got, want.functions, "{file}");
        let imports: Vec<[usize; 2]> = report
            .imports
            .iter()
            .map(|i| [i.line_range.start, i.line_range.end])
            .collect();
        assert_eq!(imports, want.imports, "{file}");
        total += got.len();
    }
    assert!(total >= 50, "corpus has only {total} functions");
}

#[test]
fn frozen_expectations_are_current() {
    let Some(py) = common::python() else {
        eprintln!("no interpreter; skipping live oracle refresh check");
        return;
    };
    let dir = common::corpus("scan/supported");
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    let out = Command::new(py)
        .arg(common::manifest_dir().join("tests/oracle/ast_oracle.py"))
        .args(&files)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let live: BTreeMap<String, OracleFile> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(live, frozen());
}

#[test]
fn unsupported_constructs_are_rejected_with_diagnostics() {
    #[derive(Deserialize)]
    struct Expect {
        functions: Vec<String>,
        warnings: Vec<ScanWarning>,
    }
    let text = std::fs::read_to_string(common::corpus("scan/expected_unsupported.json")).unwrap();
    let expected: BTreeMap<String, Expect> = serde_json::from_str(&text).unwrap();
    for (file, want) in expected {
        let doc = SourceDoc::read(&common::corpus("scan/unsupported").join(&file)).unwrap();
        let report = scan(&doc);
        let names: Vec<_> = report.functions.iter().map(|f| f.name.clone()).collect();
        assert_eq!(names, want.functions, "{file}");
        assert_eq!(report.warnings, want.warnings, "{file}");
    }
}

#[test]
fn fn_range_agrees_with_scan() {
    for file in frozen().keys() {
        let doc = load(file);
        for span in scan_functions(&doc) {
            assert_eq!(fn_range(&doc, span.header_line).unwrap(), span.body_range);
        }
    }
}

#[test]
fn span_invariants_hold_on_corpus() {
    for file in frozen().keys() {
        let doc = load(file);
        let spans = scan_functions(&doc);
        check_span_invariants(&doc, &spans);
    }
}

fn indent_of(line: &str) -> usize {
    let mut col = 0;
    for c in line.chars() {
        match c {
            ' ' => col += 1,
            '\t' => col = (col / 8 + 1) * 8,
            _ => break,
        }
    }
    col
}

fn is_blank(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

fn check_span_invariants(doc: &SourceDoc, spans: &[code_compass::source_scan::FunctionSpan]) {
    for w in spans.windows(2) {
        assert!(w[0].header_line < w[1].header_line);
    }
    for s in spans {
        assert!(s.body_range.start > s.header_end);
        assert!(s.header_end >= s.header_line);
        // first code line past the body is dedented to the header or less
        if let Some(next) = (s.body_range.end + 1..=doc.line_count())
            .map(|l| doc.line(l).unwrap())
            .find(|l| !is_blank(l))
        {
            assert!(indent_of(next) <= s.indent, "{}", s.qualname);
        }
        for parent in spans {
            if parent.header_line < s.header_line && parent.body_range.contains(s.header_line) {
                assert!(parent.body_range.contains_range(&s.body_range));
            }
        }
    }
}

#[test]
fn body_round_trips_through_rescan() {
    for file in frozen().keys() {
        let doc = load(file);
        for span in scan_functions(&doc) {
            let text = (span.header_line..=span.body_range.end)
                .map(|l| {
                    let line = doc.line(l).unwrap();
                    line.get(span.indent.min(line.len())..).unwrap_or("").to_owned()
                })
                .collect::<Vec<_>>()
                .join("\n");
            // tab-indented corpus files dedent by columns; skip those
            if doc.line(span.header_line).unwrap().starts_with('\t') {
                continue;
            }
            let again = scan_functions(&SourceDoc::from_text("x.py", &text));
            assert_eq!(again[0].name, span.name, "{file}:{}", span.header_line);
            assert_eq!(again[0].header_line, 1);
        }
    }
}

#[test]
fn imports_are_module_level_and_ordered() {
    let doc = load("03_decorated.py");
    let imports = get_imports(&doc);
    assert_eq!(imports[1].line_range, LineRange::new(2, 5));
    assert!(imports[1].text.starts_with("from dataclasses import ("));
    for i in &imports {
        let head = i.text.trim_start();
        assert!(head.starts_with("import") || head.starts_with("from"));
    }
}

proptest! {
    #[test]
    fn scanning_is_total(text in any::<String>()) {
        let doc = SourceDoc::from_text("fuzz.py", &text);
        let report = scan(&doc);
        for s in &report.functions {
            prop_assert!(s.body_range.end <= doc.line_count());
        }
    }

    #[test]
    fn python_like_text_keeps_invariants(
        lines in prop::collection::vec(
            prop::sample::select(vec![
                "def f(a):", "    def g(b,", "        c):", "    x = 1", "", "  # c",
                "        return 2", "    '''", "def h():", "@d", "class K:", "    y = (",
                "1)", "\treturn 3", "import os", "from a import (b,", "  c)",
            ]),
            0..30,
        )
    ) {
        let text = lines.join("\n");
        let doc = SourceDoc::from_text("p.py", &text);
        let spans = scan_functions(&doc);
        for w in spans.windows(2) {
            prop_assert!(w[0].header_line < w[1].header_line);
        }
        for s in &spans {
            prop_assert!(s.body_range.start > s.header_end);
            prop_assert_eq!(fn_range(&doc, s.header_line).unwrap(), s.body_range);
        }
    }
}
