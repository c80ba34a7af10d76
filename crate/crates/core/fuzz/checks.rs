//! Properties checked on arbitrary input, shared by the fuzz targets and
//! the seed replay test. Each function panics on a violated invariant.

#![allow(dead_code)]

use std::io::Cursor;

use code_compass::config::WalkthroughConfig;
use code_compass::server::{read_frame, write_frame};
use code_compass::source_scan::{fn_range, scan as scan_source, SourceDoc};
use code_compass::trace::wire::decode_message;
use code_compass::value::Value;

pub fn scan(data: &[u8]) {
    let text = String::from_utf8_lossy(data);
    let doc = SourceDoc::from_text("fuzz.py", &text);
    let report = scan_source(&doc);
    for w in report.functions.windows(2) {
        assert!(w[0].header_line < w[1].header_line);
    }
    for s in &report.functions {
        assert!(s.header_line <= s.header_end);
        assert!(s.header_end < s.body_range.start);
        assert!(s.body_range.end <= doc.line_count());
        assert_eq!(fn_range(&doc, s.header_line).ok(), Some(s.body_range));
    }
    for i in &report.imports {
        assert!(i.line_range.end <= doc.line_count());
    }
}

pub fn config(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = WalkthroughConfig::parse(text) {
        let canonical = cfg.to_canonical_json();
        let again = WalkthroughConfig::parse(&canonical).expect("canonical form reloads");
        assert_eq!(again.to_canonical_json(), canonical);
    }
}

pub fn value_literal(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = Value::parse(text) {
        let canonical = v.to_canonical();
        let again = Value::parse(&canonical).expect("canonical text parses");
        assert_eq!(again.to_canonical(), canonical);
    }
}

pub fn frame(data: &[u8]) {
    let mut r = Cursor::new(data);
    let mut bodies = Vec::new();
    loop {
        match read_frame(&mut r) {
            Ok(Some(body)) => bodies.push(body),
            Ok(None) => break,
            Err(e) if e.recoverable() => continue,
            Err(_) => break,
        }
    }
    let mut out = Vec::new();
    for b in &bodies {
        write_frame(&mut out, b).unwrap();
    }
    let mut r = Cursor::new(out);
    for b in &bodies {
        assert_eq!(read_frame(&mut r).unwrap().as_ref(), Some(b));
    }
    assert!(read_frame(&mut r).unwrap().is_none());
}

pub fn trace_wire(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(msg) = decode_message(text) {
        let line = serde_json::to_string(&msg).unwrap();
        assert_eq!(decode_message(&line).unwrap(), msg);
    }
}
