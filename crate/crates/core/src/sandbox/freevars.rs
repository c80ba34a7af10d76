//! Static free-name check for a function copied into a sandbox.
//!
//! Purely lexical and deliberately approximate: it only decides whether to
//! warn. Execution reports the real `NameError` if a warning was right.

use std::collections::{BTreeMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;

use crate::source_scan::lexer::{lex_lines, logical_lines};
use crate::source_scan::{ImportStmt, Param};

static IDENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[^\W\d]\w*").unwrap());
static FOR_TARGET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bfor\s+([^\n]+?)\s+in\b").unwrap());
static AS_TARGET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bas\s+([^\W\d]\w*)").unwrap());
static LAMBDA_PARAMS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\blambda\b([^:]*):").unwrap());
static WALRUS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([^\W\d]\w*)\s*:=").unwrap());
static DEF_OR_CLASS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:async\s+)?(?:def|class)\s+([^\W\d]\w*)").unwrap());
static SCOPE_DECL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:global|nonlocal)\s+(.+)$").unwrap());

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def",
    "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is",
    "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with", "yield", "match",
    "case", "_", "type",
];

const BUILTINS: &[&str] = &[
    "ArithmeticError",
    "AssertionError",
    "AttributeError",
    "BaseException",
    "BaseExceptionGroup",
    "BlockingIOError",
    "BrokenPipeError",
    "BufferError",
    "BytesWarning",
    "ChildProcessError",
    "ConnectionAbortedError",
    "ConnectionError",
    "ConnectionRefusedError",
    "ConnectionResetError",
    "DeprecationWarning",
    "EOFError",
    "Ellipsis",
    "EncodingWarning",
    "EnvironmentError",
    "Exception",
    "ExceptionGroup",
    "FileExistsError",
    "FileNotFoundError",
    "FloatingPointError",
    "FutureWarning",
    "GeneratorExit",
    "IOError",
    "ImportError",
    "ImportWarning",
    "IndentationError",
    "IndexError",
    "InterruptedError",
    "IsADirectoryError",
    "KeyError",
    "KeyboardInterrupt",
    "LookupError",
    "MemoryError",
    "ModuleNotFoundError",
    "NameError",
    "NotADirectoryError",
    "NotImplemented",
    "NotImplementedError",
    "OSError",
    "OverflowError",
    "PendingDeprecationWarning",
    "PermissionError",
    "ProcessLookupError",
    "RecursionError",
    "ReferenceError",
    "ResourceWarning",
    "RuntimeError",
    "RuntimeWarning",
    "StopAsyncIteration",
    "StopIteration",
    "SyntaxError",
    "SyntaxWarning",
    "SystemError",
    "SystemExit",
    "TabError",
    "TimeoutError",
    "TypeError",
    "UnboundLocalError",
    "UnicodeDecodeError",
    "UnicodeEncodeError",
    "UnicodeError",
    "UnicodeTranslateError",
    "UnicodeWarning",
    "UserWarning",
    "ValueError",
    "Warning",
    "ZeroDivisionError",
    "__build_class__",
    "__builtins__",
    "__debug__",
    "__doc__",
    "__file__",
    "__import__",
    "__loader__",
    "__name__",
    "__package__",
    "__spec__",
    "abs",
    "aiter",
    "all",
    "anext",
    "any",
    "ascii",
    "bin",
    "bool",
    "breakpoint",
    "bytearray",
    "bytes",
    "callable",
    "chr",
    "classmethod",
    "compile",
    "complex",
    "copyright",
    "credits",
    "delattr",
    "dict",
    "dir",
    "divmod",
    "enumerate",
    "eval",
    "exec",
    "exit",
    "filter",
    "float",
    "format",
    "frozenset",
    "getattr",
    "globals",
    "hasattr",
    "hash",
    "help",
    "hex",
    "id",
    "input",
    "int",
    "isinstance",
    "issubclass",
    "iter",
    "len",
    "license",
    "list",
    "locals",
    "map",
    "max",
    "memoryview",
    "min",
    "next",
    "object",
    "oct",
    "open",
    "ord",
    "pow",
    "print",
    "property",
    "quit",
    "range",
    "repr",
    "reversed",
    "round",
    "set",
    "setattr",
    "slice",
    "sorted",
    "staticmethod",
    "str",
    "sum",
    "super",
    "tuple",
    "type",
    "vars",
    "zip",
];

/// Names bound by an import statement; `None` for a star import.
pub(crate) fn imported_names(stmt: &ImportStmt) -> Option<Vec<String>> {
    let text: String = stmt
        .text
        .split('\n')
        .map(|l| l.split('#').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join(" ")
        .replace(['(', ')', '\\'], " ");
    let text = text.trim();
    let mut names = Vec::new();
    for part in text.split(';') {
        let part = part.trim();
        let list = if let Some(rest) = part.strip_prefix("from ") {
            match rest.split_once(" import ") {
                Some((_, list)) => list,
                None => continue,
            }
        } else if let Some(rest) = part.strip_prefix("import ") {
            rest
        } else {
            continue;
        };
        for item in list.split(',') {
            let item = item.trim();
            if item == "*" {
                return None;
            }
            let words: Vec<&str> = item.split_whitespace().collect();
            match words.as_slice() {
                [_, "as", alias] => names.push((*alias).to_owned()),
                [module] => names.push(module.split('.').next().unwrap_or("").to_owned()),
                _ => {}
            }
        }
    }
    Some(names)
}

/// Left-hand side of a top-level assignment in `masked`, if any.
fn assignment_lhs(masked: &str) -> Vec<&str> {
    let bytes = masked.as_bytes();
    let mut depth = 0usize;
    let mut targets = Vec::new();
    let mut seg_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth = depth.saturating_sub(1),
            b'=' if depth == 0 => {
                let prev = if i > 0 { bytes[i - 1] } else { b' ' };
                let next = bytes.get(i + 1).copied().unwrap_or(b' ');
                if next == b'=' {
                    i += 2;
                    continue;
                }
                if matches!(prev, b'!' | b'<' | b'>' | b'=' | b':') {
                    i += 1;
                    continue;
                }
                targets.push(&masked[seg_start..i]);
                seg_start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    targets
}

/// Identifiers that are not attribute accesses or keyword-argument names.
fn references(masked: &str) -> Vec<(usize, &str)> {
    let bytes = masked.as_bytes();
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut last = 0usize;
    for m in IDENT.find_iter(masked) {
        for &b in &bytes[last..m.start()] {
            match b {
                b'(' | b'[' | b'{' => depth += 1,
                b')' | b']' | b'}' => depth = depth.saturating_sub(1),
                _ => {}
            }
        }
        last = m.start();
        let before = masked[..m.start()].trim_end();
        if before.ends_with('.') {
            continue;
        }
        if is_string_prefix(m.as_str()) && masked[m.end()..].starts_with(['"', '\'']) {
            continue;
        }
        let after = masked[m.end()..].trim_start();
        if depth > 0 && after.starts_with('=') && !after.starts_with("==") {
            continue;
        }
        out.push((m.start(), m.as_str()));
    }
    out
}

fn is_string_prefix(word: &str) -> bool {
    matches!(
        word.to_ascii_lowercase().as_str(),
        "r" | "u" | "b" | "f" | "br" | "rb" | "fr" | "rf"
    )
}

fn idents(s: &str) -> impl Iterator<Item = &str> {
    IDENT.find_iter(s).map(|m| m.as_str())
}

/// Referenced names (with the 1-based line of first use, counted from the
/// start of `lines`) that nothing in scope binds.
pub(crate) fn free_names(
    lines: &[String],
    params: &[Param],
    own_name: &str,
    imports: &[ImportStmt],
) -> BTreeMap<String, usize> {
    let mut bound: HashSet<String> = HashSet::new();
    bound.insert(own_name.to_owned());
    bound.extend(params.iter().map(|p| p.name.clone()));
    for stmt in imports {
        match imported_names(stmt) {
            Some(names) => bound.extend(names),
            None => return BTreeMap::new(),
        }
    }
    let keywords: HashSet<&str> = KEYWORDS.iter().chain(BUILTINS).copied().collect();

    let phys = lex_lines(lines);
    let logical = logical_lines(&phys);

    // First pass: everything bound anywhere in the function.
    for line in &logical {
        let masked = &line.masked;
        if let Some(c) = DEF_OR_CLASS.captures(masked) {
            bound.insert(c[1].to_owned());
            if let Some(open) = masked.find('(') {
                // nested def parameters
                for piece in masked[open + 1..].split(',') {
                    if let Some(name) = idents(piece.trim_start_matches('*')).next() {
                        bound.insert(name.to_owned());
                    }
                }
            }
        }
        for lhs in assignment_lhs(masked) {
            let lhs = lhs.trim_end_matches(['+', '-', '*', '/', '%', '&', '|', '^', '<', '>', '@']);
            for m in IDENT.find_iter(lhs) {
                let before = lhs[..m.start()].trim_end();
                let after = lhs[m.end()..].trim_start();
                if !before.ends_with('.') && !after.starts_with(['.', '[', '(']) {
                    bound.insert(m.as_str().to_owned());
                }
            }
        }
        for caps in FOR_TARGET.captures_iter(masked) {
            bound.extend(idents(&caps[1]).map(str::to_owned));
        }
        for caps in AS_TARGET.captures_iter(masked) {
            bound.insert(caps[1].to_owned());
        }
        for caps in LAMBDA_PARAMS.captures_iter(masked) {
            bound.extend(idents(&caps[1]).map(str::to_owned));
        }
        for caps in WALRUS.captures_iter(masked) {
            bound.insert(caps[1].to_owned());
        }
        if let Some(caps) = SCOPE_DECL.captures(masked) {
            bound.extend(idents(&caps[1]).map(str::to_owned));
        }
        let trimmed = masked.trim_start();
        if trimmed.starts_with("import ") || trimmed.starts_with("from ") {
            let stmt = ImportStmt {
                line_range: crate::source_scan::LineRange::single(line.start),
                text: trimmed.to_owned(),
            };
            if let Some(names) = imported_names(&stmt) {
                bound.extend(names);
            }
        }
    }

    let mut free = BTreeMap::new();
    for line in &logical {
        let trimmed = line.masked.trim_start();
        if trimmed.starts_with("import ") || trimmed.starts_with("from ") {
            continue;
        }
        for (offset, name) in references(&line.masked) {
            if bound.contains(name) || keywords.contains(name) {
                continue;
            }
            let line_no = line.start + line.masked[..offset].matches('\n').count();
            free.entry(name.to_owned()).or_insert(line_no);
        }
    }
    free
}
