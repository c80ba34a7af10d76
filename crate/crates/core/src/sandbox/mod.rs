//! Standalone source files holding one function plus a synthesized entry
//! point, materialized under a per-session temp directory.

mod freevars;
pub(crate) mod run;

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;
use thiserror::Error;

use crate::source_scan::lexer::lex_lines;
use crate::source_scan::{
    scan_functions, signature_params, FunctionSpan, ImportStmt, Param, ParamKind, ScanError, SourceDoc,
};
use crate::value::{LiteralError, Value, CANON_PY};

pub use run::{execute, RunOutcome};

/// Prefix of the single machine-readable line printed by the entry point.
pub const RESULT_PREFIX: &str = "##RESULT## ";

const TAB_SIZE: usize = 8;

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("{function} takes {expected} positional argument(s) but {got} were given")]
    ArityMismatch {
        function: String,
        expected: String,
        got: usize,
    },
    #[error("input {index} is not a literal: {source}")]
    BadInput {
        index: usize,
        #[source]
        source: LiteralError,
    },
    #[error(transparent)]
    Signature(#[from] ScanError),
    #[error("sandbox i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SandboxWarning {
    /// A name the function reads that neither imports nor builtins provide.
    UnsupportedFreeVariable { name: String, line: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct Origin {
    pub path: PathBuf,
    pub span: FunctionSpan,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandboxDoc {
    pub text: String,
    pub origin: Origin,
    /// 1-based line of the synthesized call.
    pub entry_line: usize,
    pub temp_path: Option<PathBuf>,
    /// Sandbox line to original line, for decorators, header and body.
    pub line_map: BTreeMap<usize, usize>,
    pub warnings: Vec<SandboxWarning>,
}

impl SandboxDoc {
    pub fn sandbox_line(&self, original: usize) -> Option<usize> {
        self.line_map
            .iter()
            .find(|(_, &o)| o == original)
            .map(|(&s, _)| s)
    }

    pub fn original_line(&self, sandbox: usize) -> Option<usize> {
        self.line_map.get(&sandbox).copied()
    }

    /// Sandbox lines holding the copied function body.
    pub fn body_lines(&self) -> crate::source_scan::LineRange {
        let b = self.origin.span.body_range;
        crate::source_scan::LineRange::new(
            self.sandbox_line(b.start).unwrap_or(0),
            self.sandbox_line(b.end).unwrap_or(0),
        )
    }
}

/// Entry-point text calling `name` with the decoded inputs and printing the
/// canonical form of its return value on a `##RESULT##` line.
pub fn gen_main(
    name: &str,
    is_async: bool,
    params: &[Param],
    inputs: &[String],
) -> Result<String, SandboxError> {
    let args = inputs
        .iter()
        .enumerate()
        .map(|(index, text)| {
            Value::parse(text)
                .map(|v| v.to_canonical())
                .map_err(|source| SandboxError::BadInput { index, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_arity(name, params, args.len())?;
    let call = format!("{name}({})", args.join(", "));
    let call = if is_async {
        format!("__import__(\"asyncio\").run({call})")
    } else {
        call
    };
    Ok(format!(
        "if __name__ == \"__main__\":\n    __compass_result = {call}\n    print(\"{RESULT_PREFIX}\" + __compass_canon(__compass_result), flush=True)\n"
    ))
}

fn check_arity(name: &str, params: &[Param], got: usize) -> Result<(), SandboxError> {
    let positional = params
        .iter()
        .filter(|p| matches!(p.kind, ParamKind::PositionalOnly | ParamKind::Regular));
    let max = positional.clone().count();
    let min = positional.filter(|p| p.default.is_none()).count();
    let varargs = params.iter().any(|p| p.kind == ParamKind::VarArgs);
    let kw_required = params
        .iter()
        .any(|p| p.kind == ParamKind::KeywordOnly && p.default.is_none());
    let ok = !kw_required && got >= min && (varargs || got <= max);
    if ok {
        return Ok(());
    }
    let expected = if kw_required {
        "required keyword-only arguments and".to_owned()
    } else if varargs {
        format!("at least {min}")
    } else if min == max {
        min.to_string()
    } else {
        format!("{min} to {max}")
    };
    Err(SandboxError::ArityMismatch {
        function: name.to_owned(),
        expected,
        got,
    })
}

/// Strip `cols` columns of leading whitespace, expanding a split tab.
fn dedent_line(line: &str, cols: usize) -> String {
    let mut col = 0;
    for (i, c) in line.char_indices() {
        if col >= cols {
            return line[i..].to_owned();
        }
        match c {
            ' ' => col += 1,
            '\t' => {
                let next = (col / TAB_SIZE + 1) * TAB_SIZE;
                if next > cols {
                    return " ".repeat(next - cols) + &line[i + 1..];
                }
                col = next;
            }
            _ => return line[i..].to_owned(),
        }
    }
    String::new()
}

/// Lines of the function (decorators through body end) moved to top level.
/// Lines that begin inside a string literal are copied untouched.
fn dedented_function(doc: &SourceDoc, span: &FunctionSpan) -> (usize, Vec<String>) {
    let first = span.full_range().start;
    let raw = &doc.lines[first - 1..span.body_range.end];
    let phys = lex_lines(raw);
    let lines = raw
        .iter()
        .zip(&phys)
        .map(|(line, p)| {
            if p.starts_in_string {
                line.clone()
            } else {
                dedent_line(line, span.indent)
            }
        })
        .collect();
    (first, lines)
}

fn push_imports(text: &mut Vec<String>, imports: &[ImportStmt]) {
    for stmt in imports {
        text.extend(stmt.text.split('\n').map(|l| l.trim_end_matches('\r').to_owned()));
    }
    text.push(String::new());
}

fn finish(mut lines: Vec<String>, main: &str) -> (String, usize) {
    lines.push(String::new());
    lines.extend(CANON_PY.trim_end().lines().map(str::to_owned));
    lines.push(String::new());
    let entry_line = lines.len() + 2;
    lines.extend(main.trim_end().lines().map(str::to_owned));
    let mut text = lines.join("\n");
    text.push('\n');
    (text, entry_line)
}

/// Build the sandbox for `span` of `doc` with one input tuple.
pub fn gen_sandbox(
    doc: &SourceDoc,
    span: &FunctionSpan,
    imports: &[ImportStmt],
    inputs: &[String],
) -> Result<SandboxDoc, SandboxError> {
    let params = signature_params(doc, span)?;
    let main = gen_main(&span.name, span.is_async, &params, inputs)?;

    let mut lines = Vec::new();
    push_imports(&mut lines, imports);
    let (first, body) = dedented_function(doc, span);
    let offset = lines.len();
    let line_map = (0..body.len()).map(|i| (offset + i + 1, first + i)).collect();

    let original: Vec<String> = doc.lines[first - 1..span.body_range.end].to_vec();
    let warnings = freevars::free_names(&original, &params, &span.name, imports)
        .into_iter()
        .map(|(name, rel)| SandboxWarning::UnsupportedFreeVariable {
            name,
            line: first + rel - 1,
        })
        .collect();

    lines.extend(body);
    let (text, entry_line) = finish(lines, &main);
    Ok(SandboxDoc {
        text,
        origin: Origin {
            path: doc.path.clone(),
            span: span.clone(),
        },
        entry_line,
        temp_path: None,
        line_map,
        warnings,
    })
}

/// Build a sandbox from user-supplied function source (a task candidate).
/// The function called is `name`; if the candidate does not scan, the call
/// is still emitted so the interpreter reports the real error.
pub fn gen_candidate_sandbox(
    origin: Origin,
    candidate: &str,
    name: &str,
    fallback_params: &[Param],
    imports: &[ImportStmt],
    inputs: &[String],
) -> Result<SandboxDoc, SandboxError> {
    let cand_doc = SourceDoc::from_text(origin.path.clone(), candidate);
    let spans = scan_functions(&cand_doc);
    let found = spans.iter().find(|s| s.name == name && s.indent == 0);
    let (params, is_async) = match found {
        Some(s) => match signature_params(&cand_doc, s) {
            Ok(p) => (p, s.is_async),
            Err(_) => (fallback_params.to_vec(), s.is_async),
        },
        None => (fallback_params.to_vec(), origin.span.is_async),
    };
    let main = gen_main(name, is_async, &params, inputs)?;
    let mut lines = Vec::new();
    push_imports(&mut lines, imports);
    lines.extend(cand_doc.lines.iter().cloned());
    let (text, entry_line) = finish(lines, &main);
    Ok(SandboxDoc {
        text,
        origin,
        entry_line,
        temp_path: None,
        line_map: BTreeMap::new(),
        warnings: Vec::new(),
    })
}

/// Per-session directory `<system temp>/code-compass/<session-id>/`.
#[derive(Debug)]
pub struct SandboxDir {
    root: PathBuf,
    counter: AtomicUsize,
}

impl SandboxDir {
    pub fn create(session_id: &str) -> io::Result<Self> {
        Self::create_in(&std::env::temp_dir().join("code-compass"), session_id)
    }

    pub fn create_in(base: &Path, session_id: &str) -> io::Result<Self> {
        let root = base.join(session_id);
        std::fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            counter: AtomicUsize::new(0),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn materialize(&self, sb: &mut SandboxDoc) -> io::Result<PathBuf> {
        if let Some(p) = &sb.temp_path {
            if p.exists() {
                return Ok(p.clone());
            }
        }
        std::fs::create_dir_all(&self.root)?;
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let path = self.root.join(format!("sandbox_{n}_{}.py", sb.origin.span.name));
        std::fs::write(&path, &sb.text)?;
        sb.temp_path = Some(path.clone());
        Ok(path)
    }

    /// Remove the sandbox file and anything generated beside it. Safe to
    /// call repeatedly.
    pub fn dispose(&self, sb: &mut SandboxDoc) -> io::Result<()> {
        if let Some(p) = sb.temp_path.take() {
            remove_quiet(&p)?;
            for sibling in sibling_artifacts(&p) {
                remove_quiet(&sibling)?;
            }
        }
        Ok(())
    }

    /// Delete the whole session directory.
    pub fn cleanup(&self) -> io::Result<()> {
        match std::fs::remove_dir_all(&self.root) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }

    pub fn is_empty(&self) -> bool {
        std::fs::read_dir(&self.root)
            .map(|mut d| d.next().is_none())
            .unwrap_or(true)
    }
}

impl Drop for SandboxDir {
    fn drop(&mut self) {
        if let Err(e) = self.cleanup() {
            log::warn!("could not remove {}: {e}", self.root.display());
        }
    }
}

/// Files the trace layer may write next to a sandbox.
pub fn sibling_artifacts(sandbox: &Path) -> Vec<PathBuf> {
    vec![sandbox.with_extension("shim.py")]
}

fn remove_quiet(p: &Path) -> io::Result<()> {
    match std::fs::remove_file(p) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
        _ => Ok(()),
    }
}
