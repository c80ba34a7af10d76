//! Lexical discovery of Python function spans and module-level imports.
//!
//! No grammar is involved. Definitions are found by matching `def` headers
//! on logical lines. A body runs from the first code line after the header
//! up to (excluding) the first code line whose indentation is not greater
//! than the header's. Blank and comment-only lines never end a body, and a
//! trailing run of them is not part of it.
//!
//! Tabs count as eight columns. When a line compares differently against
//! the header under tab widths of 8 and 1 (the interpreter's own ambiguity
//! test) it is treated as ending the body and a [`ScanWarning::MixedIndent`]
//! is recorded.
//!
//! Constructs that are rejected with a diagnostic instead of a span:
//! lambdas, definitions nested in any block other than `def`/`class`
//! (e.g. under a module-level `if`), and one-line `def f(): return x`
//! bodies. Text inside triple-quoted strings is never mistaken for code.

mod doc;
pub(crate) mod lexer;
mod signature;

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use doc::{LineRange, NewlineStyle, SourceDoc};
pub use signature::{Param, ParamKind};

use lexer::{LogicalLine, PhysLine};

static DEF_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(async\s+)?def\s+([^\W\d]\w*)").unwrap());
static CLASS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*class\s+([^\W\d]\w*)").unwrap());
static IMPORT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(import|from)\s").unwrap());
static LAMBDA_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\blambda\b").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpan {
    pub name: String,
    /// Dotted path through enclosing defs and classes, e.g. `Client.send`.
    pub qualname: String,
    pub header_line: usize,
    /// Last line of the header; differs from `header_line` for signatures
    /// that continue across lines.
    pub header_end: usize,
    pub body_range: LineRange,
    pub indent: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decorators: Option<LineRange>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_async: bool,
}

impl FunctionSpan {
    /// Decorators (if any) through the end of the body.
    pub fn full_range(&self) -> LineRange {
        let start = self.decorators.map_or(self.header_line, |d| d.start);
        LineRange::new(start, self.body_range.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportStmt {
    pub line_range: LineRange,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construct {
    Lambda,
    ConditionalDef,
    InlineBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanWarning {
    Unsupported { line: usize, construct: Construct },
    MixedIndent { line: usize },
    MissingBody { line: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScanError {
    #[error("line {0} does not start a function definition")]
    NotAFunctionHeader(usize),
    #[error("function at line {0} has its body on the header line")]
    InlineBody(usize),
    #[error("cannot split signature at line {line}: {reason}")]
    UnsupportedSignature { line: usize, reason: String },
}

/// Everything the scanner found in one document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub functions: Vec<FunctionSpan>,
    pub imports: Vec<ImportStmt>,
    pub warnings: Vec<ScanWarning>,
}

pub fn scan(doc: &SourceDoc) -> ScanReport {
    Scanner::new(doc).report()
}

pub fn scan_functions(doc: &SourceDoc) -> Vec<FunctionSpan> {
    Scanner::new(doc).report().functions
}

pub fn get_imports(doc: &SourceDoc) -> Vec<ImportStmt> {
    Scanner::new(doc).imports()
}

pub fn fn_range(doc: &SourceDoc, header_line: usize) -> Result<LineRange, ScanError> {
    Scanner::new(doc).fn_range(header_line)
}

pub fn signature_params(doc: &SourceDoc, span: &FunctionSpan) -> Result<Vec<Param>, ScanError> {
    let header = doc.slice(LineRange::new(span.header_line, span.header_end));
    let phys = lexer::lex_lines(&doc.lines[span.header_line - 1..span.header_end]);
    let code = phys
        .iter()
        .map(|l| l.code.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    let masked = phys
        .iter()
        .map(|l| l.masked.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    debug_assert_eq!(header.len(), code.len());
    signature::split_params(&code, &masked).map_err(|reason| ScanError::UnsupportedSignature {
        line: span.header_line,
        reason,
    })
}

/// The innermost span whose header-to-body range contains `line`.
pub fn function_at(spans: &[FunctionSpan], line: usize) -> Option<&FunctionSpan> {
    spans
        .iter()
        .filter(|s| s.full_range().contains(line))
        .max_by_key(|s| s.header_line)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Def,
    Class,
    Other,
}

struct Block {
    indent: usize,
    alt_indent: usize,
    kind: BlockKind,
    name: String,
}

struct HeaderShape {
    name: String,
    is_async: bool,
    inline_body: bool,
}

struct Scanner<'a> {
    doc: &'a SourceDoc,
    logical: Vec<LogicalLine>,
}

impl<'a> Scanner<'a> {
    fn new(doc: &'a SourceDoc) -> Self {
        let phys: Vec<PhysLine> = lexer::lex_lines(&doc.lines);
        Scanner {
            doc,
            logical: lexer::logical_lines(&phys),
        }
    }

    fn imports(&self) -> Vec<ImportStmt> {
        self.logical
            .iter()
            .filter(|l| l.indent == 0 && l.alt_indent == 0 && IMPORT_RE.is_match(&l.masked))
            .map(|l| {
                let line_range = LineRange::new(l.start, l.end);
                ImportStmt {
                    line_range,
                    text: self.doc.slice(line_range),
                }
            })
            .collect()
    }

    fn fn_range(&self, header_line: usize) -> Result<LineRange, ScanError> {
        let idx = self
            .logical
            .iter()
            .position(|l| l.start == header_line)
            .ok_or(ScanError::NotAFunctionHeader(header_line))?;
        let shape = header_shape(&self.logical[idx]).ok_or(ScanError::NotAFunctionHeader(header_line))?;
        if shape.inline_body {
            return Err(ScanError::InlineBody(header_line));
        }
        self.body_after(idx)
            .0
            .ok_or(ScanError::NotAFunctionHeader(header_line))
    }

    /// Body range for the header at logical index `idx`, plus the line of an
    /// ambiguous mixed-indent comparison that ended it, if any.
    fn body_after(&self, idx: usize) -> (Option<LineRange>, Option<usize>) {
        let header = &self.logical[idx];
        let mut range: Option<LineRange> = None;
        for line in &self.logical[idx + 1..] {
            match dedents(line, header.indent, header.alt_indent) {
                Dedent::No => {
                    range = Some(match range {
                        None => LineRange::new(line.start, line.end),
                        Some(r) => LineRange::new(r.start, line.end),
                    });
                }
                Dedent::Yes => return (range, None),
                Dedent::Ambiguous => return (range, Some(line.start)),
            }
        }
        (range, None)
    }

    fn report(&self) -> ScanReport {
        let mut functions = Vec::new();
        let mut warnings = Vec::new();
        let mut stack: Vec<Block> = Vec::new();
        let mut decorators: Option<(LineRange, usize)> = None;

        for (idx, line) in self.logical.iter().enumerate() {
            while let Some(top) = stack.last() {
                match dedents(line, top.indent, top.alt_indent) {
                    Dedent::No => break,
                    Dedent::Yes | Dedent::Ambiguous => {
                        stack.pop();
                    }
                }
            }

            if LAMBDA_RE.is_match(&line.masked) {
                warnings.push(ScanWarning::Unsupported {
                    line: line.start,
                    construct: Construct::Lambda,
                });
            }

            let trimmed = line.masked.trim_start();
            if trimmed.starts_with('@') {
                decorators = Some(match decorators {
                    Some((r, indent)) if indent == line.indent => (LineRange::new(r.start, line.end), indent),
                    _ => (LineRange::new(line.start, line.end), line.indent),
                });
                continue;
            }
            let pending_decorators = decorators
                .take()
                .filter(|(_, indent)| *indent == line.indent)
                .map(|(r, _)| r);

            if let Some(shape) = header_shape(line) {
                let parent_kind = stack.last().map(|b| b.kind);
                let qualname = qualify(&stack, &shape.name);
                let supported = matches!(parent_kind, None | Some(BlockKind::Def | BlockKind::Class));
                stack.push(Block {
                    indent: line.indent,
                    alt_indent: line.alt_indent,
                    kind: if supported {
                        BlockKind::Def
                    } else {
                        BlockKind::Other
                    },
                    name: shape.name.clone(),
                });
                if !supported {
                    warnings.push(ScanWarning::Unsupported {
                        line: line.start,
                        construct: Construct::ConditionalDef,
                    });
                    continue;
                }
                if shape.inline_body {
                    stack.pop();
                    warnings.push(ScanWarning::Unsupported {
                        line: line.start,
                        construct: Construct::InlineBody,
                    });
                    continue;
                }
                let (body, ambiguous) = self.body_after(idx);
                if let Some(at) = ambiguous {
                    warnings.push(ScanWarning::MixedIndent { line: at });
                }
                match body {
                    Some(body_range) => functions.push(FunctionSpan {
                        name: shape.name,
                        qualname,
                        header_line: line.start,
                        header_end: line.end,
                        body_range,
                        indent: line.indent,
                        decorators: pending_decorators,
                        is_async: shape.is_async,
                    }),
                    None if ambiguous.is_none() => {
                        warnings.push(ScanWarning::MissingBody { line: line.start })
                    }
                    None => {}
                }
                continue;
            }

            if let Some(caps) = CLASS_RE.captures(&line.masked) {
                if ends_block(&line.masked) {
                    stack.push(Block {
                        indent: line.indent,
                        alt_indent: line.alt_indent,
                        kind: BlockKind::Class,
                        name: caps[1].to_owned(),
                    });
                }
                continue;
            }

            if ends_block(&line.masked) {
                stack.push(Block {
                    indent: line.indent,
                    alt_indent: line.alt_indent,
                    kind: BlockKind::Other,
                    name: String::new(),
                });
            }
        }

        warnings.sort_by_key(warning_line);
        warnings.dedup();
        ScanReport {
            functions,
            imports: self.imports(),
            warnings,
        }
    }
}

fn warning_line(w: &ScanWarning) -> usize {
    match w {
        ScanWarning::Unsupported { line, .. }
        | ScanWarning::MixedIndent { line }
        | ScanWarning::MissingBody { line } => *line,
    }
}

fn qualify(stack: &[Block], name: &str) -> String {
    let mut parts: Vec<&str> = stack
        .iter()
        .filter(|b| b.kind != BlockKind::Other)
        .map(|b| b.name.as_str())
        .collect();
    parts.push(name);
    parts.join(".")
}

enum Dedent {
    No,
    Yes,
    Ambiguous,
}

fn dedents(line: &LogicalLine, indent: usize, alt_indent: usize) -> Dedent {
    let by_tab8 = line.indent.cmp(&indent);
    let by_tab1 = line.alt_indent.cmp(&alt_indent);
    if by_tab8 != by_tab1 {
        Dedent::Ambiguous
    } else if by_tab8 == std::cmp::Ordering::Greater {
        Dedent::No
    } else {
        Dedent::Yes
    }
}

/// Logical line ends with a `:` opening an indented block.
fn ends_block(masked: &str) -> bool {
    masked.trim_end().ends_with(':')
}

fn header_shape(line: &LogicalLine) -> Option<HeaderShape> {
    let caps = DEF_RE.captures(&line.masked)?;
    let name = caps[2].to_owned();
    let is_async = caps.get(1).is_some();
    let after_name = caps.get(0).unwrap().end();
    let bytes = line.masked.as_bytes();

    // Walk brackets from the name to the colon that closes the header.
    let mut depth = 0usize;
    let mut colon = None;
    for (i, &b) in bytes.iter().enumerate().skip(after_name) {
        match b {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth = depth.saturating_sub(1),
            b':' if depth == 0 => {
                colon = Some(i);
                break;
            }
            _ => {}
        }
    }
    let colon = colon?;
    let inline_body = !line.masked[colon + 1..].trim().is_empty();
    Some(HeaderShape {
        name,
        is_async,
        inline_body,
    })
}
