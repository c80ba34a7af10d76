use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Line terminator detected on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NewlineStyle {
    Lf,
    Crlf,
}

impl NewlineStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            NewlineStyle::Lf => "\n",
            NewlineStyle::Crlf => "\r\n",
        }
    }
}

/// Inclusive, 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineRange {
    pub start: usize,
    pub end: usize,
}

impl LineRange {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "inverted range {start}..{end}");
        LineRange { start, end }
    }

    pub fn single(line: usize) -> Self {
        LineRange {
            start: line,
            end: line,
        }
    }

    pub fn contains(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn contains_range(&self, other: &LineRange) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl std::fmt::Display for LineRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Python source text split into physical lines.
///
/// The split is lossless: [`SourceDoc::to_text`] reproduces the original
/// input. A document whose breaks are all `\r\n` is stored as
/// [`NewlineStyle::Crlf`]; anything else is split on `\n` and any stray `\r`
/// stays in the line text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDoc {
    pub path: PathBuf,
    pub lines: Vec<String>,
    pub newline_style: NewlineStyle,
    pub final_newline: bool,
}

impl SourceDoc {
    pub fn from_text(path: impl Into<PathBuf>, text: &str) -> Self {
        let lf = text.matches('\n').count();
        let crlf = text.matches("\r\n").count();
        let newline_style = if lf > 0 && lf == crlf {
            NewlineStyle::Crlf
        } else {
            NewlineStyle::Lf
        };
        let sep = newline_style.as_str();
        let final_newline = text.ends_with(sep);
        let body = if final_newline {
            &text[..text.len() - sep.len()]
        } else {
            text
        };
        let lines = if text.is_empty() {
            Vec::new()
        } else {
            body.split(sep).map(str::to_owned).collect()
        };
        SourceDoc {
            path: path.into(),
            lines,
            newline_style,
            final_newline,
        }
    }

    pub fn from_bytes(path: impl Into<PathBuf>, bytes: &[u8]) -> Result<Self, std::str::Utf8Error> {
        let text = std::str::from_utf8(bytes)?;
        Ok(Self::from_text(path, text))
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(path, &bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn to_text(&self) -> String {
        let sep = self.newline_style.as_str();
        let mut out = self.lines.join(sep);
        if self.final_newline {
            out.push_str(sep);
        }
        out
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    /// 1-based line accessor.
    pub fn line(&self, line: usize) -> Option<&str> {
        line.checked_sub(1)
            .and_then(|i| self.lines.get(i))
            .map(String::as_str)
    }

    /// Lines of `range` joined with `\n`.
    pub fn slice(&self, range: LineRange) -> String {
        let end = range.end.min(self.lines.len());
        if range.start == 0 || range.start > end {
            return String::new();
        }
        self.lines[range.start - 1..end].join("\n")
    }
}
