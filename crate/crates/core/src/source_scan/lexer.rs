//! Line-oriented tokenizer state machine.
//!
//! Tracks just enough of Python's lexical structure to find statement
//! boundaries: string literals (including triple-quoted regions spanning
//! lines), comments, bracket depth, and backslash continuations. Every
//! physical line gets two byte-aligned views of itself: `code` with comments
//! blanked, and `masked` with string contents blanked as well.

const TAB_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct OpenString {
    quote: u8,
    triple: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct PhysLine {
    /// Line starts inside a bracket, string, or after a backslash.
    pub cont: bool,
    /// Line starts inside a multi-line string literal.
    pub starts_in_string: bool,
    /// Comment-only or whitespace-only line (never true for continuations).
    pub blank: bool,
    /// Indent in columns with tabs expanded to 8.
    pub indent: usize,
    /// Indent in columns with tabs counted as 1; used to detect ambiguous mixes.
    pub alt_indent: usize,
    /// Logical line continues onto the next physical line.
    pub continues: bool,
    pub code: String,
    pub masked: String,
}

/// A logical line: one statement header or simple statement, possibly
/// spanning several physical lines.
#[derive(Debug, Clone)]
pub(crate) struct LogicalLine {
    /// 1-based first physical line.
    pub start: usize,
    /// 1-based last physical line.
    pub end: usize,
    pub indent: usize,
    pub alt_indent: usize,
    /// Physical lines joined with `\n`, comments and string contents blanked.
    pub masked: String,
}

pub(crate) fn lex_lines<S: AsRef<str>>(lines: &[S]) -> Vec<PhysLine> {
    let mut out = Vec::with_capacity(lines.len());
    let mut depth: usize = 0;
    let mut open: Option<OpenString> = None;
    let mut backslash = false;

    for line in lines {
        let line = line.as_ref();
        let bytes = line.as_bytes();
        let cont = depth > 0 || open.is_some() || backslash;
        let starts_in_string = open.is_some();
        backslash = false;

        let (indent, alt_indent, indent_bytes) = measure_indent(bytes);
        let mut code = bytes.to_vec();
        let mut masked = bytes.to_vec();

        let mut i = if cont { 0 } else { indent_bytes };
        while i < bytes.len() {
            if let Some(s) = open {
                let c = bytes[i];
                if c == b'\\' {
                    masked[i] = b' ';
                    if i + 1 < bytes.len() {
                        masked[i + 1] = b' ';
                    }
                    i += 2;
                    continue;
                }
                if c == s.quote {
                    if s.triple {
                        if bytes[i..].starts_with(&[c, c, c]) {
                            open = None;
                            i += 3;
                            continue;
                        }
                    } else {
                        open = None;
                        i += 1;
                        continue;
                    }
                }
                masked[i] = b' ';
                i += 1;
                continue;
            }

            match bytes[i] {
                b'#' => {
                    for j in i..bytes.len() {
                        code[j] = b' ';
                        masked[j] = b' ';
                    }
                    break;
                }
                q @ (b'\'' | b'"') => {
                    let triple = bytes[i..].starts_with(&[q, q, q]);
                    open = Some(OpenString { quote: q, triple });
                    i += if triple { 3 } else { 1 };
                }
                b'(' | b'[' | b'{' => {
                    depth += 1;
                    i += 1;
                }
                b')' | b']' | b'}' => {
                    depth = depth.saturating_sub(1);
                    i += 1;
                }
                b'\\' => {
                    if bytes[i + 1..].iter().all(|b| *b == b'\r') {
                        backslash = true;
                    }
                    i += 1;
                }
                _ => i += 1,
            }
        }

        // An escaped newline inside a single-quoted string keeps it open;
        // any other unterminated single-quoted string is a lexical error
        // that we close at end of line.
        if let Some(s) = open {
            if !s.triple && !ends_with_escape(bytes) {
                open = None;
            }
        }

        let rest = &bytes[indent_bytes.min(bytes.len())..];
        let blank = !cont
            && rest
                .iter()
                .find(|b| !matches!(b, b' ' | b'\t' | b'\r' | b'\x0c'))
                .is_none_or(|b| *b == b'#');

        out.push(PhysLine {
            cont,
            starts_in_string,
            blank,
            indent,
            alt_indent,
            continues: depth > 0 || open.is_some() || backslash,
            // Only ASCII bytes were overwritten with ASCII spaces, and whole
            // multi-byte sequences are blanked together inside strings and
            // comments, so the result is still valid UTF-8.
            code: String::from_utf8(code).unwrap_or_else(|e| lossy_spaces(e.into_bytes())),
            masked: String::from_utf8(masked).unwrap_or_else(|e| lossy_spaces(e.into_bytes())),
        });
    }
    out
}

fn lossy_spaces(mut bytes: Vec<u8>) -> String {
    for b in bytes.iter_mut() {
        if *b >= 0x80 {
            *b = b' ';
        }
    }
    String::from_utf8(bytes).expect("ascii")
}

fn ends_with_escape(bytes: &[u8]) -> bool {
    let trimmed = match bytes.last() {
        Some(b'\r') => &bytes[..bytes.len() - 1],
        _ => bytes,
    };
    let run = trimmed.iter().rev().take_while(|b| **b == b'\\').count();
    run % 2 == 1
}

fn measure_indent(bytes: &[u8]) -> (usize, usize, usize) {
    let mut col = 0;
    let mut alt = 0;
    let mut n = 0;
    for &b in bytes {
        match b {
            b' ' => {
                col += 1;
                alt += 1;
            }
            b'\t' => {
                col = (col / TAB_SIZE + 1) * TAB_SIZE;
                alt += 1;
            }
            b'\x0c' => {
                col = 0;
                alt = 0;
            }
            _ => break,
        }
        n += 1;
    }
    (col, alt, n)
}

/// Group physical lines into logical lines, dropping blank/comment lines.
pub(crate) fn logical_lines(phys: &[PhysLine]) -> Vec<LogicalLine> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < phys.len() {
        let p = &phys[i];
        if p.cont || p.blank {
            i += 1;
            continue;
        }
        let start = i;
        let mut end = i;
        while phys[end].continues && end + 1 < phys.len() {
            end += 1;
        }
        let masked = phys[start..=end]
            .iter()
            .map(|l| l.masked.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        out.push(LogicalLine {
            start: start + 1,
            end: end + 1,
            indent: p.indent,
            alt_indent: p.alt_indent,
            masked,
        });
        i = end + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(src: &str) -> Vec<PhysLine> {
        let lines: Vec<&str> = src.split('\n').collect();
        lex_lines(&lines)
    }

    #[test]
    fn triple_quoted_region_spans_lines() {
        let l = lex("x = \"\"\"\ndef fake():\n\"\"\"\ny = 1");
        assert!(!l[0].cont);
        assert!(l[1].cont && l[1].starts_in_string);
        assert!(l[2].cont && l[2].starts_in_string);
        assert!(!l[3].cont);
        assert_eq!(l[1].masked.trim(), "");
    }

    #[test]
    fn comments_and_strings_are_blanked() {
        let l = lex("a = 'x#y'  # note");
        assert_eq!(l[0].code.trim_end(), "a = 'x#y'");
        assert_eq!(l[0].masked.trim_end(), "a = '   '");
    }

    #[test]
    fn brackets_and_backslashes_continue() {
        let l = lex("f(1,\n2)\nx = 1 + \\\n  2\nz");
        assert!(l[0].continues && l[1].cont && !l[1].continues);
        assert!(l[2].continues && l[3].cont);
        assert!(!l[4].cont);
    }

    #[test]
    fn tabs_expand_to_eight_columns() {
        let l = lex("\tx\n  \ty\n        z");
        assert_eq!((l[0].indent, l[0].alt_indent), (8, 1));
        assert_eq!((l[1].indent, l[1].alt_indent), (8, 3));
        assert_eq!((l[2].indent, l[2].alt_indent), (8, 8));
    }

    #[test]
    fn logical_lines_skip_blank_and_comment_lines() {
        let phys = lex("a = (\n  1)\n\n# c\nb = 2");
        let logical = logical_lines(&phys);
        assert_eq!(logical.len(), 2);
        assert_eq!((logical[0].start, logical[0].end), (1, 2));
        assert_eq!((logical[1].start, logical[1].end), (5, 5));
    }

    #[test]
    fn unterminated_single_quote_closes_at_eol() {
        let l = lex("x = 'abc\ny = 2");
        assert!(!l[1].cont);
    }

    #[test]
    fn escaped_quote_does_not_close() {
        let l = lex(r#"s = "a\"b" # c"#);
        assert_eq!(l[0].code.trim_end(), r#"s = "a\"b""#);
    }
}
