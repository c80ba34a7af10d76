//! Canonical literal encoding for task inputs, expected outputs, and locals.
//!
//! Values are the interpreter's literal syntax restricted to numbers,
//! strings, booleans, `None`, lists, and dicts. Tuples parse as lists. The
//! canonical rendering is deterministic: strings always use double quotes
//! and escape everything outside printable ASCII, dict keys are sorted by
//! their own canonical text, and floats follow the interpreter's `repr`.
//! The same rendering is emitted by the generated Python helpers (see
//! [`CANON_PY`]) so both sides agree byte-for-byte.

use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use thiserror::Error;

const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    None,
    Bool(bool),
    Int(BigInt),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    /// Entries sorted by canonical key text, keys unique.
    Map(Vec<(Value, Value)>),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid literal at byte {offset}: {message}")]
pub struct LiteralError {
    pub offset: usize,
    pub message: String,
}

impl Value {
    pub fn parse(text: &str) -> Result<Value, LiteralError> {
        let mut p = Parser {
            src: text.as_bytes(),
            text,
            pos: 0,
        };
        p.skip_ws();
        let v = p.value(0)?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing characters"));
        }
        Ok(v)
    }

    /// Build a map, keeping the last value for duplicate keys.
    pub fn map(entries: impl IntoIterator<Item = (Value, Value)>) -> Value {
        let mut keyed: Vec<(String, Value, Value)> = Vec::new();
        for (k, v) in entries {
            let text = k.to_canonical();
            match keyed.iter_mut().find(|(t, _, _)| *t == text) {
                Some(slot) => slot.2 = v,
                None => keyed.push((text, k, v)),
            }
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        Value::Map(keyed.into_iter().map(|(_, k, v)| (k, v)).collect())
    }

    pub fn int(n: i64) -> Value {
        Value::Int(BigInt::from(n))
    }

    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            Value::None => out.push_str("None"),
            Value::Bool(true) => out.push_str("True"),
            Value::Bool(false) => out.push_str("False"),
            Value::Int(n) => write!(out, "{n}").unwrap(),
            // non-finite floats have no literal form; the interpreter side
            // renders them as marker strings, so do the same here
            Value::Float(f) if !f.is_finite() => quote_into(&format!("<float {}>", float_repr(*f)), out),
            Value::Float(f) => out.push_str(&float_repr(*f)),
            Value::Str(s) => quote_into(s, out),
            Value::List(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write_canonical(out);
                }
                out.push(']');
            }
            Value::Map(entries) => {
                out.push('{');
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    k.write_canonical(out);
                    out.push_str(": ");
                    v.write_canonical(out);
                }
                out.push('}');
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

/// Canonicalize literal text; errors if it is not a supported literal.
pub fn canonicalize(text: &str) -> Result<String, LiteralError> {
    Value::parse(text).map(|v| v.to_canonical())
}

/// Equality under the canonical encoding.
pub fn canonical_eq(a: &str, b: &str) -> bool {
    match (canonicalize(a), canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn quote_into(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            ' '..='~' => out.push(c),
            c if (c as u32) <= 0xff => write!(out, "\\x{:02x}", c as u32).unwrap(),
            c if (c as u32) <= 0xffff => write!(out, "\\u{:04x}", c as u32).unwrap(),
            c => write!(out, "\\U{:08x}", c as u32).unwrap(),
        }
    }
    out.push('"');
}

/// The interpreter's `repr(float)`: shortest round-trip digits, switching
/// to exponent form when the decimal point would sit more than 16 places
/// right or 4 places left of the first digit.
pub fn float_repr(f: f64) -> String {
    if f.is_nan() {
        return "nan".into();
    }
    if f.is_infinite() {
        return if f > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if f == 0.0 {
        return if f.is_sign_negative() {
            "-0.0".into()
        } else {
            "0.0".into()
        };
    }
    // Shortest round-trip digit count, then the correctly rounded decimal of
    // that length; ties between two shortest candidates go to the closer one.
    let shortest = format!("{:e}", f.abs());
    let ndigits = shortest
        .split_once('e')
        .expect("exponent form")
        .0
        .replace('.', "")
        .len();
    let sci = format!("{:.*e}", ndigits - 1, f.abs());
    let sci = if sci.parse::<f64>() == Ok(f.abs()) {
        sci
    } else {
        shortest
    };
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let decpt = exp + 1;
    let sign = if f < 0.0 { "-" } else { "" };
    let n = digits.len() as i32;

    let body = if !(-3..=16).contains(&decpt) {
        let (head, tail) = digits.split_at(1);
        let frac = if tail.is_empty() {
            String::new()
        } else {
            format!(".{tail}")
        };
        let e = decpt - 1;
        format!("{head}{frac}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
    } else if decpt <= 0 {
        format!("0.{}{}", "0".repeat((-decpt) as usize), digits)
    } else if decpt >= n {
        format!("{}{}.0", digits, "0".repeat((decpt - n) as usize))
    } else {
        let (a, b) = digits.split_at(decpt as usize);
        format!("{a}.{b}")
    };
    format!("{sign}{body}")
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> LiteralError {
        LiteralError {
            offset: self.pos,
            message: message.to_owned(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(b' ' | b'\t' | b'\n' | b'\r') = self.peek() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn value(&mut self, depth: usize) -> Result<Value, LiteralError> {
        if depth > MAX_DEPTH {
            return Err(self.err("nesting too deep"));
        }
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'[') => {
                self.pos += 1;
                let (items, _) = self.sequence(b']', depth)?;
                Ok(Value::List(items))
            }
            Some(b'(') => {
                self.pos += 1;
                let (mut items, trailing_comma) = self.sequence(b')', depth)?;
                if items.len() == 1 && !trailing_comma {
                    Ok(items.pop().unwrap())
                } else {
                    Ok(Value::List(items))
                }
            }
            Some(b'{') => {
                self.pos += 1;
                self.dict(depth)
            }
            Some(b'\'' | b'"') => self.string(false).map(Value::Str),
            Some(b'-' | b'+' | b'.' | b'0'..=b'9') => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.word(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn sequence(&mut self, close: u8, depth: usize) -> Result<(Vec<Value>, bool), LiteralError> {
        let mut items = Vec::new();
        let mut trailing_comma = false;
        loop {
            self.skip_ws();
            if self.eat(close) {
                return Ok((items, trailing_comma));
            }
            items.push(self.value(depth + 1)?);
            self.skip_ws();
            if self.eat(b',') {
                trailing_comma = true;
                continue;
            }
            trailing_comma = false;
            self.skip_ws();
            if self.eat(close) {
                return Ok((items, trailing_comma));
            }
            return Err(self.err("expected `,` or closing bracket"));
        }
    }

    fn dict(&mut self, depth: usize) -> Result<Value, LiteralError> {
        let mut entries = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(b'}') {
                return Ok(Value::map(entries));
            }
            let key = self.value(depth + 1)?;
            if matches!(key, Value::List(_) | Value::Map(_)) {
                return Err(self.err("unhashable dict key"));
            }
            self.skip_ws();
            if !self.eat(b':') {
                return Err(self.err("expected `:` in dict (sets are not supported)"));
            }
            self.skip_ws();
            let value = self.value(depth + 1)?;
            entries.push((key, value));
            self.skip_ws();
            if self.eat(b',') {
                continue;
            }
            if self.eat(b'}') {
                return Ok(Value::map(entries));
            }
            return Err(self.err("expected `,` or `}`"));
        }
    }

    fn word(&mut self) -> Result<Value, LiteralError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let word = &self.text[start..self.pos];
        match word {
            "None" => Ok(Value::None),
            "True" => Ok(Value::Bool(true)),
            "False" => Ok(Value::Bool(false)),
            _ => {
                let lower = word.to_ascii_lowercase();
                if matches!(lower.as_str(), "r" | "u") && matches!(self.peek(), Some(b'\'' | b'"')) {
                    return self.string(lower == "r").map(Value::Str);
                }
                self.pos = start;
                Err(self.err("unsupported name"))
            }
        }
    }

    fn number(&mut self) -> Result<Value, LiteralError> {
        let start = self.pos;
        let negative = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                true
            }
            Some(b'+') => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        self.skip_ws();
        if let Some(b'-' | b'+') = self.peek() {
            // Python accepts stacked unary signs; fold them.
            let inner = self.number()?;
            return Ok(match (negative, inner) {
                (true, Value::Int(n)) => Value::Int(-n),
                (true, Value::Float(f)) => Value::Float(-f),
                (_, v) => v,
            });
        }
        let digits_start = self.pos;
        if self.src[self.pos..].len() >= 2
            && self.src[self.pos] == b'0'
            && matches!(self.src[self.pos + 1], b'x' | b'X' | b'o' | b'O' | b'b' | b'B')
        {
            let radix = match self.src[self.pos + 1].to_ascii_lowercase() {
                b'x' => 16,
                b'o' => 8,
                _ => 2,
            };
            self.pos += 2;
            let s = self.pos;
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == b'_' {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            let body: String = self.text[s..self.pos].chars().filter(|c| *c != '_').collect();
            let n =
                BigInt::parse_bytes(body.as_bytes(), radix).ok_or_else(|| self.err("bad integer literal"))?;
            return Ok(Value::Int(if negative { -n } else { n }));
        }

        let mut is_float = false;
        while let Some(c) = self.peek() {
            match c {
                b'0'..=b'9' | b'_' => self.pos += 1,
                b'.' => {
                    is_float = true;
                    self.pos += 1;
                }
                b'e' | b'E' => {
                    is_float = true;
                    self.pos += 1;
                    if let Some(b'+' | b'-') = self.peek() {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        let raw = &self.text[digits_start..self.pos];
        if raw.is_empty() || raw.starts_with('_') || raw.ends_with('_') || raw.contains("__") {
            self.pos = start;
            return Err(self.err("bad number"));
        }
        let clean: String = raw.chars().filter(|c| *c != '_').collect();
        if is_float {
            let f: f64 = clean.parse().map_err(|_| self.err("bad float literal"))?;
            Ok(Value::Float(if negative { -f } else { f }))
        } else {
            if clean.len() > 1 && clean.starts_with('0') && clean.bytes().any(|b| b != b'0') {
                return Err(self.err("leading zeros in integer"));
            }
            let n: BigInt = clean.parse().map_err(|_| self.err("bad integer literal"))?;
            Ok(Value::Int(if negative { -n } else { n }))
        }
    }

    fn string(&mut self, raw: bool) -> Result<String, LiteralError> {
        let quote = self.peek().ok_or_else(|| self.err("expected string"))?;
        let triple = self.src[self.pos..].starts_with(&[quote, quote, quote]);
        self.pos += if triple { 3 } else { 1 };
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.err("unterminated string"));
            };
            if c == quote {
                if !triple {
                    self.pos += 1;
                    return Ok(out);
                }
                if self.src[self.pos..].starts_with(&[quote, quote, quote]) {
                    self.pos += 3;
                    return Ok(out);
                }
            }
            if c == b'\n' && !triple {
                return Err(self.err("newline in string"));
            }
            if c == b'\\' {
                if raw {
                    out.push('\\');
                    self.pos += 1;
                    if let Some(n) = self.next_char() {
                        out.push(n);
                    }
                    continue;
                }
                self.pos += 1;
                self.escape(&mut out)?;
                continue;
            }
            let ch = self.next_char().expect("peeked");
            out.push(ch);
        }
    }

    fn next_char(&mut self) -> Option<char> {
        let ch = self.text[self.pos..].chars().next()?;
        self.pos += ch.len_utf8();
        Some(ch)
    }

    fn hex(&mut self, n: usize) -> Result<char, LiteralError> {
        let s = self
            .text
            .get(self.pos..self.pos + n)
            .ok_or_else(|| self.err("truncated escape"))?;
        let code = u32::from_str_radix(s, 16).map_err(|_| self.err("bad hex escape"))?;
        self.pos += n;
        char::from_u32(code).ok_or_else(|| self.err("escape is not a scalar value"))
    }

    fn escape(&mut self, out: &mut String) -> Result<(), LiteralError> {
        let Some(c) = self.peek() else {
            return Err(self.err("unterminated escape"));
        };
        self.pos += 1;
        match c {
            b'\n' => {}
            b'\\' => out.push('\\'),
            b'\'' => out.push('\''),
            b'"' => out.push('"'),
            b'a' => out.push('\x07'),
            b'b' => out.push('\x08'),
            b'f' => out.push('\x0c'),
            b'n' => out.push('\n'),
            b'r' => out.push('\r'),
            b't' => out.push('\t'),
            b'v' => out.push('\x0b'),
            b'x' => out.push(self.hex(2)?),
            b'u' => out.push(self.hex(4)?),
            b'U' => out.push(self.hex(8)?),
            b'0'..=b'7' => {
                let mut code = u32::from(c - b'0');
                for _ in 0..2 {
                    match self.peek() {
                        Some(d @ b'0'..=b'7') => {
                            code = code * 8 + u32::from(d - b'0');
                            self.pos += 1;
                        }
                        _ => break,
                    }
                }
                out.push(char::from_u32(code).expect("octal escape below 0x200"));
            }
            _ => {
                // unknown escapes keep the backslash
                self.pos -= 1;
                out.push('\\');
            }
        }
        Ok(())
    }
}

/// Python source of the canonical renderer. `limit` bounds container length
/// and nesting for locals snapshots; results are rendered unbounded.
pub const CANON_PY: &str = r#"def __compass_canon(v, limit=None, depth=0):
    def q(s):
        out = ['"']
        for ch in s:
            o = ord(ch)
            if ch == '\\':
                out.append('\\\\')
            elif ch == '"':
                out.append('\\"')
            elif ch == '\n':
                out.append('\\n')
            elif ch == '\r':
                out.append('\\r')
            elif ch == '\t':
                out.append('\\t')
            elif 32 <= o <= 126:
                out.append(ch)
            elif o <= 0xff:
                out.append('\\x%02x' % o)
            elif o <= 0xffff:
                out.append('\\u%04x' % o)
            else:
                out.append('\\U%08x' % o)
        out.append('"')
        return ''.join(out)
    max_items, max_depth = limit if limit else (None, 100)
    if v is None:
        return 'None'
    if v is True:
        return 'True'
    if v is False:
        return 'False'
    if type(v) is int:
        return str(v)
    if type(v) is float:
        if v != v or v in (float('inf'), float('-inf')):
            return q('<float %r>' % v)
        return repr(v)
    if type(v) is str:
        return q(v)
    if type(v) in (list, tuple, dict):
        if depth >= max_depth:
            return q('<%s>' % type(v).__name__)
        if type(v) is dict:
            items = [(__compass_canon(k, limit, depth + 1), __compass_canon(x, limit, depth + 1)) for k, x in v.items()]
            items.sort()
            if max_items is not None and len(items) > max_items:
                items = items[:max_items] + [(q('...'), q('...'))]
            return '{' + ', '.join(k + ': ' + x for k, x in items) + '}'
        seq = list(v)
        more = max_items is not None and len(seq) > max_items
        if more:
            seq = seq[:max_items]
        parts = [__compass_canon(x, limit, depth + 1) for x in seq]
        if more:
            parts.append(q('...'))
        return '[' + ', '.join(parts) + ']'
    return q('<%s>' % type(v).__name__)
"#;
