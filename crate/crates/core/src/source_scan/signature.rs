use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    PositionalOnly,
    Regular,
    VarArgs,
    KeywordOnly,
    KwArgs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    /// Default expression, verbatim and unevaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

impl Param {
    pub fn is_variadic(&self) -> bool {
        matches!(self.kind, ParamKind::VarArgs | ParamKind::KwArgs)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_alphanumeric())
}

fn matching_close(masked: &[u8], open_at: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, &b) in masked.iter().enumerate().skip(open_at) {
        match b {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Top-level byte offset of `needle` in `masked[from..to]`, ignoring nested
/// brackets.
fn top_level_find(masked: &[u8], from: usize, to: usize, needle: u8) -> Option<usize> {
    let mut depth = 0usize;
    for (i, &b) in masked.iter().enumerate().take(to).skip(from) {
        match b {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth = depth.saturating_sub(1),
            b if b == needle && depth == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

/// Split the parameter list of a `def` header. `code` is the header text
/// with comments blanked and `masked` the same with string contents blanked;
/// both are byte-aligned.
pub(crate) fn split_params(code: &str, masked: &str) -> Result<Vec<Param>, String> {
    let mb = masked.as_bytes();
    let def_at = masked.find("def").ok_or("no `def` keyword")?;
    let mut i = def_at + 3;
    while i < mb.len() && mb[i].is_ascii_whitespace() {
        i += 1;
    }
    while i < mb.len() && !matches!(mb[i], b'(' | b'[') && !mb[i].is_ascii_whitespace() {
        i += 1;
    }
    while i < mb.len() && mb[i].is_ascii_whitespace() {
        i += 1;
    }
    if i < mb.len() && mb[i] == b'[' {
        i = matching_close(mb, i).ok_or("unbalanced type parameter list")? + 1;
        while i < mb.len() && mb[i].is_ascii_whitespace() {
            i += 1;
        }
    }
    if i >= mb.len() || mb[i] != b'(' {
        return Err("missing parameter list".into());
    }
    let open = i;
    let close = matching_close(mb, open).ok_or("unbalanced parameter list")?;

    let mut pieces = Vec::new();
    let mut start = open + 1;
    loop {
        match top_level_find(mb, start, close, b',') {
            Some(comma) => {
                pieces.push((start, comma));
                start = comma + 1;
            }
            None => {
                pieces.push((start, close));
                break;
            }
        }
    }

    let mut params: Vec<Param> = Vec::new();
    let mut keyword_only = false;
    for (from, to) in pieces {
        let text = code[from..to].trim();
        if text.is_empty() {
            continue;
        }
        if text == "/" {
            if params.is_empty() {
                return Err("`/` before any parameter".into());
            }
            for p in params.iter_mut() {
                if p.kind == ParamKind::Regular {
                    p.kind = ParamKind::PositionalOnly;
                }
            }
            continue;
        }
        if text == "*" {
            keyword_only = true;
            continue;
        }

        let lead = from + (code[from..to].len() - code[from..to].trim_start().len());
        let (kind, name_from) = if text.starts_with("**") {
            (ParamKind::KwArgs, lead + 2)
        } else if text.starts_with('*') {
            keyword_only = true;
            (ParamKind::VarArgs, lead + 1)
        } else if keyword_only {
            (ParamKind::KeywordOnly, lead)
        } else {
            (ParamKind::Regular, lead)
        };

        let eq = top_level_find(mb, name_from, to, b'=');
        let colon = top_level_find(mb, name_from, eq.unwrap_or(to), b':');
        let name_to = colon.or(eq).unwrap_or(to);
        let name = code[name_from..name_to].trim();
        if !is_identifier(name) {
            return Err(format!("unrecognized parameter `{text}`"));
        }
        if eq.is_some() && kind.is_variadic() {
            return Err(format!("variadic parameter `{name}` with a default"));
        }
        let annotation = colon.map(|c| code[c + 1..eq.unwrap_or(to)].trim().to_owned());
        let default = eq.map(|e| code[e + 1..to].trim().to_owned());
        if default.as_deref() == Some("") || annotation.as_deref() == Some("") {
            return Err(format!("incomplete parameter `{text}`"));
        }
        params.push(Param {
            name: name.to_owned(),
            kind,
            default,
            annotation,
        });
    }
    Ok(params)
}

impl ParamKind {
    fn is_variadic(self) -> bool {
        matches!(self, ParamKind::VarArgs | ParamKind::KwArgs)
    }
}
