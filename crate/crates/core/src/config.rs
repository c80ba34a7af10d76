//! `compass.json`: the authored walkthrough configuration.
//!
//! A guide is keyed by the function's qualified name and holds a summary,
//! per-line notes addressed by offset from the first body line, and practice
//! tasks whose inputs and expected outputs are stored as canonical literals.
//! See `docs/compass-json.md` for the schema.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::source_scan::{self, FunctionSpan, LineRange, SourceDoc};
use crate::value::Value;

pub const CONFIG_FILE_NAME: &str = "compass.json";
pub const SUPPORTED_VERSIONS: &[&str] = &["1"];
/// Marks a blank to fill in a `fill_blank` template.
pub const HOLE_MARKER: &str = "___";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkthroughConfig {
    pub version: String,
    #[serde(default)]
    pub files: Vec<FileEntry>,
    #[serde(deserialize_with = "unique_guides")]
    pub guides: BTreeMap<String, FunctionGuide>,
    /// Unrecognized top-level keys, kept so a rewrite does not drop them.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub path: PathBuf,
    pub priority: u32,
    #[serde(default)]
    pub blurb: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionGuide {
    /// Qualified function name; filled from the map key.
    #[serde(skip)]
    pub function: String,
    pub file: PathBuf,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<LineNote>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_link: Option<String>,
    /// Hash of the header and body at authoring time; see [`body_fingerprint`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineNote {
    pub offset: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FillBlank,
    ModifyCode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub prompt: String,
    pub kind: TaskKind,
    pub template: String,
    /// One argument tuple per case, each argument a canonical literal.
    pub inputs: Vec<Vec<String>>,
    /// One canonical literal per case.
    pub expected: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config at `{path}`: {message}")]
    Schema { path: String, message: String },
}

impl ConfigError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn unique_guides<'de, D>(de: D) -> Result<BTreeMap<String, FunctionGuide>, D::Error>
where
    D: Deserializer<'de>,
{
    struct Guides;

    impl<'de> Visitor<'de> for Guides {
        type Value = BTreeMap<String, FunctionGuide>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a map from function name to guide")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
            let mut out = BTreeMap::new();
            while let Some(name) = map.next_key::<String>()? {
                let mut guide: FunctionGuide = map.next_value()?;
                if out.contains_key(&name) {
                    return Err(serde::de::Error::custom(format!(
                        "duplicate guide for function `{name}`"
                    )));
                }
                guide.function = name.clone();
                out.insert(name, guide);
            }
            Ok(out)
        }
    }

    de.deserialize_map(Guides)
}

impl WalkthroughConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: WalkthroughConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            match inner.classify() {
                serde_json::error::Category::Data => ConfigError::schema(path, inner.to_string()),
                _ => ConfigError::Syntax {
                    line: inner.line(),
                    column: inner.column(),
                    message: inner.to_string(),
                },
            }
        })?;
        cfg.validate()?;
        for key in cfg.extra.keys() {
            log::warn!("unknown top-level config key `{key}` preserved");
        }
        Ok(cfg)
    }

    /// Canonical serialization: pretty JSON, two-space indent, LF, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("config serializes");
        out.push('\n');
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !SUPPORTED_VERSIONS.contains(&self.version.as_str()) {
            return Err(ConfigError::schema(
                "version",
                format!("unsupported version `{}`", self.version),
            ));
        }
        let mut ranks = HashSet::new();
        for (i, f) in self.files.iter().enumerate() {
            if f.priority == 0 {
                return Err(ConfigError::schema(
                    format!("files[{i}].priority"),
                    "priority must be a positive integer",
                ));
            }
            if !ranks.insert(f.priority) {
                return Err(ConfigError::schema(
                    format!("files[{i}].priority"),
                    format!("duplicate priority {}", f.priority),
                ));
            }
        }
        for (name, guide) in &self.guides {
            guide.validate(&format!("guides.{name}"))?;
        }
        Ok(())
    }

    pub fn unknown_keys(&self) -> impl Iterator<Item = &str> {
        self.extra.keys().map(String::as_str)
    }

    pub fn guide(&self, function: &str) -> Option<&FunctionGuide> {
        self.guides.get(function)
    }

    /// Guides whose unqualified name is `name`, e.g. for resolving a call site.
    pub fn guides_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a FunctionGuide> {
        self.guides
            .values()
            .filter(move |g| g.function.rsplit('.').next() == Some(name))
    }
}

impl FunctionGuide {
    fn validate(&self, at: &str) -> Result<(), ConfigError> {
        for (i, pair) in self.lines.windows(2).enumerate() {
            if pair[1].offset <= pair[0].offset {
                return Err(ConfigError::schema(
                    format!("{at}.lines[{}].offset", i + 1),
                    format!(
                        "offsets must be strictly increasing ({} after {})",
                        pair[1].offset, pair[0].offset
                    ),
                ));
            }
        }
        for (t, task) in self.tasks.iter().enumerate() {
            let here = format!("{at}.tasks[{t}]");
            if task.inputs.is_empty() {
                return Err(ConfigError::schema(
                    format!("{here}.inputs"),
                    "at least one case is required",
                ));
            }
            if task.inputs.len() != task.expected.len() {
                return Err(ConfigError::schema(
                    format!("{here}.expected"),
                    format!(
                        "{} expected values for {} input tuples",
                        task.expected.len(),
                        task.inputs.len()
                    ),
                ));
            }
            for (c, args) in task.inputs.iter().enumerate() {
                for (a, arg) in args.iter().enumerate() {
                    Value::parse(arg).map_err(|e| {
                        ConfigError::schema(format!("{here}.inputs[{c}][{a}]"), e.to_string())
                    })?;
                }
            }
            for (c, exp) in task.expected.iter().enumerate() {
                Value::parse(exp)
                    .map_err(|e| ConfigError::schema(format!("{here}.expected[{c}]"), e.to_string()))?;
            }
            if task.kind == TaskKind::FillBlank && !task.template.contains(HOLE_MARKER) {
                return Err(ConfigError::schema(
                    format!("{here}.template"),
                    format!("fill_blank template has no `{HOLE_MARKER}` marker"),
                ));
            }
        }
        Ok(())
    }

    /// Map note offsets onto absolute lines of `span`.
    pub fn resolve(&self, span: &FunctionSpan) -> Result<ResolvedGuide, ResolveError> {
        let body_len = span.body_range.len();
        let mut notes = Vec::with_capacity(self.lines.len());
        for note in &self.lines {
            if note.offset >= body_len {
                return Err(ResolveError::OffsetOutOfRange {
                    function: self.function.clone(),
                    offset: note.offset,
                    body_len,
                });
            }
            notes.push(ResolvedNote {
                line: span.body_range.start + note.offset,
                offset: note.offset,
                text: note.text.clone(),
            });
        }
        Ok(ResolvedGuide {
            function: self.function.clone(),
            file: self.file.clone(),
            summary: self.summary.clone(),
            doc_link: self.doc_link.clone(),
            span: span.clone(),
            notes,
        })
    }
}

pub fn read_config(path: &Path) -> Result<WalkthroughConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    WalkthroughConfig::parse(&text)
}

pub fn write_config(cfg: &WalkthroughConfig, path: &Path) -> Result<(), ConfigError> {
    std::fs::write(path, cfg.to_canonical_json()).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedNote {
    pub line: usize,
    pub offset: usize,
    pub text: String,
}

/// A guide bound to a concrete span: notes carry absolute line numbers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedGuide {
    pub function: String,
    pub file: PathBuf,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_link: Option<String>,
    pub span: FunctionSpan,
    pub notes: Vec<ResolvedNote>,
}

impl ResolvedGuide {
    pub fn note_at(&self, line: usize) -> Option<&ResolvedNote> {
        self.notes.iter().find(|n| n.line == line)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResolveError {
    #[error("no guide for function `{0}`")]
    NoGuide(String),
    #[error("note offset {offset} of `{function}` is past its {body_len}-line body")]
    OffsetOutOfRange {
        function: String,
        offset: usize,
        body_len: usize,
    },
}

pub fn resolve_guide(cfg: &WalkthroughConfig, span: &FunctionSpan) -> Result<ResolvedGuide, ResolveError> {
    cfg.guide(&span.qualname)
        .ok_or_else(|| ResolveError::NoGuide(span.qualname.clone()))?
        .resolve(span)
}

/// Short hash of the header and body lines of `span`.
pub fn body_fingerprint(doc: &SourceDoc, span: &FunctionSpan) -> String {
    let text = doc.slice(LineRange::new(span.header_line, span.body_range.end));
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    MissingFile {
        function: String,
        file: PathBuf,
    },
    MissingFunction {
        function: String,
        file: PathBuf,
    },
    OffsetOutOfRange {
        function: String,
        offset: usize,
        body_len: usize,
    },
    BodyChanged {
        function: String,
        recorded: String,
        current: String,
    },
    Unreadable {
        function: String,
        file: PathBuf,
        message: String,
    },
}

impl fmt::Display for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::MissingFile { function, file } => {
                write!(f, "{function}: file {} does not exist", file.display())
            }
            Drift::MissingFunction { function, file } => {
                write!(f, "{function}: not found in {}", file.display())
            }
            Drift::OffsetOutOfRange {
                function,
                offset,
                body_len,
            } => write!(
                f,
                "{function}: note offset {offset} is past the {body_len}-line body"
            ),
            Drift::BodyChanged {
                function,
                recorded,
                current,
            } => write!(
                f,
                "{function}: body changed (fingerprint {recorded} -> {current})"
            ),
            Drift::Unreadable {
                function,
                file,
                message,
            } => write!(f, "{function}: cannot read {}: {message}", file.display()),
        }
    }
}

/// A scanned file, or whether it was missing plus the error text.
type Scanned = Result<(SourceDoc, Vec<FunctionSpan>), (bool, String)>;

/// Scanned files, loaded once per path.
#[derive(Default)]
struct ScanCache {
    files: HashMap<PathBuf, Scanned>,
}

impl ScanCache {
    fn get(&mut self, root: &Path, file: &Path) -> &Scanned {
        self.files.entry(file.to_owned()).or_insert_with(|| {
            let path = root.join(file);
            match std::fs::read(&path) {
                Ok(bytes) => match SourceDoc::from_bytes(&path, &bytes) {
                    Ok(doc) => {
                        let spans = source_scan::scan_functions(&doc);
                        Ok((doc, spans))
                    }
                    Err(e) => Err((false, e.to_string())),
                },
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err((true, e.to_string())),
                Err(e) => Err((false, e.to_string())),
            }
        })
    }
}

/// Compare every guide against the current sources under `root`.
pub fn check_against_source(cfg: &WalkthroughConfig, root: &Path) -> Vec<Drift> {
    let mut cache = ScanCache::default();
    let mut findings = Vec::new();
    for guide in cfg.guides.values() {
        let function = guide.function.clone();
        let (doc, spans) = match cache.get(root, &guide.file) {
            Ok((doc, spans)) => (doc, spans),
            Err((true, _)) => {
                findings.push(Drift::MissingFile {
                    function,
                    file: guide.file.clone(),
                });
                continue;
            }
            Err((false, message)) => {
                findings.push(Drift::Unreadable {
                    function,
                    file: guide.file.clone(),
                    message: message.clone(),
                });
                continue;
            }
        };
        let Some(span) = spans.iter().find(|s| s.qualname == guide.function) else {
            findings.push(Drift::MissingFunction {
                function,
                file: guide.file.clone(),
            });
            continue;
        };
        if let Err(ResolveError::OffsetOutOfRange { offset, body_len, .. }) = guide.resolve(span) {
            findings.push(Drift::OffsetOutOfRange {
                function: function.clone(),
                offset,
                body_len,
            });
        }
        if let Some(recorded) = &guide.fingerprint {
            let current = body_fingerprint(doc, span);
            if *recorded != current {
                findings.push(Drift::BodyChanged {
                    function,
                    recorded: recorded.clone(),
                    current,
                });
            }
        }
    }
    findings
}

/// Record current body fingerprints for every guide whose function is found.
pub fn stamp_fingerprints(cfg: &WalkthroughConfig, root: &Path) -> WalkthroughConfig {
    let mut cache = ScanCache::default();
    let mut out = cfg.clone();
    for guide in out.guides.values_mut() {
        if let Ok((doc, spans)) = cache.get(root, &guide.file) {
            if let Some(span) = spans.iter().find(|s| s.qualname == guide.function) {
                guide.fingerprint = Some(body_fingerprint(doc, span));
            }
        }
    }
    out
}
