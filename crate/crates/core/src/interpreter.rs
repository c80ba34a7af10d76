//! Locating the Python interpreter that runs sandboxes.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub const INTERPRETER_ENV: &str = "CODE_COMPASS_INTERPRETER";
const DEFAULT_NAMES: &[&str] = &["python3", "python"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("interpreter not found: {0}")]
pub struct InterpreterNotFound(pub String);

/// Resolve an interpreter: the explicit path if given, then the environment
/// override, then `python3`/`python` on `PATH`.
pub fn find_interpreter(explicit: Option<&Path>) -> Result<PathBuf, InterpreterNotFound> {
    if let Some(p) = explicit {
        return resolve_named(p);
    }
    if let Some(p) = std::env::var_os(INTERPRETER_ENV).filter(|v| !v.is_empty()) {
        return resolve_named(Path::new(&p));
    }
    DEFAULT_NAMES
        .iter()
        .find_map(|n| search_path(n))
        .ok_or_else(|| InterpreterNotFound("python3 on PATH".into()))
}

/// Check that `p` names an executable, searching `PATH` for bare names.
pub fn resolve_named(p: &Path) -> Result<PathBuf, InterpreterNotFound> {
    if p.components().count() == 1 && !p.is_absolute() {
        if let Some(found) = p.to_str().and_then(search_path) {
            return Ok(found);
        }
    } else if is_executable(p) {
        return Ok(p.to_path_buf());
    }
    Err(InterpreterNotFound(p.display().to_string()))
}

fn search_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(name))
        .find(|c| is_executable(c))
}

fn is_executable(p: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    std::fs::metadata(p)
        .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}
