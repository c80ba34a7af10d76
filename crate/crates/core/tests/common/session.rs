//! Fixture workspace and session construction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use code_compass::config::{read_config, WalkthroughConfig};
use code_compass::session::{Session, SessionOptions};

pub struct Fixture {
    pub workspace: tempfile::TempDir,
    pub temp: tempfile::TempDir,
    pub hash: String,
}

impl Fixture {
    pub fn new() -> Self {
        let workspace = super::copy_tree(&super::corpus("workspace"));
        let hash = super::tree_hash(workspace.path());
        Self {
            workspace,
            temp: tempfile::tempdir().unwrap(),
            hash,
        }
    }

    pub fn root(&self) -> &Path {
        self.workspace.path()
    }

    pub fn config(&self) -> WalkthroughConfig {
        read_config(&self.root().join("compass.json")).unwrap()
    }

    pub fn session(&self, py: &Path, timeout: Duration) -> Session {
        let mut opts = SessionOptions::new(self.root(), py);
        opts.trace.step_timeout = timeout;
        opts.temp_base = Some(self.temp.path().to_owned());
        Session::new(self.config(), opts)
    }

    pub fn unchanged(&self) -> bool {
        super::tree_hash(self.root()) == self.hash
    }

    /// True when no session directory is left under the temp base.
    pub fn temp_empty(&self) -> bool {
        std::fs::read_dir(self.temp.path()).unwrap().next().is_none()
    }
}

pub fn task_dir(guide: &str) -> PathBuf {
    super::corpus("tasks").join(guide)
}

/// Candidate files for a task guide, sorted by name.
pub fn candidates(guide: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(task_dir(guide))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let name = e.file_name().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub type Verdicts = BTreeMap<String, BTreeMap<String, Vec<bool>>>;

pub fn frozen_verdicts() -> Verdicts {
    let text = std::fs::read_to_string(super::corpus("task_verdicts.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Per-case verdicts from re-executing every candidate directly.
pub fn oracle_verdicts(py: &Path) -> Verdicts {
    let out = Command::new(py)
        .arg(super::manifest_dir().join("tests/oracle/task_oracle.py"))
        .arg(super::corpus("workspace/compass.json"))
        .arg(super::corpus("tasks"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}
