#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn corpus(rel: &str) -> PathBuf {
    manifest_dir().join("tests/corpus").join(rel)
}

pub fn python() -> Option<PathBuf> {
    let candidate = std::env::var_os("CODE_COMPASS_INTERPRETER")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("python3"));
    Command::new(&candidate)
        .arg("-c")
        .arg("pass")
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|_| candidate)
}

/// Copy a fixture directory into a fresh temp dir.
pub fn copy_tree(from: &Path) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in walkdir::WalkDir::new(from) {
        let entry = entry.unwrap();
        let rel = entry.path().strip_prefix(from).unwrap();
        let dest = dir.path().join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).unwrap();
        } else {
            std::fs::copy(entry.path(), &dest).unwrap();
        }
    }
    dir
}

/// Content hash over every file path and its bytes.
pub fn tree_hash(root: &Path) -> String {
    use sha2::{Digest, Sha256};
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().to_path_buf())
        .collect();
    files.sort();
    let mut hasher = Sha256::new();
    for f in files {
        hasher.update(f.strip_prefix(root).unwrap().to_string_lossy().as_bytes());
        hasher.update([0]);
        hasher.update(std::fs::read(&f).unwrap());
        hasher.update([0]);
    }
    hex::encode(hasher.finalize())
}

pub mod fuzz;
pub mod golden;
pub mod sandbox;
pub mod session;
pub mod trace;
