//! Batch execution of a materialized sandbox.

use std::io::{self, Read};
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::RESULT_PREFIX;

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    /// Canonical text from the `##RESULT##` line, if one was printed.
    pub result: Option<String>,
    pub stdout: String,
    pub stderr: String,
    pub exit_code: Option<i32>,
    pub timed_out: bool,
}

impl RunOutcome {
    /// Last line of the traceback, or the last stderr line.
    pub fn error_text(&self) -> Option<String> {
        if self.timed_out {
            return Some("timed out".into());
        }
        self.stderr
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .map(|l| l.trim().to_owned())
    }
}

pub fn result_line(stdout: &str) -> Option<String> {
    stdout
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix(RESULT_PREFIX))
        .map(|s| s.trim_end_matches('\r').to_owned())
}

pub(crate) fn base_command(interpreter: &Path, cwd: &Path) -> Command {
    let mut cmd = Command::new(interpreter);
    cmd.current_dir(cwd)
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .env("PYTHONIOENCODING", "utf-8")
        .env("PYTHONUNBUFFERED", "1")
        .process_group(0);
    cmd
}

/// Kill the child's whole process group and reap it.
pub(crate) fn kill_group(child: &mut Child) {
    let pid = child.id() as libc::pid_t;
    // SAFETY: plain syscall on a pid we spawned into its own group.
    unsafe {
        libc::kill(-pid, libc::SIGKILL);
    }
    let _ = child.kill();
    let _ = child.wait();
}

fn drain<R: Read + Send + 'static>(r: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut r) = r {
            let _ = r.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Run `python sandbox` to completion or until `timeout` elapses.
pub fn execute(interpreter: &Path, sandbox: &Path, timeout: Duration) -> io::Result<RunOutcome> {
    let cwd = sandbox.parent().unwrap_or(Path::new("."));
    let mut child = base_command(interpreter, cwd)
        .arg(sandbox)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());
    let deadline = Instant::now() + timeout;
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if Instant::now() >= deadline {
            timed_out = true;
            kill_group(&mut child);
            break None;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    Ok(RunOutcome {
        result: if timed_out { None } else { result_line(&stdout) },
        stdout,
        stderr,
        exit_code: status.and_then(|s| s.code()),
        timed_out,
    })
}
