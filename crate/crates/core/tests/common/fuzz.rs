//! Seeded random command sequences against the fixture workspace.

use std::path::{Path, PathBuf};
use std::time::Duration;

use code_compass::session::Session;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::session::{candidates, Fixture};
use super::trace::group_gone;

#[derive(Debug, Default)]
pub struct RunReport {
    pub seed: u64,
    pub commands: Vec<String>,
    pub hash_unchanged: bool,
    pub temp_empty: bool,
    pub orphans: Vec<u32>,
    pub crashes: usize,
    pub timeouts: usize,
    pub external_edits: usize,
}

impl RunReport {
    pub fn ok(&self) -> bool {
        self.hash_unchanged && self.temp_empty && self.orphans.is_empty()
    }
}

const GUIDES: &[&str] = &[
    "line_total",
    "wait_for",
    "normalize",
    "normalize.clean",
    "shout",
    "uses_missing",
    "median",
    "running_max",
    "histogram",
    "first_negative",
    "mean",
];

fn random_candidate(rng: &mut ChaCha8Rng, s: &Session) -> String {
    let function = s.state().function.unwrap_or_default();
    let dir = super::corpus("tasks").join(&function);
    match rng.gen_range(0..4) {
        0 if !function.is_empty() && dir.is_dir() => candidates(&function).choose(rng).unwrap().1.clone(),
        1 => "def broken(:\n".to_owned(),
        2 => format!(
            "def {}(*a):\n    raise RuntimeError('x')\n",
            function.rsplit('.').next().unwrap()
        ),
        _ => s.state().task.map(|t| t.working_text).unwrap_or_default(),
    }
}

/// One random sequence ending in exit; checks the revert invariant.
pub fn run_sequence(py: &Path, seed: u64, timeout: Duration) -> RunReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fx = Fixture::new();
    let mut s = fx.session(py, timeout);
    let mut report = RunReport {
        seed,
        ..Default::default()
    };
    let mut pids = Vec::new();
    let len = rng.gen_range(3..14);
    for _ in 0..len {
        let label = match rng.gen_range(0..100) {
            0..=14 => {
                let g = GUIDES.choose(&mut rng).unwrap();
                let _ = s.start(g);
                format!("start {g}")
            }
            15..=39 => {
                if s.advance() == Err(code_compass::session::Rejection::StepTimeout) {
                    report.timeouts += 1;
                }
                "advance".into()
            }
            40..=47 => {
                let _ = s.jump_into();
                "jump_into".into()
            }
            48..=53 => {
                let _ = s.step_back();
                "step_back".into()
            }
            54..=63 => {
                let i = rng.gen_range(0..2);
                let confirm = rng.gen_bool(0.5);
                let _ = s.open_task(i, confirm);
                format!("open_task {i} {confirm}")
            }
            64..=69 => {
                let _ = s.edit(&format!("# draft {}\n", rng.gen::<u16>()));
                "edit".into()
            }
            70..=79 => {
                let c = random_candidate(&mut rng, &s);
                let _ = s.submit(&c);
                "submit".into()
            }
            80..=87 => {
                if s.inject_crash() {
                    report.crashes += 1;
                }
                "crash".into()
            }
            88..=93 => {
                let files: Vec<PathBuf> = s.revert_files().map(Path::to_path_buf).collect();
                if let Some(f) = files.choose(&mut rng) {
                    std::fs::write(fx.root().join(f), format!("# edited {seed}\n")).unwrap();
                    report.external_edits += 1;
                }
                "external_edit".into()
            }
            _ => {
                let _ = s.state();
                "state".into()
            }
        };
        pids.extend(s.trace_pids());
        report.commands.push(label);
        s.drain_notifications();
    }
    s.exit();
    report.commands.push("exit".into());
    drop(s);
    pids.sort_unstable();
    pids.dedup();
    report.orphans = pids.into_iter().filter(|&p| !group_gone(p)).collect();
    report.hash_unchanged = fx.unchanged();
    report.temp_empty = fx.temp_empty();
    report
}

/// `count` sequences from consecutive seeds, spread over worker threads.
pub fn run_many(py: &Path, first_seed: u64, count: u64, workers: u64, timeout: Duration) -> Vec<RunReport> {
    let mut reports: Vec<RunReport> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    (first_seed..first_seed + count)
                        .filter(|seed| seed % workers == w)
                        .map(|seed| run_sequence(py, seed, timeout))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    reports.sort_by_key(|r| r.seed);
    reports
}
