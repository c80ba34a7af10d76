use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use code_compass::config::{
    check_against_source, read_config, stamp_fingerprints, write_config, WalkthroughConfig, CONFIG_FILE_NAME,
};
use code_compass::interpreter::{find_interpreter, INTERPRETER_ENV};
use code_compass::server::Server;
use code_compass::session::{Notification, Session, SessionOptions, ValidationResult};
use code_compass::source_scan::{scan, LineRange, SourceDoc};

#[derive(Parser)]
#[command(name = "code-compass", version, about = "Guided walkthroughs of Python code")]
struct Cli {
    /// Walkthrough configuration [default: <workspace>/compass.json]
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Workspace root [default: current directory]
    #[arg(long, global = true, value_name = "PATH")]
    workspace: Option<PathBuf>,
    /// Per-step and per-case time limit
    #[arg(long, global = true, value_name = "SECONDS", default_value_t = 10.0)]
    timeout: f64,
    /// Python interpreter [env: CODE_COMPASS_INTERPRETER, then python3 on PATH]
    #[arg(long, global = true, value_name = "PATH")]
    interpreter: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the functions and imports found in a Python file
    Scan {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Check the configuration against the workspace sources (exit 1 on drift)
    Check {
        #[arg(long)]
        json: bool,
    },
    /// Record body fingerprints for every guide in the configuration
    Stamp,
    /// Replay a command script against a walkthrough and print the events
    Walk {
        function: String,
        #[arg(long, value_name = "FILE")]
        script: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Validate an answer file against a task (exit 1 if any case fails)
    Validate {
        function: String,
        answer: PathBuf,
        #[arg(long, default_value_t = 0)]
        task: usize,
        #[arg(long)]
        json: bool,
    },
    /// Speak the framed protocol on stdin/stdout
    Serve,
}

/// Exit status for usage and environment errors.
const FAILURE: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(FAILURE)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    cli.timeout()?;
    match &cli.command {
        Command::Scan { path, json } => cmd_scan(path, *json),
        Command::Check { json } => cmd_check(&cli, *json),
        Command::Stamp => cmd_stamp(&cli),
        Command::Walk {
            function,
            script,
            json,
        } => cmd_walk(&cli, function, script, *json),
        Command::Validate {
            function,
            answer,
            task,
            json,
        } => cmd_validate(&cli, function, answer, *task, *json),
        Command::Serve => cmd_serve(&cli),
    }
}

impl Cli {
    fn workspace(&self) -> Result<PathBuf> {
        let ws = match &self.workspace {
            Some(p) => p.clone(),
            None => std::env::current_dir()?,
        };
        ws.canonicalize()
            .with_context(|| format!("workspace {}", ws.display()))
    }

    fn config_path(&self) -> Result<PathBuf> {
        Ok(match &self.config {
            Some(p) => p.clone(),
            None => self.workspace()?.join(CONFIG_FILE_NAME),
        })
    }

    fn load_config(&self) -> Result<WalkthroughConfig> {
        let path = self.config_path()?;
        let cfg = read_config(&path).with_context(|| format!("loading {}", path.display()))?;
        for key in cfg.unknown_keys() {
            log::warn!("{}: unknown top-level key `{key}`", path.display());
        }
        Ok(cfg)
    }

    fn timeout(&self) -> Result<Duration> {
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            bail!("--timeout must be a positive number of seconds");
        }
        Ok(Duration::from_secs_f64(self.timeout))
    }

    fn session(&self) -> Result<Session> {
        let cfg = self.load_config()?;
        let interpreter = match find_interpreter(self.interpreter.as_deref()) {
            Ok(p) => p,
            Err(e) => {
                // sessions report the missing interpreter when they need it
                log::warn!("{e} (set --interpreter or {INTERPRETER_ENV})");
                self.interpreter
                    .clone()
                    .or_else(|| std::env::var_os(INTERPRETER_ENV).map(PathBuf::from))
                    .unwrap_or_else(|| "python3".into())
            }
        };
        let mut opts = SessionOptions::new(self.workspace()?, interpreter);
        opts.trace.step_timeout = self.timeout()?;
        Ok(Session::new(cfg, opts))
    }
}

fn cmd_scan(path: &Path, json: bool) -> Result<u8> {
    let doc = SourceDoc::read(path).with_context(|| format!("reading {}", path.display()))?;
    let report = scan(&doc);
    let mut out = io::stdout().lock();
    if json {
        serde_json::to_writer_pretty(&mut out, &report)?;
        writeln!(out)?;
        return Ok(0);
    }
    for imp in &report.imports {
        writeln!(
            out,
            "import {}  {}",
            range(imp.line_range),
            imp.text.lines().next().unwrap_or("")
        )?;
    }
    for f in &report.functions {
        let deco = f
            .decorators
            .map(|d| format!(" decorators {}", range(d)))
            .unwrap_or_default();
        writeln!(
            out,
            "def {}  header {}  body {}  indent {}{deco}",
            f.qualname,
            f.header_line,
            range(f.body_range),
            f.indent
        )?;
    }
    for w in &report.warnings {
        writeln!(out, "warning {}", serde_json::to_string(w)?)?;
    }
    Ok(0)
}

fn range(r: LineRange) -> String {
    if r.start == r.end {
        r.start.to_string()
    } else {
        format!("{}-{}", r.start, r.end)
    }
}

fn cmd_check(cli: &Cli, json: bool) -> Result<u8> {
    let cfg = cli.load_config()?;
    let findings = check_against_source(&cfg, &cli.workspace()?);
    let mut out = io::stdout().lock();
    if json {
        serde_json::to_writer_pretty(&mut out, &findings)?;
        writeln!(out)?;
    } else if findings.is_empty() {
        writeln!(out, "ok: {} guides match the sources", cfg.guides.len())?;
    } else {
        for f in &findings {
            writeln!(out, "{f}")?;
        }
    }
    Ok(u8::from(!findings.is_empty()))
}

fn cmd_stamp(cli: &Cli) -> Result<u8> {
    let cfg = cli.load_config()?;
    let stamped = stamp_fingerprints(&cfg, &cli.workspace()?);
    write_config(&stamped, &cli.config_path()?)?;
    Ok(0)
}

fn cmd_validate(cli: &Cli, function: &str, answer: &Path, task: usize, json: bool) -> Result<u8> {
    let text = std::fs::read_to_string(answer).with_context(|| format!("reading {}", answer.display()))?;
    let mut session = cli.session()?;
    session.start(function)?;
    session.open_task(task, true)?;
    let result = session.submit(&text);
    session.exit();
    let result = result?;
    let mut out = io::stdout().lock();
    if json {
        serde_json::to_writer_pretty(&mut out, &result)?;
        writeln!(out)?;
    } else {
        print_validation(&mut out, &result)?;
    }
    Ok(u8::from(!result.passed))
}

fn print_validation(out: &mut impl Write, r: &ValidationResult) -> io::Result<()> {
    for (i, c) in r.per_case.iter().enumerate() {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        let got = match (&c.actual, &c.error) {
            (Some(a), _) => format!("got {a}"),
            (None, Some(e)) => format!("raised {e}"),
            (None, None) => "no result".into(),
        };
        writeln!(
            out,
            "case {i} {verdict}: ({}) expected {}, {got}",
            c.input.join(", "),
            c.expected
        )?;
    }
    writeln!(out, "{}", r.message)
}

fn print_notification(out: &mut impl Write, n: &Notification) -> io::Result<()> {
    match n {
        Notification::Focus {
            function,
            file,
            line,
            depth,
            summary,
            note,
            live,
            locals,
        } => {
            let mode = if *live { "live" } else { "static" };
            writeln!(
                out,
                "focus {}:{line} {function} depth {depth} {mode}",
                file.display()
            )?;
            if let Some(s) = summary {
                writeln!(out, "  summary: {s}")?;
            }
            if let Some(n) = note {
                writeln!(out, "  note: {n}")?;
            }
            for (k, v) in locals {
                writeln!(out, "  {k} = {v}")?;
            }
        }
        Notification::Dim { file, ranges } => {
            let ranges: Vec<String> = ranges.iter().map(|r| range(*r)).collect();
            writeln!(out, "dim {} {}", file.display(), ranges.join(", "))?;
        }
        Notification::TaskOffer { function, tasks } => {
            writeln!(out, "task offer {function}: {} task(s)", tasks.len())?;
            for t in tasks {
                writeln!(out, "  [{}] {:?}: {}", t.index, t.kind, t.prompt)?;
            }
        }
        Notification::TaskOpened {
            function,
            index,
            prompt,
            template,
            ..
        } => {
            writeln!(out, "task opened {function} [{index}]: {prompt}")?;
            for l in template.lines() {
                writeln!(out, "  | {l}")?;
            }
        }
        Notification::Notice { message } => writeln!(out, "notice: {message}")?,
        Notification::Exit { restored } => {
            let names: Vec<String> = restored.iter().map(|p| p.display().to_string()).collect();
            writeln!(out, "exit restored [{}]", names.join(", "))?;
        }
    }
    Ok(())
}

/// One line of a walk script.
#[derive(Debug, PartialEq)]
enum ScriptCmd {
    Advance,
    JumpInto,
    StepBack,
    OpenTask { index: usize, confirm: bool },
    Edit(PathBuf),
    Submit(PathBuf),
    State,
    Exit,
}

fn parse_script(text: &str, base: &Path) -> Result<Vec<ScriptCmd>> {
    let mut steps = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let file = |w: Option<&&str>| -> Result<PathBuf> {
            match w {
                Some(p) => Ok(base.join(p)),
                None => bail!("line {}: missing file argument", n + 1),
            }
        };
        let step = match words[0] {
            "advance" | "continue" => ScriptCmd::Advance,
            "jump_into" | "jump" => ScriptCmd::JumpInto,
            "step_back" | "back" => ScriptCmd::StepBack,
            "open_task" => {
                let index = match words.get(1) {
                    Some(w) => w
                        .parse()
                        .with_context(|| format!("line {}: bad task index", n + 1))?,
                    None => 0,
                };
                let confirm = words.get(2) == Some(&"confirm");
                ScriptCmd::OpenTask { index, confirm }
            }
            "edit" => ScriptCmd::Edit(file(words.get(1))?),
            "submit" | "validate" => ScriptCmd::Submit(file(words.get(1))?),
            "state" => ScriptCmd::State,
            "exit" => ScriptCmd::Exit,
            other => bail!("line {}: unknown command `{other}`", n + 1),
        };
        steps.push(step);
    }
    Ok(steps)
}

fn cmd_walk(cli: &Cli, function: &str, script: &Path, json: bool) -> Result<u8> {
    let text = std::fs::read_to_string(script).with_context(|| format!("reading {}", script.display()))?;
    let base = script.parent().unwrap_or(Path::new("."));
    let steps = parse_script(&text, base)?;
    let mut session = cli.session()?;
    let mut out = BufWriter::new(io::stdout().lock());
    let mut rejected = false;

    let emit = |out: &mut BufWriter<_>, s: &mut Session| -> io::Result<()> {
        for n in s.drain_notifications() {
            if json {
                writeln!(out, "{}", serde_json::to_string(&n)?)?;
            } else {
                print_notification(out, &n)?;
            }
        }
        Ok(())
    };
    let report = |out: &mut BufWriter<_>, label: &str, e: &dyn std::fmt::Display| -> io::Result<()> {
        if json {
            writeln!(
                out,
                "{}",
                serde_json::json!({"type": "rejected", "command": label, "message": e.to_string()})
            )
        } else {
            writeln!(out, "rejected {label}: {e}")
        }
    };

    if let Err(e) = session.start(function) {
        emit(&mut out, &mut session)?;
        report(&mut out, "start", &e)?;
        out.flush()?;
        return Ok(1);
    }
    emit(&mut out, &mut session)?;
    let mut exited = false;
    for step in steps {
        if exited {
            bail!("commands after exit");
        }
        if !json {
            writeln!(out, "> {}", step_label(&step))?;
        }
        let outcome: Result<(), String> = match &step {
            ScriptCmd::Advance => session.advance().map(drop).map_err(|e| e.to_string()),
            ScriptCmd::JumpInto => session.jump_into().map(drop).map_err(|e| e.to_string()),
            ScriptCmd::StepBack => session.step_back().map(drop).map_err(|e| e.to_string()),
            ScriptCmd::OpenTask { index, confirm } => session
                .open_task(*index, *confirm)
                .map(drop)
                .map_err(|e| e.to_string()),
            ScriptCmd::Edit(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                session.edit(&text).map(drop).map_err(|e| e.to_string())
            }
            ScriptCmd::Submit(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                match session.submit(&text) {
                    Ok(r) => {
                        emit(&mut out, &mut session)?;
                        if json {
                            writeln!(out, "{}", serde_json::json!({"type": "validation", "result": r}))?;
                        } else {
                            print_validation(&mut out, &r)?;
                        }
                        Ok(())
                    }
                    Err(e) => Err(e.to_string()),
                }
            }
            ScriptCmd::State => {
                let st = session.state();
                writeln!(out, "{}", serde_json::to_string(&st)?)?;
                Ok(())
            }
            ScriptCmd::Exit => {
                session.exit();
                exited = true;
                Ok(())
            }
        };
        emit(&mut out, &mut session)?;
        if let Err(e) = outcome {
            rejected = true;
            report(&mut out, step_label(&step), &e)?;
        }
    }
    if !exited {
        session.exit();
        emit(&mut out, &mut session)?;
    }
    out.flush()?;
    Ok(u8::from(rejected))
}

fn step_label(s: &ScriptCmd) -> &'static str {
    match s {
        ScriptCmd::Advance => "advance",
        ScriptCmd::JumpInto => "jump_into",
        ScriptCmd::StepBack => "step_back",
        ScriptCmd::OpenTask { .. } => "open_task",
        ScriptCmd::Edit(_) => "edit",
        ScriptCmd::Submit(_) => "submit",
        ScriptCmd::State => "state",
        ScriptCmd::Exit => "exit",
    }
}

fn cmd_serve(cli: &Cli) -> Result<u8> {
    let session = cli.session()?;
    log::info!("serving {}", session.options().workspace.display());
    let mut server = Server::new(session);
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    server.serve(stdin, stdout).context("protocol stream")?;
    Ok(0)
}
