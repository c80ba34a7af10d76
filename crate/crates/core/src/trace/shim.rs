//! The generated Python runner that executes a sandbox under `sys.settrace`.
//!
//! It is written next to the sandbox and invoked as
//! `python <shim> <json config>`, so sandbox line numbers stay untouched.

use serde::Serialize;

use crate::value::CANON_PY;

/// Prefix marking shim messages on stderr when the fd transport is off.
pub const STDERR_MAGIC: &str = "\u{1}##COMPASS-TRACE## ";

pub const MAX_ITEMS: usize = 32;
pub const MAX_DEPTH: usize = 3;

#[derive(Debug, Clone, Serialize)]
pub struct ShimConfig {
    pub path: String,
    pub focus: [usize; 2],
    /// Lines at or past this one (the renderer and entry point) never pause.
    pub hide_from: usize,
    pub max_items: usize,
    pub max_depth: usize,
    /// Present only for the stderr transport.
    pub magic: Option<String>,
}

const BODY: &str = r###"
def __compass_shim():
    cfg = json.loads(sys.argv[1])
    path = cfg["path"]
    focus_lo, focus_hi = cfg["focus"]
    hide_from = cfg["hide_from"]
    limit = (cfg["max_items"], cfg["max_depth"])
    magic = cfg.get("magic")
    if magic is None:
        ev = os.fdopen(3, "w", encoding="utf-8")
        cmd = os.fdopen(4, "r", encoding="utf-8")

        def send(msg):
            ev.write(json.dumps(msg) + "\n")
            ev.flush()
    else:
        err = sys.__stderr__
        cmd = sys.stdin
        sys.stdin = open(os.devnull)

        def send(msg):
            err.write(magic + json.dumps(msg) + "\n")
            err.flush()

    def canon(v):
        try:
            return __compass_canon(v, limit)
        except Exception:
            return '"<%s>"' % type(v).__name__

    def locals_of(frame):
        if frame.f_code.co_name == "<module>":
            return {}
        out = {}
        for k, v in list(frame.f_locals.items())[:limit[0]]:
            out[k] = canon(v)
        return out

    state = {"mode": "focus", "frame": None, "until": None}

    def stop():
        sys.settrace(None)
        try:
            sys.stdout.flush()
        except Exception:
            pass
        send({"t": "exit", "code": 0})
        os._exit(0)

    def pause(frame, line):
        send({"t": "line", "line": line, "func": frame.f_code.co_name, "locals": locals_of(frame)})
        raw = cmd.readline()
        if not raw:
            os._exit(2)
        try:
            c = json.loads(raw)
        except ValueError:
            os._exit(3)
        op = c.get("c")
        if op == "step_into":
            state.update(mode="into", frame=None, until=None)
        elif op == "step_over":
            state.update(mode="over", frame=frame, until=None)
        elif op == "continue":
            state.update(mode="focus", frame=None, until=c.get("line"))
        elif op == "quit":
            stop()
        else:
            os._exit(3)

    def should_pause(frame, line):
        if line >= hide_from:
            return False
        mode = state["mode"]
        if mode == "into":
            return True
        if mode == "over":
            return frame is state["frame"]
        if state["until"] is not None:
            return line == state["until"]
        return focus_lo <= line <= focus_hi

    def local_trace(frame, event, arg):
        if event == "line":
            if should_pause(frame, frame.f_lineno):
                pause(frame, frame.f_lineno)
        elif event == "return":
            if frame.f_code.co_name != "<module>":
                send({"t": "return", "line": frame.f_lineno, "func": frame.f_code.co_name, "v": canon(arg)})
            if state["mode"] == "over" and frame is state["frame"]:
                state.update(mode="into", frame=None)
        return local_trace

    def global_trace(frame, event, arg):
        co = frame.f_code
        if event == "call" and co.co_filename == path and co.co_firstlineno < hide_from:
            if co.co_name != "<module>":
                send({"t": "call", "line": frame.f_lineno, "func": co.co_name})
            return local_trace
        return None

    class Tee:
        def __init__(self, inner):
            self.inner = inner
            self.buf = ""

        def write(self, s):
            self.buf += s
            while "\n" in self.buf:
                line, self.buf = self.buf.split("\n", 1)
                if line.startswith("##RESULT## "):
                    send({"t": "result", "v": line[len("##RESULT## "):]})
            return self.inner.write(s)

        def __getattr__(self, name):
            return getattr(self.inner, name)

    sys.stdout = Tee(sys.stdout)
    sys.argv = [path]
    sys.path[0] = os.path.dirname(path)
    send({"t": "ready", "v": 1})
    code = 0
    try:
        with open(path, encoding="utf-8") as fh:
            src = fh.read()
        compiled = compile(src, path, "exec")
        globs = {"__name__": "__main__", "__file__": path, "__builtins__": __builtins__}
        sys.settrace(global_trace)
        try:
            exec(compiled, globs)
        finally:
            sys.settrace(None)
    except SystemExit as e:
        c = e.code
        if c is None:
            code = 0
        elif isinstance(c, int):
            code = c
        else:
            sys.stderr.write("%s\n" % (c,))
            code = 1
    except BaseException as e:
        tb = e.__traceback__
        while tb is not None and tb.tb_frame.f_code.co_filename != path:
            tb = tb.tb_next
        sys.stderr.write("".join(traceback.format_exception(type(e), e, tb)))
        only = "".join(traceback.format_exception_only(type(e), e)).strip().splitlines()
        send({"t": "error", "text": only[-1] if only else type(e).__name__})
        code = 1
    try:
        sys.stdout.flush()
        sys.stderr.flush()
    except Exception:
        pass
    send({"t": "exit", "code": code})
    os._exit(code)


__compass_shim()
"###;

/// Full shim source.
pub fn shim_source() -> String {
    let mut s = String::from("import json\nimport os\nimport sys\nimport traceback\n\n");
    s.push_str(CANON_PY.trim_end());
    s.push('\n');
    s.push_str(BODY);
    s
}
