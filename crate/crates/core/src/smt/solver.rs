//! SMT-LIB 2 solver front end.
//!
//! Two ways to talk to a solver process over stdin/stdout:
//!
//! * [`Backend::solve`] runs one [`Query`] in a fresh process: the script up
//!   to the check, then values or the unsat core, then `(exit)`.
//! * [`Backend::session`] keeps one process alive for a series of related
//!   checks. Assertions accumulate; checks run under assumption literals,
//!   and temporary constraints live between `push` and `pop`.
//!
//! A check that exceeds the timeout kills the process and reports an
//! unknown answer; a session is closed afterwards.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::emit::{Emitter, ScriptBuilder};
use super::sexpr::{parse_all, parse_value, SExpr};
use super::term::{Sort, Term, Value};

/// Environment variable consulted for the default solver command.
pub const SOLVER_ENV: &str = "CACHEVET_SOLVER";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("cannot start solver `{cmd}`")]
    Spawn { cmd: String, source: std::io::Error },
    #[error("solver i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver reported an error: {0}")]
    Reported(String),
    #[error("unexpected solver output: {0}")]
    Protocol(String),
    #[error("solver session is closed")]
    Closed,
}

/// Satisfying assignment for the declared constants of a query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    values: BTreeMap<String, Value>,
}

impl Model {
    pub fn from_values(values: BTreeMap<String, Value>) -> Model {
        Model { values }
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.values.get(name).copied()
    }

    pub fn bool(&self, name: &str) -> Option<bool> {
        self.get(name).and_then(Value::as_bool)
    }

    pub fn values(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    pub fn eval_bool(&self, t: &Term) -> Option<bool> {
        t.eval_bool(&|n| self.get(n)).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    /// Labels of the named assertions in the core; empty when no labels were given.
    Unsat(Vec<String>),
    Unknown(String),
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolveResult::Unsat(_))
    }
}

/// One satisfiability question. Labeled assertions take part in unsat cores.
#[derive(Debug, Clone, Default)]
pub struct Query {
    pub tag: String,
    pub hard: Vec<Term>,
    pub labeled: Vec<(String, Term)>,
    /// On unsat, shrink the core until every label in it is necessary.
    /// Labels are tried for removal in the order they were added.
    pub minimize_core: bool,
}

impl Query {
    pub fn new(tag: impl Into<String>) -> Query {
        Query { tag: tag.into(), ..Query::default() }
    }

    pub fn assert(&mut self, t: Term) -> &mut Self {
        self.hard.push(t);
        self
    }

    pub fn assert_named(&mut self, label: impl Into<String>, t: Term) -> &mut Self {
        self.labeled.push((label.into(), t));
        self
    }

    pub fn minimized(&mut self) -> &mut Self {
        self.minimize_core = true;
        self
    }

    pub fn script(&self) -> (String, Vec<(String, Sort)>) {
        ScriptBuilder {
            hard: self.hard.clone(),
            labeled: self.labeled.clone(),
            assume: self.minimize_core && !self.labeled.is_empty(),
        }
        .render()
    }
}

/// Answer of a session check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Sat,
    Unsat,
    Unknown(String),
}

/// A long-lived solver context.
pub trait Session {
    /// Asserts every term of `ts` in the current scope.
    fn assert_all(&mut self, ts: &[Term]) -> Result<(), SolverError>;
    /// Asserts `label => t`; `label` can then be passed as an assumption.
    fn assert_labeled(&mut self, label: &str, t: &Term) -> Result<(), SolverError>;
    fn push(&mut self) -> Result<(), SolverError>;
    fn pop(&mut self) -> Result<(), SolverError>;
    /// Checks the assertions together with the given label assumptions.
    fn check(&mut self, assumptions: &[String]) -> Result<Answer, SolverError>;
    /// Values after a sat answer. Names never declared in the session are
    /// left out of the model.
    fn values(&mut self, names: &[String]) -> Result<Model, SolverError>;
    /// Assumption labels of the core after an unsat answer.
    fn core(&mut self) -> Result<Vec<String>, SolverError>;
}

/// Deletion-based core shrinking under assumptions. The labels of `core`
/// are tried for removal in the order of `order`; the labels of `keep` are
/// assumed throughout and never removed. Every other label kept was checked
/// to be necessary, unless the solver gave up part way, in which case the
/// current (still unsatisfiable) core is returned.
pub fn minimize_core(
    s: &mut dyn Session,
    order: &[String],
    core: &[String],
    keep: &[String],
) -> Result<Vec<String>, SolverError> {
    let in_order = |set: &[String]| -> Vec<String> {
        order.iter().filter(|l| set.contains(l) && !keep.contains(l)).cloned().collect()
    };
    let mut core = in_order(core);
    let mut i = 0;
    while i < core.len() {
        let trial: Vec<String> = core
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(_, l)| l.clone())
            .chain(keep.iter().cloned())
            .collect();
        match s.check(&trial)? {
            // labels before `i` are necessary, so they survive in the smaller core
            Answer::Unsat => core = in_order(&s.core()?),
            Answer::Sat => i += 1,
            Answer::Unknown(_) => break,
        }
    }
    Ok(core.into_iter().chain(keep.iter().cloned()).collect())
}

/// Anything that can decide a [`Query`] or host a [`Session`].
pub trait Backend: Send + Sync {
    fn solve(&self, q: &Query) -> Result<SolveResult, SolverError>;

    fn session(&self, tag: &str) -> Result<Box<dyn Session + '_>, SolverError>;

    fn stats(&self) -> SolverStats {
        SolverStats::default()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    /// One-shot queries and session checks alike.
    pub queries: usize,
    pub solver_time: Duration,
}

/// External solver process speaking SMT-LIB 2 on stdin/stdout.
#[derive(Debug)]
pub struct SmtProcess {
    program: String,
    args: Vec<String>,
    timeout: Duration,
    log_dir: Option<PathBuf>,
    files: AtomicUsize,
    queries: AtomicUsize,
    nanos: AtomicU64,
}

impl SmtProcess {
    /// `command` is a program path optionally followed by arguments. A bare
    /// `z3` gets `-in` so that it reads the script from stdin.
    pub fn new(command: &str) -> SmtProcess {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts.next().unwrap_or_else(|| "z3".to_string());
        let mut args: Vec<String> = parts.collect();
        let base =
            std::path::Path::new(&program).file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if args.is_empty() && base.starts_with("z3") {
            args.push("-in".to_string());
        }
        SmtProcess {
            program,
            args,
            timeout: DEFAULT_TIMEOUT,
            log_dir: None,
            files: AtomicUsize::new(0),
            queries: AtomicUsize::new(0),
            nanos: AtomicU64::new(0),
        }
    }

    /// Solver named by [`SOLVER_ENV`], falling back to `z3` on the `PATH`.
    pub fn from_env() -> SmtProcess {
        let cmd = std::env::var(SOLVER_ENV).unwrap_or_else(|_| "z3".to_string());
        SmtProcess::new(&cmd)
    }

    /// Limit for each check.
    pub fn with_timeout(mut self, timeout: Duration) -> SmtProcess {
        self.timeout = timeout;
        self
    }

    /// Writes the transcript of every query to `dir/query-NNNNN-<tag>.smt2`
    /// and of every session to `dir/session-NNNNN-<tag>.smt2`.
    pub fn with_log_dir(mut self, dir: impl Into<PathBuf>) -> SmtProcess {
        self.log_dir = Some(dir.into());
        self
    }

    pub fn command_line(&self) -> String {
        std::iter::once(self.program.clone()).chain(self.args.iter().cloned()).collect::<Vec<_>>().join(" ")
    }

    fn spawn(&self, kind: &str, tag: &str) -> Result<Pipe, SolverError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| SolverError::Spawn { cmd: self.command_line(), source })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel::<String>();
        let reader = std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let log = match &self.log_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let n = self.files.fetch_add(1, Ordering::Relaxed);
                let tag: String = tag
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
                    .collect();
                let name =
                    if tag.is_empty() { format!("{kind}-{n:05}.smt2") } else { format!("{kind}-{n:05}-{tag}.smt2") };
                Some(File::create(dir.join(name))?)
            }
            None => None,
        };
        Ok(Pipe { child: Some(child), stdin: Some(stdin), rx: Some(rx), reader: Some(reader), log })
    }

    fn record(&self, start: Instant) {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.nanos.fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
    }

    fn run(&self, q: &Query, pipe: Pipe) -> Result<SolveResult, SolverError> {
        let (script, vars) = q.script();
        // a session over the script's own declarations, for the follow-up commands
        let mut s = ProcessSession { backend: self, pipe, emitter: Emitter::default() };
        s.pipe.send(&script)?;
        let Some(answer) = s.pipe.read(self.timeout)? else {
            s.pipe.close(true);
            return Ok(SolveResult::Unknown("timeout".into()));
        };
        match parse_answer(&answer)? {
            Answer::Sat => {
                if vars.is_empty() {
                    return Ok(SolveResult::Sat(Model::default()));
                }
                let names: Vec<String> = vars.into_iter().map(|(n, _)| n).collect();
                match s.pipe.values(&names, self.timeout)? {
                    Some(m) => Ok(SolveResult::Sat(m)),
                    None => Ok(SolveResult::Unknown("timeout".into())),
                }
            }
            Answer::Unsat => {
                if q.labeled.is_empty() {
                    return Ok(SolveResult::Unsat(Vec::new()));
                }
                let Some(core) = s.pipe.core(self.timeout)? else {
                    return Ok(SolveResult::Unknown("timeout".into()));
                };
                if !q.minimize_core {
                    return Ok(SolveResult::Unsat(core));
                }
                let order: Vec<String> = q.labeled.iter().map(|(l, _)| l.clone()).collect();
                match minimize_core(&mut s, &order, &core, &[]) {
                    Err(SolverError::Closed) => Ok(SolveResult::Unsat(core)),
                    r => Ok(SolveResult::Unsat(r?)),
                }
            }
            Answer::Unknown(reason) => Ok(SolveResult::Unknown(reason)),
        }
    }
}

impl Backend for SmtProcess {
    fn solve(&self, q: &Query) -> Result<SolveResult, SolverError> {
        let start = Instant::now();
        let pipe = self.spawn("query", &q.tag)?;
        let result = self.run(q, pipe);
        self.record(start);
        result
    }

    fn session(&self, tag: &str) -> Result<Box<dyn Session + '_>, SolverError> {
        let mut pipe = self.spawn("session", tag)?;
        pipe.send(
            "(set-option :global-declarations true)\n(set-option :produce-models true)\n\
             (set-option :produce-unsat-cores true)\n(set-logic ALL)\n",
        )?;
        Ok(Box::new(ProcessSession { backend: self, pipe, emitter: Emitter::default() }))
    }

    fn stats(&self) -> SolverStats {
        SolverStats {
            queries: self.queries.load(Ordering::Relaxed),
            solver_time: Duration::from_nanos(self.nanos.load(Ordering::Relaxed)),
        }
    }
}

fn parse_answer(e: &SExpr) -> Result<Answer, SolverError> {
    match e.atom() {
        Some("sat") => Ok(Answer::Sat),
        Some("unsat") => Ok(Answer::Unsat),
        Some("unknown") => Ok(Answer::Unknown("solver answered unknown".into())),
        _ => Err(SolverError::Protocol(render(e))),
    }
}

struct ProcessSession<'a> {
    backend: &'a SmtProcess,
    pipe: Pipe,
    emitter: Emitter,
}

impl ProcessSession<'_> {
    /// Closes the session when a reply did not arrive in time.
    fn expect<T>(&mut self, r: Option<T>) -> Result<T, SolverError> {
        r.ok_or_else(|| {
            self.pipe.close(true);
            SolverError::Closed
        })
    }
}

impl Session for ProcessSession<'_> {
    fn assert_all(&mut self, ts: &[Term]) -> Result<(), SolverError> {
        let mut out = String::new();
        let texts = self.emitter.prepare(ts, &mut out);
        for (t, text) in ts.iter().zip(texts) {
            if !t.is_true() {
                out.push_str("(assert ");
                out.push_str(&text);
                out.push_str(")\n");
            }
        }
        self.pipe.send(&out)
    }

    fn assert_labeled(&mut self, label: &str, t: &Term) -> Result<(), SolverError> {
        let mut out = String::new();
        self.emitter.declare_bool(label, &mut out);
        let text = self.emitter.prepare(std::slice::from_ref(t), &mut out).pop().unwrap_or_default();
        out.push_str(&format!("(assert (=> {label} {text}))\n"));
        self.pipe.send(&out)
    }

    fn push(&mut self) -> Result<(), SolverError> {
        self.pipe.send("(push 1)\n")
    }

    fn pop(&mut self) -> Result<(), SolverError> {
        self.pipe.send("(pop 1)\n")
    }

    fn check(&mut self, assumptions: &[String]) -> Result<Answer, SolverError> {
        let start = Instant::now();
        let cmd = if assumptions.is_empty() {
            "(check-sat)\n".to_string()
        } else {
            format!("(check-sat-assuming ({}))\n", assumptions.join(" "))
        };
        self.pipe.send(&cmd)?;
        let answer = self.pipe.read(self.backend.timeout);
        self.backend.record(start);
        match answer? {
            Some(a) => parse_answer(&a),
            None => {
                self.pipe.close(true);
                Ok(Answer::Unknown("timeout".into()))
            }
        }
    }

    fn values(&mut self, names: &[String]) -> Result<Model, SolverError> {
        let known: Vec<String> = names.iter().filter(|n| self.emitter.is_declared(n)).cloned().collect();
        if known.is_empty() {
            return Ok(Model::default());
        }
        let r = self.pipe.values(&known, self.backend.timeout)?;
        self.expect(r)
    }

    fn core(&mut self) -> Result<Vec<String>, SolverError> {
        let r = self.pipe.core(self.backend.timeout)?;
        self.expect(r)
    }
}

/// A solver child process with a line reader thread and an optional
/// transcript file.
struct Pipe {
    child: Option<Child>,
    stdin: Option<ChildStdin>,
    rx: Option<Receiver<String>>,
    reader: Option<JoinHandle<()>>,
    log: Option<File>,
}

impl Pipe {
    fn note(&mut self, line: &str) {
        if let Some(f) = &mut self.log {
            let _ = writeln!(f, "; {line}");
        }
    }

    fn send(&mut self, text: &str) -> Result<(), SolverError> {
        let stdin = self.stdin.as_mut().ok_or(SolverError::Closed)?;
        if let Some(f) = &mut self.log {
            f.write_all(text.as_bytes())?;
        }
        stdin.write_all(text.as_bytes())?;
        stdin.flush()?;
        Ok(())
    }

    /// Next complete s-expression, or `None` after `timeout`. A reported
    /// `(error ...)` becomes an error.
    fn read(&mut self, timeout: Duration) -> Result<Option<SExpr>, SolverError> {
        let deadline = Instant::now() + timeout;
        let rx = self.rx.as_ref().ok_or(SolverError::Closed)?;
        let mut buf = String::new();
        let mut scan = Balance::default();
        let e = loop {
            let now = Instant::now();
            if now >= deadline {
                self.note("timeout");
                return Ok(None);
            }
            match rx.recv_timeout(deadline - now) {
                Ok(line) => {
                    buf.push_str(&line);
                    buf.push('\n');
                    if !scan.feed(&line) {
                        continue;
                    }
                    if let Ok(mut exprs) = parse_all(&buf) {
                        if !exprs.is_empty() {
                            break exprs.remove(0);
                        }
                    }
                }
                Err(RecvTimeoutError::Timeout) => {
                    self.note("timeout");
                    return Ok(None);
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(SolverError::Protocol(format!("solver exited early; partial output `{buf}`")));
                }
            }
        };
        self.note(&render(&e));
        if let Some(l) = e.list() {
            if l.first().and_then(SExpr::atom) == Some("error") {
                let msg = l.get(1).map(render).unwrap_or_default();
                return Err(SolverError::Reported(msg));
            }
        }
        Ok(Some(e))
    }

    fn values(&mut self, names: &[String], timeout: Duration) -> Result<Option<Model>, SolverError> {
        self.send(&format!("(get-value ({}))\n", names.join(" ")))?;
        match self.read(timeout)? {
            Some(reply) => Ok(Some(parse_model(&reply)?)),
            None => Ok(None),
        }
    }

    fn core(&mut self, timeout: Duration) -> Result<Option<Vec<String>>, SolverError> {
        self.send("(get-unsat-core)\n")?;
        let Some(reply) = self.read(timeout)? else {
            return Ok(None);
        };
        let labels = reply
            .list()
            .ok_or_else(|| SolverError::Protocol(render(&reply)))?
            .iter()
            .map(|e| e.atom().map(str::to_string).ok_or_else(|| SolverError::Protocol(render(e))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some(labels))
    }

    /// Ends the process; `kill` skips the polite `(exit)`.
    fn close(&mut self, kill: bool) {
        if self.child.is_none() {
            return;
        }
        if !kill {
            let _ = self.send("(exit)\n");
        }
        self.stdin = None;
        if let Some(mut child) = self.child.take() {
            if kill {
                let _ = child.kill();
            }
            let _ = child.wait();
        }
        self.rx = None;
        if let Some(r) = self.reader.take() {
            let _ = r.join();
        }
    }
}

impl Drop for Pipe {
    fn drop(&mut self) {
        self.close(false);
    }
}

/// Tracks parenthesis depth across lines so that a multi-line reply is
/// parsed once, when it is complete.
#[derive(Default)]
struct Balance {
    depth: i64,
    in_quote: Option<char>,
    seen: bool,
}

impl Balance {
    /// Feeds one line; true once a complete top-level expression was seen.
    fn feed(&mut self, line: &str) -> bool {
        for c in line.chars() {
            match (self.in_quote, c) {
                (Some(q), c) if c == q => self.in_quote = None,
                (Some(_), _) => {}
                (None, ';') => break,
                (None, '"') | (None, '|') => {
                    self.in_quote = Some(c);
                    self.seen = true;
                }
                (None, '(') => {
                    self.depth += 1;
                    self.seen = true;
                }
                (None, ')') => self.depth -= 1,
                (None, c) if !c.is_whitespace() => self.seen = true,
                _ => {}
            }
        }
        self.seen && self.depth <= 0 && self.in_quote.is_none()
    }
}

fn render(e: &SExpr) -> String {
    match e {
        SExpr::Atom(a) => a.clone(),
        SExpr::List(l) => format!("({})", l.iter().map(render).collect::<Vec<_>>().join(" ")),
    }
}

fn parse_model(reply: &SExpr) -> Result<Model, SolverError> {
    let pairs = reply.list().ok_or_else(|| SolverError::Protocol(render(reply)))?;
    let mut values = BTreeMap::new();
    for p in pairs {
        match p.list() {
            Some([SExpr::Atom(name), v]) => {
                let v = parse_value(v).map_err(|e| SolverError::Protocol(e.to_string()))?;
                values.insert(name.clone(), v);
            }
            _ => return Err(SolverError::Protocol(render(p))),
        }
    }
    Ok(Model { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smt::term::{BvOp, CmpOp};

    fn solver() -> SmtProcess {
        SmtProcess::from_env()
    }

    #[test]
    fn sat_query_returns_model() {
        let x = Term::var("x", Sort::Bv(8));
        let mut q = Query::new("sat");
        q.assert(Term::bvop(BvOp::Add, &x, &Term::bv(8, 3)).eq_to(&Term::bv(8, 1)));
        match solver().solve(&q).unwrap() {
            SolveResult::Sat(m) => assert_eq!(m.get("x"), Some(Value::Bv { width: 8, value: 254 })),
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn unsat_query_returns_core() {
        let x = Term::var("x", Sort::Bv(8));
        let p = Term::var("p", Sort::Bool);
        let mut q = Query::new("core");
        q.assert_named("a", Term::bv_cmp(CmpOp::Lt, &x, &Term::bv(8, 4)));
        q.assert_named("b", Term::bv_cmp(CmpOp::Gt, &x, &Term::bv(8, 9)));
        q.assert_named("c", p);
        match solver().solve(&q).unwrap() {
            SolveResult::Unsat(mut core) => {
                core.sort();
                assert_eq!(core, vec!["a".to_string(), "b".to_string()]);
            }
            other => panic!("expected unsat, got {other:?}"),
        }
    }

    #[test]
    fn minimized_core_drops_redundant_labels() {
        let x = Term::var("x", Sort::Bv(8));
        let lt = |k| Term::bv_cmp(CmpOp::Lt, &x, &Term::bv(8, k));
        let gt = |k| Term::bv_cmp(CmpOp::Gt, &x, &Term::bv(8, k));
        let mut q = Query::new("min");
        // {a, b} and {c, d} are both cores; deletion removes `a` first
        q.assert_named("a", lt(4));
        q.assert_named("c", lt(2));
        q.assert_named("b", gt(9));
        q.assert_named("d", gt(3));
        q.assert_named("e", Term::var("p", Sort::Bool));
        q.minimized();
        match solver().solve(&q).unwrap() {
            SolveResult::Unsat(core) => {
                assert_eq!(core.len(), 2);
                let mut rest = q.clone();
                rest.labeled.retain(|(l, _)| core.contains(l));
                rest.minimize_core = false;
                assert!(solver().solve(&rest).unwrap().is_unsat());
                for drop in &core {
                    let mut less = rest.clone();
                    less.labeled.retain(|(l, _)| l != drop);
                    assert!(solver().solve(&less).unwrap().is_sat());
                }
            }
            other => panic!("expected unsat, got {other:?}"),
        }
    }

    #[test]
    fn missing_solver_is_an_error() {
        let s = SmtProcess::new("/nonexistent/solver-binary");
        assert!(matches!(s.solve(&Query::new("x")), Err(SolverError::Spawn { .. })));
        assert!(matches!(s.session("x"), Err(SolverError::Spawn { .. })));
    }

    #[test]
    fn transcripts_are_logged() {
        let dir = tempfile::tempdir().unwrap();
        let s = solver().with_log_dir(dir.path());
        let mut q = Query::new("log me");
        q.assert(Term::var("p", Sort::Bool));
        assert!(s.solve(&q).unwrap().is_sat());
        let text = std::fs::read_to_string(dir.path().join("query-00000-log_me.smt2")).unwrap();
        assert!(text.contains("(check-sat)"));
        assert!(text.contains("(get-value (p))"));
        assert_eq!(s.stats().queries, 1);
    }

    #[test]
    fn session_scopes_and_assumptions() {
        let s = solver();
        let mut sess = s.session("scopes").unwrap();
        let x = Term::var("x", Sort::Bv(8));
        let lt = |k| Term::bv_cmp(CmpOp::Lt, &x, &Term::bv(8, k));
        let gt = |k| Term::bv_cmp(CmpOp::Gt, &x, &Term::bv(8, k));
        sess.assert_all(&[lt(10)]).unwrap();
        sess.assert_labeled("a", &gt(20)).unwrap();
        sess.assert_labeled("b", &gt(5)).unwrap();
        sess.assert_labeled("c", &lt(7)).unwrap();

        assert_eq!(sess.check(&[]).unwrap(), Answer::Sat);
        assert_eq!(sess.check(&["a".into()]).unwrap(), Answer::Unsat);
        assert_eq!(sess.core().unwrap(), vec!["a".to_string()]);

        let all: Vec<String> = ["b", "c", "a"].map(String::from).to_vec();
        assert_eq!(sess.check(&all).unwrap(), Answer::Unsat);
        let core = sess.core().unwrap();
        let small = minimize_core(sess.as_mut(), &all, &core, &[]).unwrap();
        assert_eq!(small, vec!["a".to_string()]);

        // constraints inside a scope vanish on pop, declarations stay
        sess.push().unwrap();
        sess.assert_all(&[gt(8), Term::var("y", Sort::Bool)]).unwrap();
        assert_eq!(sess.check(&["b".into()]).unwrap(), Answer::Sat);
        let m = sess.values(&["x".into(), "y".into(), "never".into()]).unwrap();
        assert_eq!(m.get("x"), Some(Value::Bv { width: 8, value: 9 }));
        assert_eq!(m.bool("y"), Some(true));
        assert_eq!(m.get("never"), None);
        sess.pop().unwrap();
        assert_eq!(sess.check(&["b".into(), "c".into()]).unwrap(), Answer::Sat);
        assert_eq!(sess.values(&["x".into()]).unwrap().get("x"), Some(Value::Bv { width: 8, value: 6 }));
        assert!(s.stats().queries >= 6);
    }

    #[test]
    fn session_timeout_closes_the_session() {
        let s = solver().with_timeout(Duration::ZERO);
        let mut sess = s.session("timeout").unwrap();
        sess.assert_all(&[Term::var("p", Sort::Bool)]).unwrap();
        assert!(matches!(sess.check(&[]).unwrap(), Answer::Unknown(_)));
        assert!(matches!(sess.check(&[]), Err(SolverError::Closed)));
    }
}
