//! SMT-LIB 2 over a child process's standard input and output.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use num_bigint::BigInt;

use crate::interp::{ArrayValue, Value};
use crate::lang::Type;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Program and arguments; must read a script on standard input.
    pub cmd: Vec<String>,
    /// Per-query timeout in seconds.
    pub timeout_s: f64,
    pub seed: Option<u64>,
    /// Every session's script is also written to a file in this directory.
    pub dump_dir: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cmd: vec!["z3".into(), "-in".into()],
            timeout_s: 10.0,
            seed: None,
            dump_dir: None,
        }
    }
}

impl SolverConfig {
    pub fn from_command_line(cmd: &str) -> SolverConfig {
        SolverConfig {
            cmd: cmd.split_whitespace().map(str::to_string).collect(),
            ..SolverConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SolverError {
    #[error("cannot start solver `{0}`: {1}")]
    Spawn(String, String),
    #[error("solver timed out")]
    Timeout,
    #[error("solver exited unexpectedly")]
    Died,
    #[error("unexpected solver output: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    Unsat,
    Unknown(String),
}

/// S-expressions as printed by the solver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => write!(f, "{a}"),
            Sexp::List(xs) => {
                write!(f, "(")?;
                for (k, x) in xs.iter().enumerate() {
                    if k > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Sexp {
    pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SolverError> {
        let toks = tokenize(text);
        let mut pos = 0;
        let mut out = Vec::new();
        while pos < toks.len() {
            out.push(parse_one(&toks, &mut pos)?);
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Sexp, SolverError> {
        let mut all = Sexp::parse_all(text)?;
        if all.len() != 1 {
            return Err(SolverError::Malformed(text.to_string()));
        }
        Ok(all.remove(0))
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            _ => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v) => Some(v),
            _ => None,
        }
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' | ')' => {
                out.push(c.to_string());
                chars.next();
            }
            '|' => {
                let mut s = String::from("|");
                chars.next();
                for d in chars.by_ref() {
                    s.push(d);
                    if d == '|' {
                        break;
                    }
                }
                out.push(s);
            }
            '"' => {
                let mut s = String::from("\"");
                chars.next();
                for d in chars.by_ref() {
                    s.push(d);
                    if d == '"' {
                        break;
                    }
                }
                out.push(s);
            }
            ';' => {
                for d in chars.by_ref() {
                    if d == '\n' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                out.push(s);
            }
        }
    }
    out
}

fn parse_one(toks: &[String], pos: &mut usize) -> Result<Sexp, SolverError> {
    let t = toks
        .get(*pos)
        .ok_or_else(|| SolverError::Malformed("unexpected end of output".into()))?;
    *pos += 1;
    match t.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match toks.get(*pos).map(String::as_str) {
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(parse_one(toks, pos)?),
                    None => return Err(SolverError::Malformed("unbalanced parentheses".into())),
                }
            }
        }
        ")" => Err(SolverError::Malformed("unexpected `)`".into())),
        _ => Ok(Sexp::Atom(t.clone())),
    }
}

/// SMT-LIB sort of a language type.
pub fn sort(ty: &Type) -> String {
    match ty {
        Type::Int => "Int".into(),
        Type::Bool => "Bool".into(),
        Type::Array(e) => format!("(Array Int {})", sort(e)),
    }
}

/// SMT-LIB literal for a value. Infinities have no counterpart and are
/// rendered as the symbols `ninf`/`pinf`, which callers must declare.
pub fn value_term(v: &Value) -> String {
    match v {
        Value::Int(i) => int_term(i),
        Value::Bool(b) => b.to_string(),
        Value::NegInf => "ninf".into(),
        Value::PosInf => "pinf".into(),
        Value::Array(a) => {
            let mut t = format!(
                "((as const (Array Int {})) {})",
                sort(&value_type(a.default_value())),
                value_term(a.default_value())
            );
            for (i, x) in a.overrides() {
                t = format!("(store {t} {} {})", int_term(i), value_term(x));
            }
            t
        }
    }
}

fn value_type(v: &Value) -> Type {
    match v {
        Value::Bool(_) => Type::Bool,
        Value::Array(a) => Type::array_of(value_type(a.default_value())),
        _ => Type::Int,
    }
}

pub fn int_term(i: &BigInt) -> String {
    if i.sign() == num_bigint::Sign::Minus {
        format!("(- {})", -i)
    } else {
        i.to_string()
    }
}

/// Reads a model value back. `defs` resolves `(_ as-array f)` references.
pub fn sexp_value(s: &Sexp, ty: &Type, defs: &[Sexp]) -> Option<Value> {
    let s = &inline_lets(s, &BTreeMap::new());
    match ty {
        Type::Int => sexp_int(s).map(Value::Int),
        Type::Bool => match s.atom()? {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            _ => None,
        },
        Type::Array(elem) => sexp_array(s, elem, defs).map(Value::Array),
    }
}

/// Replaces `let`-bound names by their definitions. The solver names its
/// shared subterms `a!1` and so on, so shadowing does not arise.
fn inline_lets(s: &Sexp, env: &BTreeMap<String, Sexp>) -> Sexp {
    match s {
        Sexp::Atom(a) => env.get(a).cloned().unwrap_or_else(|| s.clone()),
        Sexp::List(v) if v.len() == 3 && v[0].atom() == Some("let") => {
            let mut inner = env.clone();
            for b in v[1].list().unwrap_or_default() {
                if let Some([Sexp::Atom(name), def]) = b.list() {
                    inner.insert(name.clone(), inline_lets(def, env));
                }
            }
            inline_lets(&v[2], &inner)
        }
        Sexp::List(v) => Sexp::List(v.iter().map(|x| inline_lets(x, env)).collect()),
    }
}

fn sexp_int(s: &Sexp) -> Option<BigInt> {
    match s {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(v) if v.len() == 2 && v[0].atom() == Some("-") => sexp_int(&v[1]).map(|i| -i),
        _ => None,
    }
}

fn sexp_array(s: &Sexp, elem: &Type, defs: &[Sexp]) -> Option<ArrayValue> {
    let items = s.list()?;
    // ((as const (Array Int Int)) v)
    if items.len() == 2 {
        if let Some(head) = items[0].list() {
            if head.first()?.atom() == Some("as") && head.get(1)?.atom() == Some("const") {
                return Some(ArrayValue::constant(sexp_value(&items[1], elem, defs)?));
            }
            if head.first()?.atom() == Some("_") && head.get(1)?.atom() == Some("as-array") {
                let name = head.get(2)?.atom()?;
                let def = defs.iter().find(|d| d.list().and_then(|l| l.get(1)?.atom()) == Some(name))?;
                let l = def.list()?;
                let param = l.get(2)?.list()?.first()?.list()?.first()?.atom()?;
                return ite_array(l.get(4)?, param, elem, defs);
            }
        }
    }
    match items.first()?.atom()? {
        "store" if items.len() == 4 => {
            let base = sexp_array(&items[1], elem, defs)?;
            let i = sexp_int(&items[2])?;
            Some(base.store(&i, sexp_value(&items[3], elem, defs)?))
        }
        "lambda" if items.len() == 3 => {
            let param = items[1].list()?.first()?.list()?.first()?.atom()?;
            ite_array(&items[2], param, elem, defs)
        }
        _ => None,
    }
}

/// `(ite (= x k) v rest)` chains over the parameter `x`.
fn ite_array(body: &Sexp, param: &str, elem: &Type, defs: &[Sexp]) -> Option<ArrayValue> {
    if let Some(l) = body.list() {
        if l.len() == 4 && l[0].atom() == Some("ite") {
            let cond = l[1].list()?;
            if cond.len() == 3 && cond[0].atom() == Some("=") {
                let k = if cond[1].atom() == Some(param) {
                    sexp_int(&cond[2])?
                } else if cond[2].atom() == Some(param) {
                    sexp_int(&cond[1])?
                } else {
                    return None;
                };
                let rest = ite_array(&l[3], param, elem, defs)?;
                return Some(rest.store(&k, sexp_value(&l[2], elem, defs)?));
            }
            return None;
        }
    }
    Some(ArrayValue::constant(sexp_value(body, elem, defs)?))
}

enum Line {
    Text(String),
    Eof,
}

/// An interactive solver process.
pub struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<Line>,
    timeout: Duration,
    dump: Option<std::fs::File>,
}

static SESSION_COUNTER: AtomicU64 = AtomicU64::new(0);

impl Session {
    pub fn start(cfg: &SolverConfig) -> Result<Session, SolverError> {
        let name = cfg.cmd.first().cloned().unwrap_or_default();
        let mut child = Command::new(&name)
            .args(&cfg.cmd[1.min(cfg.cmd.len())..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SolverError::Spawn(cfg.cmd.join(" "), e.to_string()))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = channel();
        thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                match line {
                    Ok(l) => {
                        if tx.send(Line::Text(l)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(Line::Eof);
        });
        let dump = cfg.dump_dir.as_ref().and_then(|d| {
            let _ = std::fs::create_dir_all(d);
            let n = SESSION_COUNTER.fetch_add(1, Ordering::SeqCst);
            std::fs::File::create(d.join(format!("session-{}-{n:05}.smt2", std::process::id()))).ok()
        });
        let mut s = Session {
            child,
            stdin,
            lines: rx,
            timeout: Duration::from_secs_f64(cfg.timeout_s),
            dump,
        };
        s.send("(set-option :print-success false)")?;
        s.send("(set-option :produce-models true)")?;
        if let Some(seed) = cfg.seed {
            s.send(&format!("(set-option :random-seed {seed})"))?;
        }
        s.send(&format!("(set-option :timeout {})", (cfg.timeout_s * 1000.0) as u64))?;
        Ok(s)
    }

    pub fn send(&mut self, cmd: &str) -> Result<(), SolverError> {
        if let Some(f) = &mut self.dump {
            let _ = writeln!(f, "{cmd}");
        }
        writeln!(self.stdin, "{cmd}").map_err(|_| SolverError::Died)?;
        Ok(())
    }

    fn read_line(&mut self, wait: Duration) -> Result<String, SolverError> {
        match self.lines.recv_timeout(wait) {
            Ok(Line::Text(l)) => Ok(l),
            Ok(Line::Eof) | Err(RecvTimeoutError::Disconnected) => Err(SolverError::Died),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                Err(SolverError::Timeout)
            }
        }
    }

    /// Reads one complete s-expression (possibly spanning several lines).
    fn read_sexp(&mut self) -> Result<Sexp, SolverError> {
        let mut buf = String::new();
        let wait = self.timeout + Duration::from_secs(5);
        loop {
            let line = self.read_line(wait)?;
            buf.push_str(&line);
            buf.push('\n');
            let depth: i64 = tokenize(&buf)
                .iter()
                .map(|t| match t.as_str() {
                    "(" => 1,
                    ")" => -1,
                    _ => 0,
                })
                .sum();
            if depth <= 0 && !buf.trim().is_empty() {
                return Sexp::parse(buf.trim());
            }
        }
    }

    pub fn check(&mut self) -> Result<SatResult, SolverError> {
        self.send("(check-sat)")?;
        self.stdin.flush().map_err(|_| SolverError::Died)?;
        let wait = self.timeout + Duration::from_secs(5);
        let line = self.read_line(wait)?;
        match line.trim() {
            "sat" => Ok(SatResult::Sat),
            "unsat" => Ok(SatResult::Unsat),
            "unknown" => {
                self.send("(get-info :reason-unknown)")?;
                self.stdin.flush().map_err(|_| SolverError::Died)?;
                let why = self.read_sexp().map(|s| s.to_string()).unwrap_or_default();
                Ok(SatResult::Unknown(why))
            }
            other => Err(SolverError::Malformed(other.to_string())),
        }
    }

    /// Values of the given terms in the current model.
    pub fn values(&mut self, terms: &[String]) -> Result<Vec<Sexp>, SolverError> {
        if terms.is_empty() {
            return Ok(vec![]);
        }
        self.send(&format!("(get-value ({}))", terms.join(" ")))?;
        self.stdin.flush().map_err(|_| SolverError::Died)?;
        let s = self.read_sexp()?;
        let pairs = s.list().ok_or_else(|| SolverError::Malformed(s.to_string()))?;
        pairs
            .iter()
            .map(|p| match p.list() {
                Some([_, v]) => Ok(v.clone()),
                _ => Err(SolverError::Malformed(p.to_string())),
            })
            .collect()
    }

    /// `define-fun` entries of the current model.
    pub fn model_defs(&mut self) -> Result<Vec<Sexp>, SolverError> {
        self.send("(get-model)")?;
        self.stdin.flush().map_err(|_| SolverError::Died)?;
        let s = self.read_sexp()?;
        Ok(match s {
            Sexp::List(v) => v.into_iter().filter(|d| d.list().and_then(|l| l.first()?.atom()) == Some("define-fun")).collect(),
            _ => vec![],
        })
    }

    pub fn push(&mut self) -> Result<(), SolverError> {
        self.send("(push 1)")
    }

    pub fn pop(&mut self) -> Result<(), SolverError> {
        self.send("(pop 1)")
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = writeln!(self.stdin, "(exit)");
        let _ = self.stdin.flush();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Runs a complete script and reports the answer to its first `check-sat`.
pub fn solve(script: &str, cfg: &SolverConfig) -> Result<SatResult, SolverError> {
    let mut s = Session::start(cfg)?;
    let mut checks = 0;
    let mut result = None;
    for cmd in Sexp::parse_all(script)? {
        if cmd.list().and_then(|l| l.first()?.atom()) == Some("check-sat") {
            checks += 1;
            let r = s.check()?;
            if result.is_none() {
                result = Some(r);
            }
        } else {
            s.send(&cmd.to_string())?;
        }
    }
    let _ = checks;
    result.ok_or_else(|| SolverError::Malformed("script has no check-sat".into()))
}

/// Whether the configured solver can be started.
pub fn solver_available(cfg: &SolverConfig) -> bool {
    match Session::start(cfg) {
        Ok(mut s) => {
            s.send("(assert true)").is_ok() && matches!(s.check(), Ok(SatResult::Sat))
        }
        Err(_) => false,
    }
}
