//! External SMT-LIB 2 solver process.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use log::{debug, trace};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sexp::{parse_one, Sexp};
use super::term::{quote_symbol, Sort, Term, PRELUDE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("solver unavailable: {0}")]
    Unavailable(String),
    #[error("solver timed out")]
    Timeout,
    #[error("solver crashed: {0}")]
    Crashed(String),
    #[error("solver protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Solver binary; `z3` on `PATH` when unset.
    pub path: Option<PathBuf>,
    pub seed: u64,
    /// Per-query timeout in milliseconds.
    pub timeout_ms: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { path: None, seed: 0, timeout_ms: 60_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    Unsat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn as_i64(self) -> i64 {
        match self {
            Value::Int(v) => v,
            Value::Bool(b) => b as i64,
        }
    }
}

pub struct SolverSession {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    pending: String,
    scopes: Vec<HashSet<String>>,
    transcript: Option<String>,
    pub queries: usize,
}

impl SolverSession {
    pub fn start(cfg: &SolverConfig) -> Result<Self, SolverError> {
        let path = cfg.path.clone().unwrap_or_else(|| PathBuf::from("z3"));
        let mut child = Command::new(&path)
            .args(["-in", "-smt2"])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SolverError::Unavailable(format!("{}: {e}", path.display())))?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut s = SolverSession {
            child,
            stdin,
            stdout,
            pending: String::new(),
            scopes: vec![HashSet::new()],
            transcript: None,
            queries: 0,
        };
        s.send(&format!(
            "(set-option :random-seed {seed})\n(set-option :smt.random_seed {seed})\n(set-option :timeout {})\n{PRELUDE}(echo \"ready\")\n",
            cfg.timeout_ms,
            seed = cfg.seed,
        ))
        .map_err(|e| SolverError::Unavailable(e.to_string()))?;
        match s.read_response() {
            Ok(Sexp::Atom(a)) if a.trim_matches('"') == "ready" => Ok(s),
            Ok(other) => Err(SolverError::Unavailable(format!("unexpected greeting {other:?}"))),
            Err(e) => Err(SolverError::Unavailable(e.to_string())),
        }
    }

    /// Keeps a copy of every command sent from now on.
    pub fn record(&mut self) {
        self.transcript.get_or_insert_with(String::new);
    }

    pub fn transcript(&self) -> Option<&str> {
        self.transcript.as_deref()
    }

    fn send(&mut self, text: &str) -> Result<(), SolverError> {
        trace!("smt> {}", text.trim_end());
        if let Some(t) = &mut self.transcript {
            t.push_str(text);
        }
        self.stdin
            .write_all(text.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| SolverError::Crashed(e.to_string()))
    }

    fn read_response(&mut self) -> Result<Sexp, SolverError> {
        loop {
            if let Some((s, n)) = parse_one(&self.pending) {
                self.pending.drain(..n);
                match &s {
                    Sexp::Atom(a) if a == "success" || a == "unsupported" => continue,
                    Sexp::List(xs) if xs.first().and_then(Sexp::as_atom) == Some("error") => {
                        return Err(SolverError::Protocol(format!("{s:?}")));
                    }
                    _ => return Ok(s),
                }
            }
            let mut line = String::new();
            let n = self.stdout.read_line(&mut line).map_err(|e| SolverError::Crashed(e.to_string()))?;
            if n == 0 {
                let status = self.child.try_wait().ok().flatten();
                return Err(SolverError::Crashed(format!("solver closed its output ({status:?})")));
            }
            self.pending.push_str(&line);
        }
    }

    fn is_declared(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name))
    }

    pub fn declare(&mut self, name: &str, sort: Sort) -> Result<(), SolverError> {
        if self.is_declared(name) {
            return Ok(());
        }
        self.scopes.last_mut().unwrap().insert(name.to_string());
        self.send(&format!("(declare-fun {} () {sort})\n", quote_symbol(name)))
    }

    fn declare_vars_of(&mut self, terms: &[&Term]) -> Result<(), SolverError> {
        let mut vars = Vec::new();
        let mut seen = HashSet::new();
        for t in terms {
            t.vars(&mut vars, &mut seen);
        }
        let mut text = String::new();
        for (n, s) in vars {
            if !self.is_declared(&n) {
                text.push_str(&format!("(declare-fun {} () {s})\n", quote_symbol(&n)));
                self.scopes.last_mut().unwrap().insert(n);
            }
        }
        if !text.is_empty() {
            self.send(&text)?;
        }
        Ok(())
    }

    pub fn assert(&mut self, t: &Term) -> Result<(), SolverError> {
        if t.as_bool() == Some(true) {
            return Ok(());
        }
        self.declare_vars_of(&[t])?;
        let mut text = String::from("(assert ");
        t.write_smt(&mut text);
        text.push_str(")\n");
        self.send(&text)
    }

    pub fn assert_all(&mut self, ts: &[Term]) -> Result<(), SolverError> {
        for t in ts {
            self.assert(t)?;
        }
        Ok(())
    }

    pub fn push(&mut self) -> Result<(), SolverError> {
        self.scopes.push(HashSet::new());
        self.send("(push 1)\n")
    }

    pub fn pop(&mut self) -> Result<(), SolverError> {
        if self.scopes.len() > 1 {
            self.scopes.pop();
        }
        self.send("(pop 1)\n")
    }

    pub fn check(&mut self) -> Result<SatResult, SolverError> {
        self.queries += 1;
        self.send("(check-sat)\n")?;
        let r = self.read_response()?;
        debug!("check-sat #{} -> {r:?}", self.queries);
        match r.as_atom() {
            Some("sat") => Ok(SatResult::Sat),
            Some("unsat") => Ok(SatResult::Unsat),
            Some("unknown") => Err(SolverError::Timeout),
            _ => Err(SolverError::Protocol(format!("unexpected check-sat answer {r:?}"))),
        }
    }

    /// Values of `terms` in the current model.
    pub fn get_values(&mut self, terms: &[Term]) -> Result<Vec<Value>, SolverError> {
        if terms.is_empty() {
            return Ok(vec![]);
        }
        let refs: Vec<&Term> = terms.iter().collect();
        self.declare_vars_of(&refs)?;
        let mut text = String::from("(get-value (");
        for t in terms {
            text.push(' ');
            t.write_smt(&mut text);
        }
        text.push_str("))\n");
        self.send(&text)?;
        let r = self.read_response()?;
        let pairs = r.as_list().ok_or_else(|| SolverError::Protocol(format!("bad get-value answer {r:?}")))?;
        if pairs.len() != terms.len() {
            return Err(SolverError::Protocol("get-value arity mismatch".into()));
        }
        pairs
            .iter()
            .map(|p| {
                let v = p.as_list().and_then(|xs| xs.get(1));
                match v {
                    Some(v) => v
                        .as_int()
                        .map(Value::Int)
                        .or_else(|| v.as_bool().map(Value::Bool))
                        .ok_or_else(|| SolverError::Protocol(format!("unsupported value {v:?}"))),
                    None => Err(SolverError::Protocol(format!("bad get-value pair {p:?}"))),
                }
            })
            .collect()
    }
}

impl Drop for SolverSession {
    fn drop(&mut self) {
        let _ = self.stdin.write_all(b"(exit)\n");
        let _ = self.stdin.flush();
        if self.child.try_wait().ok().flatten().is_none() {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}

/// True when the configured solver can be started.
pub fn solver_available(cfg: &SolverConfig) -> bool {
    SolverSession::start(cfg).is_ok()
}
