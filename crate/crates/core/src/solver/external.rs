//! A solver running as a child process, spoken to in SMT-LIB2 over its
//! standard streams.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::smtlib::{assertion, declare, parse_model};
use super::SatResult;
use crate::values::{symbols_of, SymExpr};

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Process {
    fn spawn(command: &[String]) -> std::io::Result<Process> {
        let (prog, args) = command
            .split_first()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty solver command"))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Process { child, stdin, lines })
    }

    fn send(&mut self, text: &str) -> std::io::Result<()> {
        self.stdin.write_all(text.as_bytes())?;
        self.stdin.write_all(b"\n")?;
        self.stdin.flush()
    }

    fn read_line(&self, deadline: Instant) -> Result<String, String> {
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(line) if line.trim().is_empty() => continue,
                Ok(line) => return Ok(line),
                Err(RecvTimeoutError::Timeout) => return Err("solver timeout".into()),
                Err(RecvTimeoutError::Disconnected) => return Err("solver process exited".into()),
            }
        }
    }

    /// Read one balanced s-expression, possibly spanning lines.
    fn read_sexp(&self, deadline: Instant) -> Result<String, String> {
        let mut text = String::new();
        let mut depth = 0i64;
        loop {
            let line = self.read_line(deadline)?;
            for c in line.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
            }
            text.push_str(&line);
            text.push('\n');
            if depth <= 0 {
                return Ok(text);
            }
        }
    }
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.send("(exit)");
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// One solver session. In incremental mode each conjunct lives in its own
/// `push` scope, so consecutive queries that share a prefix only pay for
/// the suffix that changed.
pub struct ExternalSession {
    command: Vec<String>,
    timeout: Duration,
    incremental: bool,
    process: Option<Process>,
    /// Conjuncts currently asserted, one scope each, with the symbols
    /// declared in that scope.
    scopes: Vec<(SymExpr, Vec<u32>)>,
    declared: HashSet<u32>,
}

impl ExternalSession {
    pub fn new(command: &str, timeout: Duration, incremental: bool) -> ExternalSession {
        ExternalSession {
            command: command.split_whitespace().map(String::from).collect(),
            timeout,
            incremental,
            process: None,
            scopes: Vec::new(),
            declared: HashSet::new(),
        }
    }

    /// Whether `command` starts and answers a trivial query.
    pub fn probe(command: &str) -> bool {
        let mut s = ExternalSession::new(command, Duration::from_secs(5), false);
        matches!(s.check(&[]), SatResult::Sat(_))
    }

    fn restart(&mut self) -> Result<(), String> {
        self.process = None;
        self.scopes.clear();
        self.declared.clear();
        let mut p = Process::spawn(&self.command).map_err(|e| format!("cannot start solver `{}`: {e}", self.command.join(" ")))?;
        p.send("(set-option :produce-models true)\n(set-logic QF_BV)").map_err(|e| e.to_string())?;
        self.process = Some(p);
        Ok(())
    }

    pub fn check(&mut self, pc: &[SymExpr]) -> SatResult {
        match self.try_check(pc) {
            Ok(r) => r,
            Err(reason) => {
                // The session is in an unknown state; start over next time.
                self.process = None;
                SatResult::Unknown(reason)
            }
        }
    }

    fn try_check(&mut self, pc: &[SymExpr]) -> Result<SatResult, String> {
        let deadline = Instant::now() + self.timeout;
        if self.process.is_none() {
            self.restart()?;
        }
        let mut script = String::new();
        if self.incremental {
            let keep = self.scopes.iter().zip(pc).take_while(|((a, _), b)| a == *b).count();
            let drop_n = self.scopes.len() - keep;
            if drop_n > 0 {
                script.push_str(&format!("(pop {drop_n})\n"));
                for (_, syms) in self.scopes.drain(keep..) {
                    for id in syms {
                        self.declared.remove(&id);
                    }
                }
            }
            for c in &pc[keep..] {
                script.push_str("(push 1)\n");
                let mut fresh = Vec::new();
                for (id, width) in symbols_of(std::slice::from_ref(c)) {
                    if self.declared.insert(id) {
                        script.push_str(&declare(id, width));
                        script.push('\n');
                        fresh.push(id);
                    }
                }
                script.push_str(&assertion(c));
                script.push('\n');
                self.scopes.push((c.clone(), fresh));
            }
        } else {
            script.push_str("(reset)\n(set-option :produce-models true)\n(set-logic QF_BV)\n");
            for (id, width) in symbols_of(pc) {
                script.push_str(&declare(id, width));
                script.push('\n');
            }
            for c in pc {
                script.push_str(&assertion(c));
                script.push('\n');
            }
        }
        script.push_str("(check-sat)");
        let p = self.process.as_mut().unwrap();
        p.send(&script).map_err(|e| format!("solver write failed: {e}"))?;
        let verdict = p.read_line(deadline)?;
        match verdict.trim() {
            "sat" => {
                p.send("(get-model)").map_err(|e| format!("solver write failed: {e}"))?;
                let reply = p.read_sexp(deadline)?;
                let model = parse_model(&reply).ok_or_else(|| format!("unparseable model: {reply}"))?;
                Ok(SatResult::Sat(model))
            }
            "unsat" => Ok(SatResult::Unsat),
            "unknown" => Ok(SatResult::Unknown("solver answered unknown".into())),
            other => Err(format!("unexpected solver reply: {other}")),
        }
    }
}
