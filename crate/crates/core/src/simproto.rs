//! External simulators over a line protocol on the child's stdin/stdout.
//!
//! ```text
//! -> HELLO
//! <- HELLO <n>
//! -> SIM <x1> <x2> ... <xn>
//! <- MODES <tok1>,<tok2>,...      (or `ERR <message>`)
//! ```
//!
//! Numbers are written with Rust's shortest round-trip formatting, so the
//! child sees exactly the `f64` values we hold.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::regions::ModeSequence;
use crate::simulator::{SimError, Simulator};

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub dimension: usize,
    pub handshake_timeout: Duration,
    pub sim_timeout: Duration,
    /// Consecutive failed launches or requests tolerated before giving up.
    pub max_failures: usize,
}

impl ExternalConfig {
    pub fn new(command: Vec<String>, dimension: usize) -> Self {
        Self {
            command,
            dimension,
            handshake_timeout: Duration::from_secs(10),
            sim_timeout: Duration::from_secs(60),
            max_failures: 3,
        }
    }
}

pub fn format_request(x: &[f64]) -> String {
    let mut s = String::from("SIM");
    for v in x {
        s.push(' ');
        s.push_str(&format!("{v:?}"));
    }
    s
}

pub fn parse_request(line: &str) -> Result<Vec<f64>, SimError> {
    let rest = line
        .strip_prefix("SIM")
        .filter(|r| r.is_empty() || r.starts_with(' '))
        .ok_or_else(|| SimError::Protocol(format!("not a request: {line:?}")))?;
    rest.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| SimError::Protocol(format!("bad number {t:?}"))))
        .collect()
}

/// `MODES a,b,c`; a bare `MODES` is the empty sequence.
pub fn format_modes(seq: &ModeSequence) -> String {
    if seq.is_empty() {
        "MODES".to_string()
    } else {
        format!("MODES {}", seq.tokens().join(","))
    }
}

pub fn parse_reply(line: &str) -> Result<ModeSequence, SimError> {
    if let Some(msg) = line.strip_prefix("ERR") {
        return Err(SimError::Remote(msg.trim().to_string()));
    }
    if line == "MODES" {
        return Ok(ModeSequence::new(Vec::<String>::new()));
    }
    let body = line
        .strip_prefix("MODES ")
        .ok_or_else(|| SimError::Protocol(format!("malformed reply {line:?}")))?;
    let tokens: Vec<&str> = body.split(',').collect();
    if tokens.iter().any(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
        return Err(SimError::Protocol(format!("malformed token list {body:?}")));
    }
    Ok(ModeSequence::new(tokens))
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Session {
    fn launch(cfg: &ExternalConfig) -> Result<Self, SimError> {
        let (prog, args) = cfg
            .command
            .split_first()
            .ok_or_else(|| SimError::Other("empty simulator command".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| SimError::Other(format!("cannot launch {prog}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut s = Session {
            child,
            stdin,
            lines: rx,
        };
        let reply = s.exchange("HELLO", cfg.handshake_timeout)?;
        let n = reply
            .strip_prefix("HELLO ")
            .and_then(|n| n.trim().parse::<usize>().ok())
            .ok_or_else(|| SimError::Protocol(format!("bad handshake reply {reply:?}")))?;
        if n != cfg.dimension {
            return Err(SimError::Protocol(format!(
                "simulator reports dimension {n}, expected {}",
                cfg.dimension
            )));
        }
        Ok(s)
    }

    fn exchange(&mut self, line: &str, timeout: Duration) -> Result<String, SimError> {
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| SimError::Other(format!("simulator exited: {e}")))?;
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(l)) => Ok(l.trim_end_matches('\r').to_string()),
            Ok(Err(e)) => Err(SimError::Other(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(SimError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(SimError::Other("simulator exited".into())),
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A child process speaking the line protocol. The child is launched lazily
/// and relaunched after it dies or times out.
pub struct ExternalSimulator {
    cfg: ExternalConfig,
    session: Option<Session>,
    launches: usize,
}

impl ExternalSimulator {
    pub fn new(cfg: ExternalConfig) -> Self {
        Self {
            cfg,
            session: None,
            launches: 0,
        }
    }

    /// Launch and handshake now instead of on the first request.
    pub fn connect(cfg: ExternalConfig) -> Result<Self, SimError> {
        let mut s = Self::new(cfg);
        s.ensure_session()?;
        Ok(s)
    }

    /// Number of child processes started so far.
    pub fn launches(&self) -> usize {
        self.launches
    }

    fn ensure_session(&mut self) -> Result<&mut Session, SimError> {
        if self.session.is_none() {
            self.launches += 1;
            self.session = Some(Session::launch(&self.cfg)?);
        }
        Ok(self.session.as_mut().expect("just set"))
    }

    fn attempt(&mut self, request: &str) -> Result<ModeSequence, SimError> {
        let timeout = self.cfg.sim_timeout;
        let reply = self.ensure_session()?.exchange(request, timeout)?;
        parse_reply(&reply)
    }
}

impl Simulator for ExternalSimulator {
    fn dimension(&self) -> usize {
        self.cfg.dimension
    }

    fn simulate(&mut self, x: &[f64]) -> Result<ModeSequence, SimError> {
        if x.len() != self.cfg.dimension {
            return Err(SimError::OutOfDomain {
                point: x.to_vec(),
                reason: format!("expected {} coordinates", self.cfg.dimension),
            });
        }
        let request = format_request(x);
        let mut failures = 0;
        loop {
            match self.attempt(&request) {
                Ok(seq) => return Ok(seq),
                // The child answered; its verdict stands.
                Err(e @ (SimError::Remote(_) | SimError::Protocol(_))) if self.session.is_some() => return Err(e),
                Err(e @ SimError::Timeout(_)) => {
                    self.session = None;
                    return Err(e);
                }
                Err(e) => {
                    self.session = None;
                    failures += 1;
                    log::warn!("external simulator failure {failures}: {e}");
                    if failures >= self.cfg.max_failures.max(1) {
                        return Err(SimError::ProcessFailed {
                            failures,
                            last: e.to_string(),
                        });
                    }
                }
            }
        }
    }
}

/// Wraps a simulator and, on request, re-simulates a sample of past inputs
/// to check that the recorded sequences are reproduced.
pub struct Audited<S> {
    inner: S,
    history: Vec<(Vec<f64>, ModeSequence)>,
}

impl<S: Simulator> Audited<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            history: Vec::new(),
        }
    }

    pub fn into_inner(self) -> S {
        self.inner
    }

    /// Replay up to `k` distinct past inputs chosen with `seed`.
    pub fn audit(&mut self, k: usize, seed: u64) -> Result<usize, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = k.min(self.history.len());
        let picks = sample(&mut rng, self.history.len(), k).into_vec();
        for i in picks {
            let (x, recorded) = self.history[i].clone();
            let replayed = self.inner.simulate(&x)?;
            if replayed != recorded {
                return Err(SimError::DeterminismViolation {
                    point: x,
                    recorded,
                    replayed,
                });
            }
        }
        Ok(k)
    }
}

impl<S: Simulator> Simulator for Audited<S> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn simulate(&mut self, x: &[f64]) -> Result<ModeSequence, SimError> {
        let seq = self.inner.simulate(x)?;
        self.history.push((x.to_vec(), seq.clone()));
        Ok(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_format() {
        assert_eq!(format_request(&[1.5, 2.0]), "SIM 1.5 2.0");
        assert_eq!(parse_request("SIM 1.5 2.0").unwrap(), vec![1.5, 2.0]);
        let x = [0.1 + 0.2, 1e-300, -7.25e17];
        assert_eq!(parse_request(&format_request(&x)).unwrap(), x.to_vec());
        assert!(parse_request("SIMX 1").is_err());
        assert!(parse_request("SIM a").is_err());
    }

    #[test]
    fn replies() {
        assert_eq!(parse_reply("MODES A,B,C").unwrap(), ModeSequence::new(["A", "B", "C"]));
        assert_eq!(parse_reply("MODES 42").unwrap(), ModeSequence::single("42"));
        assert!(parse_reply("MODES").unwrap().is_empty());
        assert_eq!(parse_reply("ERR boom"), Err(SimError::Remote("boom".into())));
        for bad in ["MODE A", "MODES A,,B", "MODES ", "hello"] {
            assert!(matches!(parse_reply(bad), Err(SimError::Protocol(_))), "{bad}");
        }
        let s = ModeSequence::new(["x1", "out"]);
        assert_eq!(parse_reply(&format_modes(&s)).unwrap(), s);
    }

    #[test]
    fn audit_detects_drift() {
        use crate::simulator::FnSimulator;
        let mut calls = 0;
        let sim = FnSimulator::new(1, move |x: &[f64]| {
            calls += 1;
            Ok(ModeSequence::single(if calls > 3 { "late" } else if x[0] > 0.5 { "hi" } else { "lo" }))
        });
        let mut a = Audited::new(sim);
        for x in [0.1, 0.9, 0.2] {
            a.simulate(&[x]).unwrap();
        }
        assert!(matches!(a.audit(1, 0), Err(SimError::DeterminismViolation { .. })));

        let mut b = Audited::new(FnSimulator::new(1, |x: &[f64]| Ok(ModeSequence::single(format!("{}", x[0] > 0.5)))));
        for x in [0.1, 0.9, 0.2] {
            b.simulate(&[x]).unwrap();
        }
        assert_eq!(b.audit(10, 4).unwrap(), 3);
    }
}
