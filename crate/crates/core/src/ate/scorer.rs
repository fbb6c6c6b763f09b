//! Location scoring: decides whether a high-altitude stop deserves a
//! low-altitude pass.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver};
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Descend only when the score is strictly above this.
pub const DESCENT_THRESHOLD: f64 = 0.5;

pub const DEFAULT_SATURATION_MASS: f64 = 5.0;

pub const EXTERNAL_TIMEOUT: Duration = Duration::from_secs(2);

/// Summary of one observation handed to a scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerInput {
    pub visible_counts: Vec<usize>,
    pub density_mass: f64,
    pub obstacle_fraction: f64,
    pub altitude: f64,
}

impl ScorerInput {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !self.density_mass.is_finite() || self.density_mass < 0.0 {
            v.push(format!("density_mass: {} is not a finite non-negative mass", self.density_mass));
        }
        if !(0.0..=1.0).contains(&self.obstacle_fraction) {
            v.push(format!("obstacle_fraction: {} is outside [0, 1]", self.obstacle_fraction));
        }
        if !self.altitude.is_finite() {
            v.push("altitude: not finite".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid { what: "scorer input", violations: v })
        }
    }
}

pub trait Scorer {
    fn score(&mut self, input: &ScorerInput) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicScorer {
    pub saturation_mass: f64,
}

impl Default for HeuristicScorer {
    fn default() -> Self {
        Self { saturation_mass: DEFAULT_SATURATION_MASS }
    }
}

impl HeuristicScorer {
    pub fn evaluate(&self, input: &ScorerInput) -> f64 {
        let mass = (input.density_mass / self.saturation_mass).min(1.0);
        mass * (1.0 - 0.5 * input.obstacle_fraction)
    }
}

impl Scorer for HeuristicScorer {
    fn score(&mut self, input: &ScorerInput) -> Result<f64> {
        Ok(self.evaluate(input))
    }
}

/// Scores `input`, falling back to `fallback` when the scorer fails or
/// replies with something outside [0, 1].
pub fn score_location(input: &ScorerInput, scorer: &mut dyn Scorer, fallback: &HeuristicScorer) -> Result<f64> {
    input.validate()?;
    match scorer.score(input) {
        Ok(s) if (0.0..=1.0).contains(&s) => Ok(s),
        Ok(s) => {
            warn!("scorer returned {s}, outside [0, 1]; using heuristic");
            Ok(fallback.evaluate(input))
        }
        Err(e) => {
            warn!("scorer failed ({e}); using heuristic");
            Ok(fallback.evaluate(input))
        }
    }
}

pub fn descends(score: f64) -> bool {
    score > DESCENT_THRESHOLD
}

#[derive(Deserialize)]
struct Reply {
    score: f64,
}

enum Link {
    Tcp { writer: TcpStream, reader: BufReader<TcpStream> },
    Child { child: Child, stdin: ChildStdin, lines: Receiver<std::io::Result<String>> },
}

/// Scorer speaking newline-delimited JSON to another process, either over
/// TCP (`tcp://host:port`) or a child's stdio (`exec:program args...`).
pub struct ExternalScorer {
    endpoint: String,
    link: Option<Link>,
    timeout: Duration,
}

impl ExternalScorer {
    pub fn connect(endpoint: &str) -> Result<Self> {
        Self::connect_with_timeout(endpoint, EXTERNAL_TIMEOUT)
    }

    pub fn connect_with_timeout(endpoint: &str, timeout: Duration) -> Result<Self> {
        let link = if let Some(addr) = endpoint.strip_prefix("tcp://") {
            let sock = addr
                .to_socket_addrs()
                .map_err(|e| Error::domain(format!("scorer address {addr}: {e}")))?
                .next()
                .ok_or_else(|| Error::domain(format!("scorer address {addr} did not resolve")))?;
            let stream = TcpStream::connect_timeout(&sock, timeout)
                .map_err(|e| Error::domain(format!("connecting to scorer {addr}: {e}")))?;
            stream.set_read_timeout(Some(timeout)).ok();
            stream.set_write_timeout(Some(timeout)).ok();
            let reader = BufReader::new(stream.try_clone().map_err(|e| Error::domain(e.to_string()))?);
            Link::Tcp { writer: stream, reader }
        } else if let Some(cmd) = endpoint.strip_prefix("exec:") {
            let mut parts = cmd.split_whitespace();
            let program = parts.next().ok_or_else(|| Error::domain("empty scorer command"))?;
            let mut child = Command::new(program)
                .args(parts)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| Error::domain(format!("spawning scorer {program}: {e}")))?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            let (tx, rx) = mpsc::channel();
            std::thread::spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    if tx.send(line).is_err() {
                        break;
                    }
                }
            });
            Link::Child { child, stdin, lines: rx }
        } else {
            return Err(Error::domain(format!("unsupported scorer endpoint {endpoint:?}")));
        };
        Ok(Self { endpoint: endpoint.to_string(), link: Some(link), timeout })
    }

    fn round_trip(&mut self, request: &str) -> Result<String> {
        let timeout = self.timeout;
        let link = self.link.as_mut().ok_or_else(|| Error::domain("scorer link closed"))?;
        let io = |e: std::io::Error| Error::domain(format!("scorer i/o: {e}"));
        match link {
            Link::Tcp { writer, reader } => {
                writer.write_all(request.as_bytes()).map_err(io)?;
                writer.flush().map_err(io)?;
                let mut line = String::new();
                if reader.read_line(&mut line).map_err(io)? == 0 {
                    return Err(Error::domain("scorer closed the connection"));
                }
                Ok(line)
            }
            Link::Child { stdin, lines, .. } => {
                stdin.write_all(request.as_bytes()).map_err(io)?;
                stdin.flush().map_err(io)?;
                match lines.recv_timeout(timeout) {
                    Ok(line) => line.map_err(io),
                    Err(mpsc::RecvTimeoutError::Timeout) => Err(Error::domain("scorer timed out")),
                    Err(mpsc::RecvTimeoutError::Disconnected) => Err(Error::domain("scorer exited")),
                }
            }
        }
    }
}

impl Scorer for ExternalScorer {
    fn score(&mut self, input: &ScorerInput) -> Result<f64> {
        let mut request = serde_json::to_string(input).expect("scorer input serializes");
        request.push('\n');
        let line = match self.round_trip(&request) {
            Ok(l) => l,
            Err(e) => {
                // a timed out link may deliver a stale reply later; drop it
                self.link = None;
                return Err(e);
            }
        };
        let reply: Reply = serde_json::from_str(line.trim())
            .map_err(|e| Error::domain(format!("malformed reply from {}: {e}", self.endpoint)))?;
        Ok(reply.score)
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        if let Some(Link::Child { mut child, stdin, .. }) = self.link.take() {
            drop(stdin);
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;

    fn input(mass: f64, obstacles: f64) -> ScorerInput {
        ScorerInput { visible_counts: vec![0; 5], density_mass: mass, obstacle_fraction: obstacles, altitude: 80.0 }
    }

    #[test]
    fn heuristic_floor_and_ceiling() {
        let mut h = HeuristicScorer::default();
        let fb = HeuristicScorer::default();
        assert_eq!(score_location(&input(0.0, 0.0), &mut h, &fb).unwrap(), 0.0);
        assert_eq!(score_location(&input(5.0, 0.0), &mut h, &fb).unwrap(), 1.0);
        assert_eq!(score_location(&input(50.0, 0.0), &mut h, &fb).unwrap(), 1.0);
    }

    #[test]
    fn half_score_does_not_descend() {
        let mut h = HeuristicScorer::default();
        let s = score_location(&input(2.5, 0.0), &mut h, &HeuristicScorer::default()).unwrap();
        assert_eq!(s, 0.5);
        assert!(!descends(s));
        assert!(descends(0.500001));
    }

    #[test]
    fn invalid_input_is_rejected() {
        let mut h = HeuristicScorer::default();
        assert!(score_location(&input(1.0, 1.5), &mut h, &HeuristicScorer::default()).is_err());
    }

    struct Broken;
    impl Scorer for Broken {
        fn score(&mut self, _: &ScorerInput) -> Result<f64> {
            Err(Error::domain("down"))
        }
    }

    #[test]
    fn failure_falls_back_to_heuristic() {
        let s = score_location(&input(10.0, 0.0), &mut Broken, &HeuristicScorer::default()).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn tcp_round_trip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut out = stream;
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let v: serde_json::Value = serde_json::from_str(&line).unwrap();
            assert_eq!(v["altitude"], 80.0);
            out.write_all(b"{\"score\": 0.75}\n").unwrap();
            line.clear();
            reader.read_line(&mut line).unwrap();
            out.write_all(b"not json\n").unwrap();
        });
        let mut ext = ExternalScorer::connect(&format!("tcp://{addr}")).unwrap();
        let fb = HeuristicScorer::default();
        assert_eq!(score_location(&input(0.0, 0.0), &mut ext, &fb).unwrap(), 0.75);
        assert_eq!(score_location(&input(0.0, 0.0), &mut ext, &fb).unwrap(), 0.0);
        server.join().unwrap();
    }

    #[test]
    fn silent_child_times_out() {
        let mut ext = ExternalScorer::connect_with_timeout("exec:sleep 30", Duration::from_millis(200)).unwrap();
        let started = std::time::Instant::now();
        assert!(ext.score(&input(1.0, 0.0)).is_err());
        assert!(started.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn unknown_scheme_is_an_error() {
        assert!(ExternalScorer::connect("udp://x:1").is_err());
    }
}
