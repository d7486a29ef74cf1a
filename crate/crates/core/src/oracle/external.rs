//! Wire protocol for external oracle processes.
//!
//! Newline-delimited UTF-8 JSON records. Request:
//! `{"id": <int>, "x": [<float>...]}`; response: `{"id": <int>, "y": <float>}`
//! or `{"id": <int>, "error": <string>}`. Requests may be pipelined and
//! responses may arrive out of order; they are matched by id. Transport is
//! the standard input/output of a child process or a TCP stream.
//!
//! The endpoint can be given programmatically or through the environment
//! variable `SPAMREC_ORACLE` (`cmd:<shell command>` or `tcp:<host:port>`),
//! with the per-request timeout in `SPAMREC_ORACLE_TIMEOUT_MS`.

use super::OracleError;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

/// Environment variable naming the oracle endpoint.
pub const ENDPOINT_ENV: &str = "SPAMREC_ORACLE";
/// Environment variable for the per-request timeout in milliseconds.
pub const TIMEOUT_ENV: &str = "SPAMREC_ORACLE_TIMEOUT_MS";
const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    /// Shell command run as a child process speaking on stdin/stdout.
    Command(String),
    /// TCP address `host:port`.
    Tcp(String),
}

impl Endpoint {
    /// Reads the endpoint from [`ENDPOINT_ENV`].
    pub fn from_env() -> Option<Endpoint> {
        let raw = std::env::var(ENDPOINT_ENV).ok()?;
        Endpoint::parse(&raw)
    }

    pub fn parse(raw: &str) -> Option<Endpoint> {
        if let Some(cmd) = raw.strip_prefix("cmd:") {
            Some(Endpoint::Command(cmd.to_string()))
        } else if let Some(addr) = raw.strip_prefix("tcp:") {
            Some(Endpoint::Tcp(addr.to_string()))
        } else {
            None
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    x: &'a [f64],
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    #[serde(default)]
    y: Option<f64>,
    #[serde(default)]
    error: Option<String>,
}

enum ReaderEvent {
    Line { number: u64, text: String },
    Eof,
    IoError(String),
}

struct Transport {
    writer: Box<dyn Write + Send>,
    events: Receiver<ReaderEvent>,
    /// Responses received for ids not yet awaited.
    stash: HashMap<u64, Result<f64, (u64, String)>>,
    next_id: u64,
    _child: Option<Child>,
}

/// A connection to an external oracle.
pub struct ExternalOracle {
    transport: Mutex<Transport>,
    timeout: Duration,
}

impl ExternalOracle {
    /// Connects to the endpoint (spawning the child process if needed).
    pub fn connect(endpoint: &Endpoint) -> Result<Self, OracleError> {
        let timeout = std::env::var(TIMEOUT_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .map(Duration::from_millis)
            .unwrap_or(Duration::from_millis(DEFAULT_TIMEOUT_MS));
        Self::connect_with_timeout(endpoint, timeout)
    }

    pub fn connect_with_timeout(endpoint: &Endpoint, timeout: Duration) -> Result<Self, OracleError> {
        let (writer, reader, child): (Box<dyn Write + Send>, Box<dyn BufRead + Send>, Option<Child>) =
            match endpoint {
                Endpoint::Command(cmd) => {
                    let mut child = Command::new("sh")
                        .arg("-c")
                        .arg(cmd)
                        .stdin(Stdio::piped())
                        .stdout(Stdio::piped())
                        .spawn()
                        .map_err(|e| OracleError::Transport {
                            id: 0,
                            detail: format!("spawn `{cmd}`: {e}"),
                        })?;
                    let stdin = child.stdin.take().expect("piped stdin");
                    let stdout = child.stdout.take().expect("piped stdout");
                    (Box::new(stdin), Box::new(BufReader::new(stdout)), Some(child))
                }
                Endpoint::Tcp(addr) => {
                    let stream = TcpStream::connect(addr).map_err(|e| OracleError::Transport {
                        id: 0,
                        detail: format!("connect {addr}: {e}"),
                    })?;
                    let reader = stream.try_clone().map_err(|e| OracleError::Transport {
                        id: 0,
                        detail: e.to_string(),
                    })?;
                    (Box::new(stream), Box::new(BufReader::new(reader)), None)
                }
            };

        let (tx, rx) = channel();
        std::thread::spawn(move || {
            let mut reader = reader;
            let mut number = 0u64;
            loop {
                let mut line = String::new();
                number += 1;
                match reader.read_line(&mut line) {
                    Ok(0) => {
                        let _ = tx.send(ReaderEvent::Eof);
                        return;
                    }
                    Ok(_) => {
                        if tx
                            .send(ReaderEvent::Line {
                                number,
                                text: line,
                            })
                            .is_err()
                        {
                            return;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(ReaderEvent::IoError(e.to_string()));
                        return;
                    }
                }
            }
        });

        Ok(ExternalOracle {
            transport: Mutex::new(Transport {
                writer,
                events: rx,
                stash: HashMap::new(),
                next_id: 1,
                _child: child,
            }),
            timeout,
        })
    }

    pub fn query_one(&self, x: &[f64]) -> Result<f64, OracleError> {
        Ok(self.query_batch(std::slice::from_ref(&x.to_vec()))?[0])
    }

    /// Pipelines one request per point and collects the responses by id;
    /// a response carrying an error aborts the batch naming that id.
    pub fn query_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>, OracleError> {
        let mut t = self.transport.lock().unwrap();
        let first_id = t.next_id;
        let mut payload = String::new();
        for (k, x) in points.iter().enumerate() {
            let req = Request {
                id: first_id + k as u64,
                x,
            };
            payload.push_str(&serde_json::to_string(&req).expect("request serialization"));
            payload.push('\n');
        }
        t.next_id += points.len() as u64;
        t.writer
            .write_all(payload.as_bytes())
            .and_then(|_| t.writer.flush())
            .map_err(|e| OracleError::Transport {
                id: first_id,
                detail: e.to_string(),
            })?;

        let mut values = vec![f64::NAN; points.len()];
        let mut missing: Vec<u64> = (0..points.len() as u64).map(|k| first_id + k).collect();
        while !missing.is_empty() {
            // serve from the stash first
            missing.retain(|&id| {
                if let Some(entry) = t.stash.remove(&id) {
                    match entry {
                        Ok(v) => {
                            values[(id - first_id) as usize] = v;
                            false
                        }
                        Err(_) => {
                            t.stash.insert(id, entry);
                            true
                        }
                    }
                } else {
                    true
                }
            });
            if let Some(&id) = missing.first() {
                if let Some(Err((rid, msg))) = t.stash.get(&id) {
                    return Err(OracleError::Remote {
                        id: *rid,
                        message: msg.clone(),
                    });
                }
            }
            if missing.is_empty() {
                break;
            }
            let event = t
                .events
                .recv_timeout(self.timeout)
                .map_err(|e| match e {
                    RecvTimeoutError::Timeout => OracleError::Timeout { id: missing[0] },
                    RecvTimeoutError::Disconnected => OracleError::Transport {
                        id: missing[0],
                        detail: "reader thread terminated".into(),
                    },
                })?;
            match event {
                ReaderEvent::Eof => {
                    return Err(OracleError::Transport {
                        id: missing[0],
                        detail: "connection closed before response".into(),
                    })
                }
                ReaderEvent::IoError(e) => {
                    return Err(OracleError::Transport {
                        id: missing[0],
                        detail: e,
                    })
                }
                ReaderEvent::Line { number, text } => {
                    let trimmed = text.trim();
                    if trimmed.is_empty() {
                        continue;
                    }
                    let resp: Response =
                        serde_json::from_str(trimmed).map_err(|e| OracleError::Protocol {
                            line: number,
                            detail: format!("{e} in {trimmed:?}"),
                        })?;
                    match (resp.y, resp.error) {
                        (Some(v), None) => {
                            if resp.id >= first_id && resp.id < first_id + points.len() as u64 {
                                values[(resp.id - first_id) as usize] = v;
                                missing.retain(|&m| m != resp.id);
                            } else {
                                t.stash.insert(resp.id, Ok(v));
                            }
                        }
                        (_, Some(msg)) => {
                            return Err(OracleError::Remote {
                                id: resp.id,
                                message: msg,
                            })
                        }
                        (None, None) => {
                            return Err(OracleError::Protocol {
                                line: number,
                                detail: "response carries neither y nor error".into(),
                            })
                        }
                    }
                }
            }
        }
        Ok(values)
    }
}
