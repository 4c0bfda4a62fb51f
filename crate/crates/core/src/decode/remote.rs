//! Line-delimited JSON bridge to an out-of-process model.
//!
//! ```text
//! -> {"type":"hello"}
//! <- {"type":"vocab","size":N,"eos_id":0,"tokenizer_tag":"..."}
//! -> {"type":"score","example_id":"x","prefix":[..],"candidates":[..]}
//! <- {"type":"scores","example_id":"x","scores":[..]}
//! ```
//!
//! Every field is mandatory and extra fields are rejected. A model that
//! rules a token out sends `null` for it.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde_json::{json, Map, Value};

use super::scorer::{ScoreContext, ScorerError, TokenScorer};
use super::vocab::{TokenId, Vocabulary};

pub const ENDPOINT_ENV: &str = "SQLMARK_SCORER_ENDPOINT";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handshake {
    pub size: usize,
    pub eos_id: TokenId,
    pub tokenizer_tag: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Request {
    Hello,
    Score { example_id: String, prefix: Vec<TokenId>, candidates: Vec<TokenId> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Response {
    Vocab(Handshake),
    Scores { example_id: String, scores: Vec<Option<f64>> },
}

fn violation(msg: impl Into<String>) -> ScorerError {
    ScorerError::ProtocolViolation(msg.into())
}

fn fields(line: &str, kind: &str, expected: &[&str]) -> Result<Map<String, Value>, ScorerError> {
    let v: Value = serde_json::from_str(line).map_err(|e| violation(format!("not JSON: {e}")))?;
    let Value::Object(map) = v else {
        return Err(violation("record is not an object"));
    };
    match map.get("type") {
        Some(Value::String(t)) if t == kind => {}
        other => return Err(violation(format!("expected type `{kind}`, got {other:?}"))),
    }
    for key in map.keys() {
        if key != "type" && !expected.contains(&key.as_str()) {
            return Err(violation(format!("unexpected field `{key}`")));
        }
    }
    for key in expected {
        if !map.contains_key(*key) {
            return Err(violation(format!("missing field `{key}`")));
        }
    }
    Ok(map)
}

fn ids(v: &Value, name: &str) -> Result<Vec<TokenId>, ScorerError> {
    v.as_array()
        .ok_or_else(|| violation(format!("`{name}` is not an array")))?
        .iter()
        .map(|x| {
            x.as_u64()
                .and_then(|n| TokenId::try_from(n).ok())
                .ok_or_else(|| violation(format!("`{name}` holds a non-id")))
        })
        .collect()
}

fn string(v: &Value, name: &str) -> Result<String, ScorerError> {
    v.as_str().map(str::to_string).ok_or_else(|| violation(format!("`{name}` is not a string")))
}

impl Request {
    pub fn to_line(&self) -> String {
        match self {
            Request::Hello => json!({"type": "hello"}).to_string(),
            Request::Score { example_id, prefix, candidates } => json!({
                "type": "score", "example_id": example_id, "prefix": prefix, "candidates": candidates
            })
            .to_string(),
        }
    }

    pub fn parse(line: &str) -> Result<Self, ScorerError> {
        let v: Value = serde_json::from_str(line).map_err(|e| violation(format!("not JSON: {e}")))?;
        match v.get("type").and_then(Value::as_str) {
            Some("hello") => {
                fields(line, "hello", &[])?;
                Ok(Request::Hello)
            }
            Some("score") => {
                let m = fields(line, "score", &["example_id", "prefix", "candidates"])?;
                Ok(Request::Score {
                    example_id: string(&m["example_id"], "example_id")?,
                    prefix: ids(&m["prefix"], "prefix")?,
                    candidates: ids(&m["candidates"], "candidates")?,
                })
            }
            other => Err(violation(format!("unknown request type {other:?}"))),
        }
    }
}

impl Response {
    pub fn to_line(&self) -> String {
        match self {
            Response::Vocab(h) => json!({
                "type": "vocab", "size": h.size, "eos_id": h.eos_id, "tokenizer_tag": h.tokenizer_tag
            })
            .to_string(),
            Response::Scores { example_id, scores } => {
                json!({"type": "scores", "example_id": example_id, "scores": scores}).to_string()
            }
        }
    }

    fn parse_vocab(line: &str) -> Result<Handshake, ScorerError> {
        let m = fields(line, "vocab", &["size", "eos_id", "tokenizer_tag"])?;
        let size = m["size"].as_u64().ok_or_else(|| violation("`size` is not a count"))? as usize;
        let eos_id = m["eos_id"]
            .as_u64()
            .and_then(|n| TokenId::try_from(n).ok())
            .ok_or_else(|| violation("`eos_id` is not an id"))?;
        Ok(Handshake { size, eos_id, tokenizer_tag: string(&m["tokenizer_tag"], "tokenizer_tag")? })
    }

    fn parse_scores(line: &str) -> Result<(String, Vec<Option<f64>>), ScorerError> {
        let m = fields(line, "scores", &["example_id", "scores"])?;
        let scores = m["scores"]
            .as_array()
            .ok_or_else(|| violation("`scores` is not an array"))?
            .iter()
            .map(|x| match x {
                Value::Null => Ok(None),
                x => x.as_f64().map(Some).ok_or_else(|| violation("`scores` holds a non-number")),
            })
            .collect::<Result<_, _>>()?;
        Ok((string(&m["example_id"], "example_id")?, scores))
    }
}

trait Transport: Send {
    fn send(&mut self, line: &str) -> Result<(), ScorerError>;
    fn recv(&mut self) -> Result<String, ScorerError>;
}

struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

fn io_err(e: std::io::Error) -> ScorerError {
    match e.kind() {
        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => ScorerError::Timeout,
        _ => ScorerError::Transport(e.to_string()),
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, line: &str) -> Result<(), ScorerError> {
        writeln!(self.writer, "{line}").and_then(|_| self.writer.flush()).map_err(io_err)
    }

    fn recv(&mut self) -> Result<String, ScorerError> {
        let mut line = String::new();
        match self.reader.read_line(&mut line).map_err(io_err)? {
            0 => Err(ScorerError::Transport("connection closed".into())),
            _ => Ok(line.trim_end().to_string()),
        }
    }
}

struct ChildTransport {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl Transport for ChildTransport {
    fn send(&mut self, line: &str) -> Result<(), ScorerError> {
        writeln!(self.stdin, "{line}").and_then(|_| self.stdin.flush()).map_err(io_err)
    }

    fn recv(&mut self) -> Result<String, ScorerError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(io_err(e)),
            Err(RecvTimeoutError::Timeout) => Err(ScorerError::Timeout),
            Err(RecvTimeoutError::Disconnected) => Err(ScorerError::Transport("scorer process exited".into())),
        }
    }
}

impl Drop for ChildTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// [`TokenScorer`] proxy for a model served over the line protocol.
pub struct RemoteScorer {
    transport: Box<dyn Transport>,
    handshake: Handshake,
}

impl std::fmt::Debug for RemoteScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteScorer").field("handshake", &self.handshake).finish()
    }
}

impl RemoteScorer {
    /// `tcp:HOST:PORT` (or bare `HOST:PORT`) connects to a socket;
    /// `cmd:PROGRAM ARGS...` spawns a process and talks over its stdio.
    pub fn connect(endpoint: &str, timeout: Duration) -> Result<Self, ScorerError> {
        let transport: Box<dyn Transport> = if let Some(cmd) = endpoint.strip_prefix("cmd:") {
            let mut parts = cmd.split_whitespace();
            let program = parts.next().ok_or_else(|| ScorerError::Transport("empty command".into()))?;
            let mut child = Command::new(program)
                .args(parts)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(|e| ScorerError::Transport(format!("{program}: {e}")))?;
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
            Box::new(ChildTransport { child, stdin, lines: rx, timeout })
        } else {
            let addr = endpoint.strip_prefix("tcp:").unwrap_or(endpoint);
            let stream = TcpStream::connect(addr).map_err(|e| ScorerError::Transport(format!("{addr}: {e}")))?;
            stream.set_read_timeout(Some(timeout)).map_err(io_err)?;
            // one small line per step; don't let Nagle hold it back
            stream.set_nodelay(true).map_err(io_err)?;
            let writer = stream.try_clone().map_err(io_err)?;
            Box::new(TcpTransport { reader: BufReader::new(stream), writer })
        };
        Self::handshake(transport)
    }

    fn handshake(mut transport: Box<dyn Transport>) -> Result<Self, ScorerError> {
        transport.send(&Request::Hello.to_line())?;
        let handshake = Response::parse_vocab(&transport.recv()?)?;
        if handshake.eos_id as usize >= handshake.size {
            return Err(violation("eos_id outside the vocabulary"));
        }
        Ok(Self { transport, handshake })
    }

    pub fn handshake_info(&self) -> &Handshake {
        &self.handshake
    }

    /// Fails unless the remote vocabulary has the local size and EOS id.
    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<(), ScorerError> {
        if self.handshake.size != vocab.len() || self.handshake.eos_id != vocab.eos() {
            return Err(violation(format!(
                "remote vocabulary ({} tokens, eos {}) differs from the local one ({} tokens, eos {})",
                self.handshake.size,
                self.handshake.eos_id,
                vocab.len(),
                vocab.eos()
            )));
        }
        Ok(())
    }
}

impl TokenScorer for RemoteScorer {
    fn vocab_size(&self) -> usize {
        self.handshake.size
    }

    fn eos_id(&self) -> TokenId {
        self.handshake.eos_id
    }

    fn score(&mut self, ctx: &ScoreContext<'_>, prefix: &[TokenId], candidates: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        let req = Request::Score {
            example_id: ctx.example_id.to_string(),
            prefix: prefix.to_vec(),
            candidates: candidates.to_vec(),
        };
        self.transport.send(&req.to_line())?;
        let (example_id, scores) = Response::parse_scores(&self.transport.recv()?)?;
        if example_id != ctx.example_id {
            return Err(violation(format!("answer for `{example_id}`, asked about `{}`", ctx.example_id)));
        }
        if scores.len() != candidates.len() {
            return Err(violation(format!("{} scores for {} candidates", scores.len(), candidates.len())));
        }
        Ok(scores.into_iter().map(|s| s.unwrap_or(f64::NEG_INFINITY)).collect())
    }
}

/// Serves `scorer` over the protocol until the reader is exhausted.
///
/// The example id is passed through; the source input is empty, so only
/// scorers that ignore it (oracles, scripted or random scorers) can be
/// served this way.
pub fn serve<R: BufRead, W: Write>(
    scorer: &mut dyn TokenScorer,
    tag: &str,
    reader: R,
    mut writer: W,
) -> std::io::Result<()> {
    let empty = crate::annotate::AnnotatedInput::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match Request::parse(&line) {
            Ok(Request::Hello) => Response::Vocab(Handshake {
                size: scorer.vocab_size(),
                eos_id: scorer.eos_id(),
                tokenizer_tag: tag.to_string(),
            }),
            Ok(Request::Score { example_id, prefix, candidates }) => {
                let ctx = ScoreContext { example_id: &example_id, source: &empty };
                let scores = scorer
                    .score(&ctx, &prefix, &candidates)
                    .map_err(|e| std::io::Error::other(e.to_string()))?;
                Response::Scores {
                    example_id: example_id.clone(),
                    scores: scores.into_iter().map(|s| s.is_finite().then_some(s)).collect(),
                }
            }
            Err(e) => return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())),
        };
        writeln!(writer, "{}", response.to_line())?;
        writer.flush()?;
    }
    Ok(())
}
