//! Client for the newline-delimited JSON embedding protocol.
//!
//! ```text
//! server → {"proto": 1, "dim": d, "encoder": "name"}          (handshake)
//! client → {"id": n, "op": "embed", "texts": [...]}
//! server → {"id": n, "dim": d, "vectors": [[...], ...]}  |  {"id": n, "error": "..."}
//! ```
//!
//! Requests may be pipelined; responses are matched by `id` and may arrive
//! in any order.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::Deserialize;
use serde_json::json;

use super::{EmbeddingProvider, EmbeddingRequest};
use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::text::normalize;

pub const PROTOCOL_VERSION: u64 = 1;
const MAX_TEXTS_PER_REQUEST: usize = 256;

#[derive(Deserialize)]
struct Handshake {
    proto: u64,
    dim: usize,
    encoder: String,
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    #[serde(default)]
    dim: Option<usize>,
    #[serde(default)]
    vectors: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    error: Option<String>,
}

struct ReadHalf {
    lines: Box<dyn BufRead + Send>,
    pending: HashMap<u64, Response>,
}

pub struct RemoteProvider {
    writer: Mutex<Box<dyn Write + Send>>,
    reader: Mutex<ReadHalf>,
    next_id: AtomicU64,
    dim: usize,
    encoder: String,
    child: Option<Mutex<Child>>,
}

impl std::fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("dim", &self.dim)
            .field("encoder", &self.encoder)
            .finish()
    }
}

fn protocol_err(msg: impl std::fmt::Display) -> Error {
    Error::Provider(msg.to_string())
}

impl RemoteProvider {
    /// Performs the handshake over an already-open byte stream.
    pub fn from_streams<R, W>(reader: R, writer: W) -> Result<Self>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let mut lines: Box<dyn BufRead + Send> = Box::new(BufReader::new(reader));
        let mut first = String::new();
        let n = lines
            .read_line(&mut first)
            .map_err(|e| protocol_err(format!("handshake read failed: {e}")))?;
        if n == 0 {
            return Err(protocol_err("server closed before handshake"));
        }
        let hs: Handshake = serde_json::from_str(first.trim())
            .map_err(|e| protocol_err(format!("bad handshake `{}`: {e}", first.trim())))?;
        if hs.proto != PROTOCOL_VERSION {
            return Err(protocol_err(format!(
                "unsupported protocol version {} (expected {PROTOCOL_VERSION})",
                hs.proto
            )));
        }
        if hs.dim == 0 {
            return Err(protocol_err("handshake announced dimension 0"));
        }
        Ok(Self {
            writer: Mutex::new(Box::new(writer)),
            reader: Mutex::new(ReadHalf {
                lines,
                pending: HashMap::new(),
            }),
            next_id: AtomicU64::new(1),
            dim: hs.dim,
            encoder: hs.encoder,
            child: None,
        })
    }

    /// Connects over TCP to `host:port`.
    pub fn connect(addr: &str) -> Result<Self> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| protocol_err(format!("cannot connect to {addr}: {e}")))?;
        stream
            .set_nodelay(true)
            .map_err(|e| protocol_err(format!("socket setup failed: {e}")))?;
        let read = stream
            .try_clone()
            .map_err(|e| protocol_err(format!("socket clone failed: {e}")))?;
        Self::from_streams(read, stream)
    }

    /// Launches `command` (whitespace-separated program and arguments) and
    /// speaks the protocol over its stdin/stdout.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| protocol_err("empty sidecar command"))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| protocol_err(format!("cannot launch `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut provider = Self::from_streams(stdout, stdin)?;
        provider.child = Some(Mutex::new(child));
        Ok(provider)
    }

    pub fn encoder(&self) -> &str {
        &self.encoder
    }

    fn send(&self, request: &EmbeddingRequest) -> Result<()> {
        let mut line = json!({"id": request.request_id, "op": "embed", "texts": request.texts}).to_string();
        line.push('\n');
        let mut w = self.writer.lock().expect("writer lock poisoned");
        w.write_all(line.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| protocol_err(format!("send failed: {e}")))
    }

    fn await_response(&self, id: u64) -> Result<Response> {
        let mut half = self.reader.lock().expect("reader lock poisoned");
        loop {
            if let Some(r) = half.pending.remove(&id) {
                return Ok(r);
            }
            let mut line = String::new();
            let n = half
                .lines
                .read_line(&mut line)
                .map_err(|e| protocol_err(format!("receive failed: {e}")))?;
            if n == 0 {
                return Err(protocol_err(format!(
                    "connection closed while awaiting response {id}"
                )));
            }
            if line.trim().is_empty() {
                continue;
            }
            let resp: Response = serde_json::from_str(line.trim())
                .map_err(|e| protocol_err(format!("malformed response: {e}")))?;
            if resp.id == id {
                return Ok(resp);
            }
            half.pending.insert(resp.id, resp);
        }
    }

    fn decode(&self, request: &EmbeddingRequest, resp: Response) -> Result<Vec<Embedding>> {
        let id = request.request_id;
        if let Some(err) = resp.error {
            return Err(protocol_err(format!("request {id} failed: {err}")));
        }
        if let Some(d) = resp.dim {
            if d != self.dim {
                return Err(protocol_err(format!(
                    "request {id}: dimension changed mid-session ({} -> {d})",
                    self.dim
                )));
            }
        }
        let vectors = resp
            .vectors
            .ok_or_else(|| protocol_err(format!("request {id}: response has no vectors")))?;
        if vectors.len() != request.texts.len() {
            return Err(protocol_err(format!(
                "request {id}: sent {} texts, received {} vectors",
                request.texts.len(),
                vectors.len()
            )));
        }
        vectors
            .into_iter()
            .zip(&request.texts)
            .map(|(v, text)| {
                if v.len() != self.dim {
                    return Err(protocol_err(format!(
                        "request {id}: vector of dimension {} (session dimension {})",
                        v.len(),
                        self.dim
                    )));
                }
                let f: Vec<f32> = v.iter().map(|&x| x as f32).collect();
                Embedding::from_f32(&f)
                    .map_err(|e| protocol_err(format!("request {id}, text `{text}`: {e}")))
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn identity(&self) -> String {
        format!("remote:{}", self.encoder)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let normalized: Vec<String> = texts.iter().map(|t| normalize(t)).collect();
        let requests = normalized
            .chunks(MAX_TEXTS_PER_REQUEST)
            .map(|chunk| {
                let id = self.next_id.fetch_add(1, Ordering::Relaxed);
                EmbeddingRequest::new(id, chunk.to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        for r in &requests {
            self.send(r)?;
        }
        let mut out = Vec::with_capacity(texts.len());
        for r in &requests {
            let resp = self.await_response(r.request_id)?;
            out.extend(self.decode(r, resp)?);
        }
        Ok(out)
    }
}

impl Drop for RemoteProvider {
    fn drop(&mut self) {
        if let Some(child) = &self.child {
            if let Ok(mut c) = child.lock() {
                let _ = c.kill();
                let _ = c.wait();
            }
        }
    }
}
