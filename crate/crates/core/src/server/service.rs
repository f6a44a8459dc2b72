//! The streaming service: one thread per connection, any number of
//! sequential or interleaved sessions per connection.
//!
//! Each connection runs a read-process-reply loop, so a session never has
//! more than one chunk in flight: the next line is not read until the reply
//! to the current one has been written.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use log::{debug, info, warn};

use super::envelope::{chunk_payload, ClientEnvelope, ServerEnvelope, STATUS_EMPTY_SESSION};
use super::registry::BackendRegistry;
use super::ServerError;
use crate::chunk::{Chunk, DEFAULT_CHUNK_SECONDS};
use crate::decoder::IncrementalDecoder;
use crate::metrics::{latency_seconds, LatencyLog};
use crate::policy::{PolicyError, SessionConfig, StreamSession, DEFAULT_AGREEMENT_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServerLimits {
    /// Open sessions across all connections.
    pub max_sessions: usize,
    /// Payload bytes (frames) or tokens in one chunk.
    pub max_chunk_size: usize,
}

impl Default for ServerLimits {
    fn default() -> Self {
        ServerLimits {
            max_sessions: 64,
            max_chunk_size: 1 << 20,
        }
    }
}

struct Shared {
    registry: BackendRegistry,
    limits: ServerLimits,
    open_sessions: AtomicUsize,
}

/// Handle to a running stream server. Dropping it stops accepting.
pub struct StreamServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl StreamServer {
    pub fn bind(
        addr: impl ToSocketAddrs,
        registry: BackendRegistry,
        limits: ServerLimits,
    ) -> Result<Self, ServerError> {
        Self::serve(TcpListener::bind(addr)?, registry, limits)
    }

    pub fn serve(
        listener: TcpListener,
        registry: BackendRegistry,
        limits: ServerLimits,
    ) -> Result<Self, ServerError> {
        if registry.is_empty() {
            return Err(ServerError::Config("no backend registered".into()));
        }
        if limits.max_sessions == 0 {
            return Err(ServerError::Config("max_sessions must be positive".into()));
        }
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            registry,
            limits,
            open_sessions: AtomicUsize::new(0),
        });
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = Arc::clone(&stop);
        info!("stream server listening on {addr}");
        let accept = thread::spawn(move || {
            for stream in listener.incoming() {
                if stop_flag.load(Ordering::SeqCst) {
                    break;
                }
                match stream {
                    Ok(stream) => {
                        let shared = Arc::clone(&shared);
                        thread::spawn(move || {
                            let peer = stream.peer_addr().ok();
                            if let Err(e) = handle_connection(stream, &shared) {
                                debug!("connection {peer:?} ended: {e}");
                            }
                        });
                    }
                    Err(e) => warn!("accept failed: {e}"),
                }
            }
        });
        Ok(StreamServer {
            addr,
            stop,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the accept loop exits.
    pub fn join(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for StreamServer {
    fn drop(&mut self) {
        if self.accept.is_some() {
            self.stop_accepting();
        }
    }
}

struct LiveSession {
    session: StreamSession,
    decoder: Box<dyn IncrementalDecoder + Send>,
}

/// Per-connection state. Open sessions hold a slot in the global count,
/// released when they close, abort, or the connection drops.
struct Connection<'a> {
    shared: &'a Shared,
    live: HashMap<String, LiveSession>,
    /// Ids that were closed or aborted; they cannot be reused on this connection.
    ended: HashSet<String>,
}

impl Drop for Connection<'_> {
    fn drop(&mut self) {
        self.shared
            .open_sessions
            .fetch_sub(self.live.len(), Ordering::SeqCst);
    }
}

fn error(session: &str, message: impl Into<String>) -> ServerEnvelope {
    ServerEnvelope::Error {
        session: Some(session.to_string()),
        message: message.into(),
    }
}

fn rejected(session: &str, reason: impl Into<String>) -> ServerEnvelope {
    ServerEnvelope::Rejected {
        session: Some(session.to_string()),
        reason: reason.into(),
    }
}

impl Connection<'_> {
    fn abort(&mut self, session: &str) {
        if self.live.remove(session).is_some() {
            self.shared.open_sessions.fetch_sub(1, Ordering::SeqCst);
        }
        self.ended.insert(session.to_string());
    }

    fn fail(&mut self, session: &str, message: impl Into<String>) -> Vec<ServerEnvelope> {
        self.abort(session);
        vec![error(session, message)]
    }

    fn handle_line(&mut self, line: &str) -> Vec<ServerEnvelope> {
        match serde_json::from_str::<ClientEnvelope>(line) {
            Ok(env) => self.handle(env),
            Err(e) => {
                // Abort the named session if the line says which one it was.
                let session = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("session").and_then(|s| s.as_str()).map(String::from));
                let message = format!("malformed envelope: {e}");
                match session {
                    Some(s) if self.live.contains_key(&s) => self.fail(&s, message),
                    session => vec![ServerEnvelope::Error { session, message }],
                }
            }
        }
    }

    fn handle(&mut self, env: ClientEnvelope) -> Vec<ServerEnvelope> {
        match env {
            ClientEnvelope::Open {
                session,
                chunk_duration_s,
                agreement_depth,
                backend,
            } => vec![self.open(session, chunk_duration_s, agreement_depth, backend)],
            ClientEnvelope::Chunk {
                session,
                index,
                payload,
                tokens,
            } => self.chunk(&session, index, payload.as_deref(), tokens.as_deref()),
            ClientEnvelope::Close { session } => self.close(&session),
        }
    }

    fn open(
        &mut self,
        session: String,
        chunk_duration_s: Option<f64>,
        agreement_depth: Option<usize>,
        backend: Option<String>,
    ) -> ServerEnvelope {
        if self.live.contains_key(&session) || self.ended.contains(&session) {
            return error(&session, "session id already used on this connection");
        }
        let registry = &self.shared.registry;
        let name = match backend.as_deref().or(registry.default_name()) {
            Some(n) => n.to_string(),
            None => return error(&session, "no backend available"),
        };
        let Some(factory) = registry.get(&name) else {
            return error(
                &session,
                format!("unknown backend `{name}`; have {:?}", registry.names()),
            );
        };
        let config = SessionConfig {
            chunk_duration_s: chunk_duration_s.unwrap_or(DEFAULT_CHUNK_SECONDS),
            agreement_depth: agreement_depth.unwrap_or(DEFAULT_AGREEMENT_DEPTH),
            ..SessionConfig::default()
        };
        let stream = match StreamSession::new(config) {
            Ok(s) => s,
            Err(e) => return error(&session, e.to_string()),
        };
        let limit = self.shared.limits.max_sessions;
        let claimed =
            self.shared
                .open_sessions
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| {
                    (n < limit).then_some(n + 1)
                });
        if claimed.is_err() {
            return rejected(
                &session,
                format!("server is at its limit of {limit} sessions"),
            );
        }
        let decoder = match factory() {
            Ok(d) => d,
            Err(e) => {
                self.shared.open_sessions.fetch_sub(1, Ordering::SeqCst);
                return error(&session, format!("backend `{name}` unavailable: {e}"));
            }
        };
        debug!("session {session} opened on backend {name}");
        self.live.insert(
            session.clone(),
            LiveSession {
                session: stream,
                decoder,
            },
        );
        ServerEnvelope::Opened {
            session,
            backend: name,
        }
    }

    fn chunk(
        &mut self,
        session: &str,
        index: u32,
        payload: Option<&str>,
        tokens: Option<&[String]>,
    ) -> Vec<ServerEnvelope> {
        let max = self.shared.limits.max_chunk_size;
        let Some(live) = self.live.get_mut(session) else {
            return vec![error(session, "no open session with this id")];
        };
        let payload = match chunk_payload(payload, tokens) {
            Ok(p) => p,
            Err(e) => return self.fail(session, e),
        };
        if payload.len() > max {
            return vec![rejected(
                session,
                format!("chunk of size {} exceeds the limit of {max}", payload.len()),
            )];
        }
        let duration = live.session.config().chunk_duration_s;
        match live
            .session
            .ingest_chunk(Chunk::new(index, payload, duration), &mut live.decoder)
        {
            Ok(event) => vec![ServerEnvelope::Commit {
                session: session.to_string(),
                tokens: event.map(|e| e.tokens).unwrap_or_default(),
                chunk_index: index,
                is_final: false,
                status: None,
            }],
            Err(e) => {
                warn!("session {session} aborted: {e}");
                self.fail(session, e.to_string())
            }
        }
    }

    fn close(&mut self, session: &str) -> Vec<ServerEnvelope> {
        let Some(mut live) = self.live.remove(session) else {
            let message = if self.ended.contains(session) {
                "session already closed"
            } else {
                "no open session with this id"
            };
            return vec![error(session, message)];
        };
        self.shared.open_sessions.fetch_sub(1, Ordering::SeqCst);
        self.ended.insert(session.to_string());
        let chunks = live.session.chunks_arrived() as u32;
        match live.session.finish() {
            Ok(event) => {
                let log = live.session.commit_log();
                let latency =
                    LatencyLog::from_commits(log, live.session.config().chunk_duration_s, chunks)
                        .ok()
                        .and_then(|l| latency_seconds(&l).ok());
                vec![
                    ServerEnvelope::Commit {
                        session: session.to_string(),
                        tokens: event.map(|e| e.tokens).unwrap_or_default(),
                        chunk_index: chunks,
                        is_final: true,
                        status: None,
                    },
                    ServerEnvelope::Metrics {
                        session: session.to_string(),
                        chunks,
                        tokens: live.session.committed().len(),
                        latency_s: latency,
                    },
                ]
            }
            Err(PolicyError::EmptySession) => vec![ServerEnvelope::Commit {
                session: session.to_string(),
                tokens: Vec::new(),
                chunk_index: 0,
                is_final: true,
                status: Some(STATUS_EMPTY_SESSION.into()),
            }],
            Err(e) => vec![error(session, e.to_string())],
        }
    }
}

fn handle_connection(stream: TcpStream, shared: &Shared) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut conn = Connection {
        shared,
        live: HashMap::new(),
        ended: HashSet::new(),
    };
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for reply in conn.handle_line(&line) {
            serde_json::to_writer(&mut writer, &reply)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
    }
    Ok(())
}
