//! Decoder backend reached over TCP, plus a small server that hosts any
//! in-process decoder behind the same protocol.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, warn};

use super::wire::{decode_input, encode_input, DecodeRequest, DecodeResponse};
use super::{check_extends, Capabilities, DecodeError, IncrementalDecoder};
use crate::chunk::{Chunk, DEFAULT_CHUNK_SECONDS};
use crate::tokens::{TokenSequence, TokenizerTag};

pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(30);

/// Builds one decoder per connection or session.
pub type DecoderFactory =
    Arc<dyn Fn() -> Result<Box<dyn IncrementalDecoder + Send>, DecodeError> + Send + Sync>;

struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

/// Client side of the decoder wire protocol. One request in flight at a time.
pub struct RemoteDecoder {
    endpoint: String,
    timeout: Duration,
    conn: Option<Connection>,
    next_id: u64,
}

impl RemoteDecoder {
    /// Connects to `endpoint` (`host:port`).
    pub fn connect(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, DecodeError> {
        let mut dec = RemoteDecoder {
            endpoint: endpoint.into(),
            timeout,
            conn: None,
            next_id: 1,
        };
        dec.ensure_connected()?;
        Ok(dec)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn transport(&self, e: impl std::fmt::Display) -> DecodeError {
        DecodeError::Transport {
            endpoint: self.endpoint.clone(),
            message: e.to_string(),
        }
    }

    fn ensure_connected(&mut self) -> Result<&mut Connection, DecodeError> {
        if self.conn.is_none() {
            let addrs: Vec<SocketAddr> = self
                .endpoint
                .to_socket_addrs()
                .map_err(|e| self.transport(e))?
                .collect();
            let mut last_err = None;
            let mut stream = None;
            for addr in addrs {
                match TcpStream::connect_timeout(&addr, self.timeout) {
                    Ok(s) => {
                        stream = Some(s);
                        break;
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            let stream = match stream {
                Some(s) => s,
                None => {
                    let e = last_err.unwrap_or_else(|| {
                        io::Error::new(io::ErrorKind::NotFound, "address resolved to nothing")
                    });
                    return Err(self.transport(e));
                }
            };
            stream
                .set_read_timeout(Some(self.timeout))
                .and_then(|()| stream.set_write_timeout(Some(self.timeout)))
                .and_then(|()| stream.set_nodelay(true))
                .map_err(|e| self.transport(e))?;
            let read_half = stream.try_clone().map_err(|e| self.transport(e))?;
            self.conn = Some(Connection {
                reader: BufReader::new(read_half),
                writer: BufWriter::new(stream),
            });
        }
        Ok(self.conn.as_mut().expect("connected above"))
    }

    fn round_trip(&mut self, request: &DecodeRequest) -> Result<DecodeResponse, DecodeError> {
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        let timeout = self.timeout;
        let endpoint = self.endpoint.clone();
        let conn = self.ensure_connected()?;
        let io_result = conn
            .writer
            .write_all(line.as_bytes())
            .and_then(|()| conn.writer.flush())
            .and_then(|()| {
                let mut buf = String::new();
                let n = conn.reader.read_line(&mut buf)?;
                if n == 0 {
                    return Err(io::Error::new(
                        io::ErrorKind::UnexpectedEof,
                        "connection closed by decoder",
                    ));
                }
                Ok(buf)
            });
        let reply = match io_result {
            Ok(buf) => buf,
            Err(e) => {
                // The stream may hold a late reply; start fresh next time.
                self.conn = None;
                return Err(match e.kind() {
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => DecodeError::Timeout {
                        endpoint,
                        after: timeout,
                    },
                    _ => DecodeError::Transport {
                        endpoint,
                        message: e.to_string(),
                    },
                });
            }
        };
        serde_json::from_str(reply.trim_end())
            .map_err(|e| DecodeError::Protocol(format!("malformed response: {e}")))
    }
}

impl IncrementalDecoder for RemoteDecoder {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            accepts_frames: true,
            accepts_tokens: true,
            deterministic: false,
            concurrent: false,
        }
    }

    fn decode(
        &mut self,
        input: &[Chunk],
        committed: &TokenSequence,
    ) -> Result<TokenSequence, DecodeError> {
        let id = self.next_id;
        self.next_id += 1;
        let request = DecodeRequest {
            id,
            committed: committed.tokens().to_vec(),
            input: encode_input(input)?,
        };
        match self.round_trip(&request)? {
            DecodeResponse::Hypothesis { id: got, .. } | DecodeResponse::Error { id: got, .. }
                if got != id =>
            {
                self.conn = None;
                Err(DecodeError::Protocol(format!(
                    "response id {got} does not match request id {id}"
                )))
            }
            DecodeResponse::Error { error, .. } => Err(DecodeError::Backend(error)),
            DecodeResponse::Hypothesis { hypothesis, .. } => {
                let hyp = TokenSequence::new(hypothesis, committed.tag().clone())
                    .map_err(|e| DecodeError::Protocol(format!("bad hypothesis: {e}")))?;
                check_extends(committed, &hyp)?;
                Ok(hyp)
            }
        }
    }
}

/// Handle to a running decoder server. Dropping it stops the accept loop.
pub struct DecoderServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl DecoderServer {
    pub fn bind(addr: impl ToSocketAddrs, factory: DecoderFactory) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        serve_decoder(listener, factory, TokenizerTag::word())
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
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for DecoderServer {
    fn drop(&mut self) {
        if self.accept.is_some() {
            self.stop_accepting();
        }
    }
}

/// Serves `factory`-built decoders over `listener`, one decoder per connection.
pub fn serve_decoder(
    listener: TcpListener,
    factory: DecoderFactory,
    tag: TokenizerTag,
) -> io::Result<DecoderServer> {
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = Arc::clone(&stop);
    let accept = thread::spawn(move || {
        for stream in listener.incoming() {
            if stop_flag.load(Ordering::SeqCst) {
                break;
            }
            match stream {
                Ok(stream) => {
                    let factory = Arc::clone(&factory);
                    let tag = tag.clone();
                    thread::spawn(move || {
                        if let Err(e) = handle_decoder_connection(stream, &factory, &tag) {
                            debug!("decoder connection ended: {e}");
                        }
                    });
                }
                Err(e) => warn!("accept failed: {e}"),
            }
        }
    });
    Ok(DecoderServer {
        addr,
        stop,
        accept: Some(accept),
    })
}

fn handle_decoder_connection(
    stream: TcpStream,
    factory: &DecoderFactory,
    tag: &TokenizerTag,
) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut decoder = match factory() {
        Ok(d) => Some(d),
        Err(e) => {
            warn!("decoder factory failed: {e}");
            None
        }
    };
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<DecodeRequest>(&line) {
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(serde_json::Value::as_u64))
                    .unwrap_or(0);
                DecodeResponse::Error {
                    id,
                    error: format!("malformed request: {e}"),
                }
            }
            Ok(req) => answer(&mut decoder, &req, tag),
        };
        serde_json::to_writer(&mut writer, &response)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

fn answer(
    decoder: &mut Option<Box<dyn IncrementalDecoder + Send>>,
    req: &DecodeRequest,
    tag: &TokenizerTag,
) -> DecodeResponse {
    let result = (|| {
        let decoder = decoder
            .as_mut()
            .ok_or_else(|| DecodeError::Backend("no decoder available".into()))?;
        let chunks = decode_input(&req.input, DEFAULT_CHUNK_SECONDS)?;
        let committed = TokenSequence::new(req.committed.clone(), tag.clone())?;
        decoder.decode(&chunks, &committed)
    })();
    match result {
        Ok(h) => DecodeResponse::Hypothesis {
            id: req.id,
            hypothesis: h.into_tokens(),
        },
        Err(e) => DecodeResponse::Error {
            id: req.id,
            error: e.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::scripted::{nature_transcript, ScriptedDecoder};
    use crate::policy::{run_online, SessionConfig};

    fn scripted_factory() -> DecoderFactory {
        Arc::new(|| Ok(Box::new(ScriptedDecoder::new(nature_transcript())) as Box<_>))
    }

    #[test]
    fn remote_matches_in_process() {
        let server = DecoderServer::bind("127.0.0.1:0", scripted_factory()).unwrap();
        let mut remote =
            RemoteDecoder::connect(server.local_addr().to_string(), DEFAULT_REMOTE_TIMEOUT)
                .unwrap();
        let over_wire = run_online(
            Chunk::placeholders(4, 0.5),
            &mut remote,
            SessionConfig::default(),
        )
        .unwrap();
        let mut local = ScriptedDecoder::new(nature_transcript());
        let in_process = run_online(
            Chunk::placeholders(4, 0.5),
            &mut local,
            SessionConfig::default(),
        )
        .unwrap();
        assert_eq!(over_wire, in_process);
        server.shutdown();
    }

    #[test]
    fn contract_violation_detected_client_side() {
        // A server that ignores the committed prefix.
        struct Liar;
        impl IncrementalDecoder for Liar {
            fn capabilities(&self) -> Capabilities {
                ScriptedDecoder::new(nature_transcript()).capabilities()
            }
            fn decode(
                &mut self,
                _: &[Chunk],
                _: &TokenSequence,
            ) -> Result<TokenSequence, DecodeError> {
                Ok(TokenSequence::from_words("something else"))
            }
        }
        let server =
            DecoderServer::bind("127.0.0.1:0", Arc::new(|| Ok(Box::new(Liar) as Box<_>))).unwrap();
        let mut remote =
            RemoteDecoder::connect(server.local_addr().to_string(), DEFAULT_REMOTE_TIMEOUT)
                .unwrap();
        let err = remote
            .decode(
                &Chunk::placeholders(1, 0.5),
                &TokenSequence::from_words("Nature"),
            )
            .unwrap_err();
        assert!(matches!(err, DecodeError::ContractViolation { .. }));
        assert!(!err.is_retriable());
    }

    #[test]
    fn backend_errors_are_forwarded() {
        let server = DecoderServer::bind("127.0.0.1:0", scripted_factory()).unwrap();
        let mut remote =
            RemoteDecoder::connect(server.local_addr().to_string(), DEFAULT_REMOTE_TIMEOUT)
                .unwrap();
        let empty = TokenSequence::empty(TokenizerTag::word());
        let err = remote
            .decode(&Chunk::placeholders(9, 0.5), &empty)
            .unwrap_err();
        assert!(matches!(err, DecodeError::Backend(m) if m.contains("exhausted")));
    }

    #[test]
    fn connection_refused_names_endpoint() {
        let port = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let endpoint = format!("127.0.0.1:{port}");
        let err = RemoteDecoder::connect(endpoint.clone(), Duration::from_secs(2))
            .err()
            .unwrap();
        assert!(err.is_retriable());
        assert!(err.to_string().contains(&endpoint));
    }

    #[test]
    fn silent_server_times_out() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hold = thread::spawn(move || {
            let (s, _) = listener.accept().unwrap();
            thread::sleep(Duration::from_millis(600));
            drop(s);
        });
        let mut remote =
            RemoteDecoder::connect(addr.to_string(), Duration::from_millis(150)).unwrap();
        let empty = TokenSequence::empty(TokenizerTag::word());
        let err = remote
            .decode(&Chunk::placeholders(1, 0.5), &empty)
            .unwrap_err();
        assert!(matches!(err, DecodeError::Timeout { .. }));
        hold.join().unwrap();
    }
}
