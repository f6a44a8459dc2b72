//! Blocking client for the stream server.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::envelope::{ClientEnvelope, ServerEnvelope};
use super::ServerError;
use crate::chunk::Chunk;

pub struct StreamClient {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl StreamClient {
    pub fn connect(
        addr: impl ToSocketAddrs,
        timeout: Option<Duration>,
    ) -> Result<Self, ServerError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(timeout)?;
        Ok(StreamClient {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    /// Sends one envelope without waiting for the reply.
    pub fn send(&mut self, env: &ClientEnvelope) -> Result<(), ServerError> {
        self.send_raw(&serde_json::to_string(env).expect("envelope serializes"))
    }

    /// Sends an arbitrary line, for exercising malformed input.
    pub fn send_raw(&mut self, line: &str) -> Result<(), ServerError> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<ServerEnvelope, ServerError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(ServerError::Closed);
        }
        serde_json::from_str(&line)
            .map_err(|e| ServerError::Protocol(format!("{e}: {}", line.trim())))
    }

    /// Sends `env` and reads the single reply.
    pub fn request(&mut self, env: &ClientEnvelope) -> Result<ServerEnvelope, ServerError> {
        self.send(env)?;
        self.recv()
    }

    /// Closes `session` and reads replies up to and including the metrics
    /// envelope (or the lone final/error reply when there is none).
    pub fn close(&mut self, session: &str) -> Result<Vec<ServerEnvelope>, ServerError> {
        self.send(&ClientEnvelope::Close {
            session: session.to_string(),
        })?;
        let first = self.recv()?;
        let has_metrics = matches!(
            &first,
            ServerEnvelope::Commit {
                is_final: true,
                status: None,
                ..
            }
        );
        let mut out = vec![first];
        if has_metrics {
            out.push(self.recv()?);
        }
        Ok(out)
    }

    /// Runs a whole session and returns every reply after `opened`.
    pub fn run_session(
        &mut self,
        session: &str,
        backend: Option<&str>,
        chunks: &[Chunk],
    ) -> Result<Vec<ServerEnvelope>, ServerError> {
        let duration = chunks.first().map(|c| c.duration_s);
        match self.request(&ClientEnvelope::Open {
            session: session.to_string(),
            chunk_duration_s: duration,
            agreement_depth: None,
            backend: backend.map(String::from),
        })? {
            ServerEnvelope::Opened { .. } => {}
            other => return Err(ServerError::Refused(other)),
        }
        let mut out = Vec::with_capacity(chunks.len() + 2);
        for chunk in chunks {
            let reply = self.request(&ClientEnvelope::chunk(session, chunk))?;
            let failed = matches!(reply, ServerEnvelope::Error { .. });
            out.push(reply);
            if failed {
                return Ok(out);
            }
        }
        out.extend(self.close(session)?);
        Ok(out)
    }
}
