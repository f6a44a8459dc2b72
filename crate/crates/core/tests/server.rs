use std::sync::Arc;
use std::time::Duration;

use chunkstream::chunk::{Chunk, ChunkPayload};
use chunkstream::decoder::{
    nature_transcript, Capabilities, DecodeError, DecoderServer, IncrementalDecoder,
    ScriptedDecoder,
};
use chunkstream::server::{
    BackendRegistry, ClientEnvelope, ServerEnvelope, ServerLimits, StreamClient, StreamServer,
    STATUS_EMPTY_SESSION,
};
use chunkstream::tokens::TokenSequence;

const TIMEOUT: Option<Duration> = Some(Duration::from_secs(10));

/// Returns a hypothesis that ignores the committed prefix from the third call on.
struct Rogue {
    calls: usize,
}

impl IncrementalDecoder for Rogue {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            accepts_frames: true,
            accepts_tokens: true,
            deterministic: true,
            concurrent: false,
        }
    }

    fn decode(
        &mut self,
        _: &[Chunk],
        committed: &TokenSequence,
    ) -> Result<TokenSequence, DecodeError> {
        self.calls += 1;
        if self.calls >= 3 && !committed.is_empty() {
            Ok(TokenSequence::from_words("different words"))
        } else {
            Ok(TokenSequence::from_words("a b c"))
        }
    }
}

fn registry() -> BackendRegistry {
    let mut reg = BackendRegistry::new();
    reg.register_spec("nature").unwrap();
    reg.register(
        "rogue",
        Arc::new(|| Ok(Box::new(Rogue { calls: 0 }) as Box<_>)),
    )
    .unwrap();
    reg
}

fn start(limits: ServerLimits) -> StreamServer {
    StreamServer::bind("127.0.0.1:0", registry(), limits).unwrap()
}

fn frames(n: usize) -> Vec<Chunk> {
    (1..=n)
        .map(|i| Chunk::new(i as u32, ChunkPayload::Frames(vec![i as u8; 4]), 0.5))
        .collect()
}

fn commit(tokens: &[&str], chunk_index: u32, is_final: bool) -> ServerEnvelope {
    ServerEnvelope::Commit {
        session: "s".into(),
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        chunk_index,
        is_final,
        status: None,
    }
}

fn open(session: &str, backend: &str) -> ClientEnvelope {
    ClientEnvelope::Open {
        session: session.into(),
        chunk_duration_s: Some(0.5),
        agreement_depth: None,
        backend: Some(backend.into()),
    }
}

#[test]
fn nature_fixture_over_the_wire() {
    let server = start(ServerLimits::default());
    let mut client = StreamClient::connect(server.local_addr(), TIMEOUT).unwrap();
    let replies = client.run_session("s", Some("nature"), &frames(4)).unwrap();
    assert_eq!(
        replies[..5],
        [
            commit(&[], 1, false),
            commit(&["Nature"], 2, false),
            commit(&["can"], 3, false),
            commit(&["tell"], 4, false),
            commit(&["us"], 4, true),
        ]
    );
    let ServerEnvelope::Metrics {
        latency_s,
        tokens,
        chunks,
        ..
    } = &replies[5]
    else {
        panic!("expected metrics, got {:?}", replies[5]);
    };
    assert_eq!((*tokens, *chunks), (4, 4));
    assert_eq!(*latency_s, Some(1.625));
}

#[test]
fn close_right_after_open() {
    let server = start(ServerLimits::default());
    let mut client = StreamClient::connect(server.local_addr(), TIMEOUT).unwrap();
    assert!(matches!(
        client.request(&open("s", "nature")).unwrap(),
        ServerEnvelope::Opened { .. }
    ));
    let replies = client.close("s").unwrap();
    assert_eq!(
        replies,
        [ServerEnvelope::Commit {
            session: "s".into(),
            tokens: vec![],
            chunk_index: 0,
            is_final: true,
            status: Some(STATUS_EMPTY_SESSION.into()),
        }]
    );
}

#[test]
fn duplicate_close_gives_one_final() {
    let server = start(ServerLimits::default());
    let mut client = StreamClient::connect(server.local_addr(), TIMEOUT).unwrap();
    let replies = client.run_session("s", Some("nature"), &frames(2)).unwrap();
    assert_eq!(replies.iter().filter(|r| r.is_final()).count(), 1);
    let again = client.close("s").unwrap();
    assert_eq!(again.len(), 1);
    assert!(matches!(&again[0], ServerEnvelope::Error { .. }));
    // The id cannot be reopened on this connection either.
    assert!(matches!(
        client.request(&open("s", "nature")).unwrap(),
        ServerEnvelope::Error { .. }
    ));
}

#[test]
fn session_limit_rejects_and_frees_slots() {
    let server = start(ServerLimits {
        max_sessions: 1,
        ..ServerLimits::default()
    });
    let mut a = StreamClient::connect(server.local_addr(), TIMEOUT).unwrap();
    let mut b = StreamClient::connect(server.local_addr(), TIMEOUT).unwrap();
    assert!(matches!(
        a.request(&open("x", "nature")).unwrap(),
        ServerEnvelope::Opened { .. }
    ));
    assert!(matches!(
        b.request(&open("y", "nature")).unwrap(),
        ServerEnvelope::Rejected { .. }
    ));
    a.close("x").unwrap();
    assert!(matches!(
        b.request(&open("y", "nature")).unwrap(),
        ServerEnvelope::Opened { .. }
    ));
    // Dropping a connection releases its sessions.
    drop(b);
    std::thread::sleep(Duration::from_millis(100));
    assert!(matches!(
        a.request(&open("z", "nature")).unwrap(),
        ServerEnvelope::Opened { .. }
    ));
}

#[test]
fn oversized_chunk_rejected_without_losing_the_session() {
    let server = start(ServerLimits {
        max_chunk_size: 4,
        ..ServerLimits::default()
    });
    let mut client = StreamClient::connect(server.local_addr(), TIMEOUT).unwrap();
    client.request(&open("s", "nature")).unwrap();
    let big = Chunk::new(1, ChunkPayload::Frames(vec![0; 5]), 0.5);
    assert!(matches!(
        client.request(&ClientEnvelope::chunk("s", &big)).unwrap(),
        ServerEnvelope::Rejected { .. }
    ));
    let ok = &frames(1)[0];
    assert_eq!(
        client.request(&ClientEnvelope::chunk("s", ok)).unwrap(),
        commit(&[], 1, false)
    );
}

#[test]
fn malformed_and_out_of_order_abort_the_session() {
    let server = start(ServerLimits::default());
    let mut client = StreamClient::connect(server.local_addr(), TIMEOUT).unwrap();
    client.request(&open("s", "nature")).unwrap();
    client
        .send_raw(r#"{"type":"chunk","session":"s","index":"one"}"#)
        .unwrap();
    assert!(matches!(
        client.recv().unwrap(),
        ServerEnvelope::Error {
            session: Some(_),
            ..
        }
    ));
    assert!(matches!(
        client
            .request(&ClientEnvelope::chunk("s", &frames(1)[0]))
            .unwrap(),
        ServerEnvelope::Error { .. }
    ));

    client.request(&open("t", "nature")).unwrap();
    let skipped = &frames(2)[1];
    assert!(matches!(
        client
            .request(&ClientEnvelope::chunk("t", skipped))
            .unwrap(),
        ServerEnvelope::Error { .. }
    ));
    client.send_raw("not json").unwrap();
    assert!(matches!(
        client.recv().unwrap(),
        ServerEnvelope::Error { session: None, .. }
    ));
}

#[test]
fn backend_failure_is_contained() {
    let server = start(ServerLimits::default());
    let mut client = StreamClient::connect(server.local_addr(), TIMEOUT).unwrap();
    client.request(&open("good", "nature")).unwrap();
    client.request(&open("bad", "rogue")).unwrap();
    let chunks = frames(4);
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for c in &chunks {
        good.push(client.request(&ClientEnvelope::chunk("good", c)).unwrap());
        if !matches!(bad.last(), Some(ServerEnvelope::Error { .. })) {
            bad.push(client.request(&ClientEnvelope::chunk("bad", c)).unwrap());
        }
    }
    good.extend(client.close("good").unwrap());
    assert!(
        matches!(bad.last(), Some(ServerEnvelope::Error { message, .. }) if message.contains("does not extend"))
    );

    let mut alone = StreamClient::connect(server.local_addr(), TIMEOUT).unwrap();
    let oracle = alone.run_session("good", Some("nature"), &chunks).unwrap();
    assert_eq!(good, oracle);
}

#[test]
fn remote_backend_behind_stream_server() {
    let decoder = DecoderServer::bind(
        "127.0.0.1:0",
        Arc::new(|| Ok(Box::new(ScriptedDecoder::new(nature_transcript())) as Box<_>)),
    )
    .unwrap();
    let mut reg = BackendRegistry::new();
    reg.register_spec(&format!("remote:{}", decoder.local_addr()))
        .unwrap();
    reg.register_spec("nature").unwrap();
    let server = StreamServer::bind("127.0.0.1:0", reg, ServerLimits::default()).unwrap();
    let mut client = StreamClient::connect(server.local_addr(), TIMEOUT).unwrap();
    let remote = client.run_session("s", None, &frames(4)).unwrap();
    let local = client.run_session("t", Some("nature"), &frames(4)).unwrap();
    let strip = |v: Vec<ServerEnvelope>| -> Vec<String> {
        v.into_iter()
            .map(|e| {
                serde_json::to_string(&e)
                    .unwrap()
                    .replace(r#""session":"t""#, r#""session":"s""#)
            })
            .collect()
    };
    assert_eq!(strip(remote), strip(local));
}
