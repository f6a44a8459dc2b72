use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chunkstream::chunk::Chunk;
use chunkstream::decoder::DecoderServer;
use chunkstream::server::{
    BackendRegistry, ServerEnvelope, ServerLimits, StreamClient, StreamServer,
};

use crate::{DecoderServeArgs, ServeArgs, StreamArgs};

pub fn serve(args: ServeArgs) -> Result<ExitCode> {
    let mut registry = BackendRegistry::new();
    for spec in &args.backend {
        registry.register_spec(spec)?;
    }
    let limits = ServerLimits {
        max_sessions: args.max_sessions,
        max_chunk_size: args.max_chunk,
    };
    let server = StreamServer::bind(args.bind.as_str(), registry.clone(), limits)
        .with_context(|| format!("binding {}", args.bind))?;
    eprintln!(
        "listening on {} with backends {:?}",
        server.local_addr(),
        registry.names()
    );
    server.join();
    Ok(ExitCode::SUCCESS)
}

pub fn decoder_serve(args: DecoderServeArgs) -> Result<ExitCode> {
    let mut registry = BackendRegistry::new();
    let name = registry.register_spec(&args.backend)?;
    let factory = registry.get(&name).expect("just registered").clone();
    let server = DecoderServer::bind(args.bind.as_str(), factory)
        .with_context(|| format!("binding {}", args.bind))?;
    eprintln!("decoder `{name}` listening on {}", server.local_addr());
    server.join();
    Ok(ExitCode::SUCCESS)
}

/// Reads a WAV file into chunks of raw little-endian sample bytes.
fn wav_chunks(path: &std::path::Path, chunk_s: f64) -> Result<Vec<Chunk>> {
    let mut reader =
        hound::WavReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let spec = reader.spec();
    let mut bytes = Vec::new();
    match spec.sample_format {
        hound::SampleFormat::Int => {
            for s in reader.samples::<i32>() {
                let s = s?;
                match spec.bits_per_sample {
                    8 => bytes.push(s as i8 as u8),
                    16 => bytes.extend_from_slice(&(s as i16).to_le_bytes()),
                    24 => bytes.extend_from_slice(&s.to_le_bytes()[..3]),
                    _ => bytes.extend_from_slice(&s.to_le_bytes()),
                }
            }
        }
        hound::SampleFormat::Float => {
            for s in reader.samples::<f32>() {
                bytes.extend_from_slice(&s?.to_le_bytes());
            }
        }
    }
    let frame_bytes = spec.channels as usize * (spec.bits_per_sample as usize).div_ceil(8);
    let frames_per_chunk = (spec.sample_rate as f64 * chunk_s).round() as usize;
    if frames_per_chunk == 0 {
        bail!(
            "chunk of {chunk_s} s holds no frames at {} Hz",
            spec.sample_rate
        );
    }
    Ok(Chunk::split_frames(
        &bytes,
        frames_per_chunk * frame_bytes,
        chunk_s,
    ))
}

pub fn stream(args: StreamArgs) -> Result<ExitCode> {
    let chunks = wav_chunks(&args.wav_frames, args.chunk)?;
    let mut client = StreamClient::connect(args.connect.as_str(), Some(Duration::from_secs(60)))
        .with_context(|| format!("connecting to {}", args.connect))?;
    let replies = client.run_session(&args.session, args.backend.as_deref(), &chunks)?;
    let mut failed = false;
    for reply in &replies {
        failed |= matches!(
            reply,
            ServerEnvelope::Error { .. } | ServerEnvelope::Rejected { .. }
        );
        println!("{}", serde_json::to_string(reply)?);
    }
    Ok(if failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}
