//! Local-agreement simultaneous translation: the commit policy, decoder
//! backends, metrics, corpus mixing, the evaluation harness and a streaming
//! server.

pub mod chunk;
pub mod corpus;
pub mod decoder;
pub mod harness;
pub mod metrics;
pub mod policy;
pub mod server;
pub mod tokens;
