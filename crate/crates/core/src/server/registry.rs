//! Named decoder backends a streaming session can select.

use std::path::Path;
use std::sync::Arc;

use super::ServerError;
use crate::decoder::{
    nature_transcript, DecoderFactory, RemoteDecoder, ScriptTranscript, ScriptedDecoder,
    ToyDecoder, ToyTranslatorSpec, DEFAULT_REMOTE_TIMEOUT,
};

#[derive(Clone, Default)]
pub struct BackendRegistry {
    entries: Vec<(String, DecoderFactory)>,
}

impl std::fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        factory: DecoderFactory,
    ) -> Result<(), ServerError> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(ServerError::Config(format!(
                "backend `{name}` registered twice"
            )));
        }
        self.entries.push((name, factory));
        Ok(())
    }

    /// Registers a backend from `[name=]spec`, where spec is one of
    /// `nature`, `scripted:<transcript.json>`, `toy:<spec.json>` or
    /// `remote:<host:port>`. Without a name the spec kind is used.
    pub fn register_spec(&mut self, text: &str) -> Result<String, ServerError> {
        let (name, spec) = match text.split_once('=') {
            Some((n, s)) if !n.is_empty() => (Some(n.to_string()), s),
            _ => (None, text),
        };
        let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
        let factory = factory_for(kind, arg)?;
        let name = name.unwrap_or_else(|| kind.to_string());
        self.register(name.clone(), factory)?;
        Ok(name)
    }

    pub fn get(&self, name: &str) -> Option<&DecoderFactory> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    /// The first registered backend, used when a session names none.
    pub fn default_name(&self) -> Option<&str> {
        self.entries.first().map(|(n, _)| n.as_str())
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn read(path: &str) -> Result<String, ServerError> {
    if path.is_empty() {
        return Err(ServerError::Config("backend spec needs a path".into()));
    }
    std::fs::read_to_string(Path::new(path))
        .map_err(|e| ServerError::Config(format!("{path}: {e}")))
}

fn factory_for(kind: &str, arg: &str) -> Result<DecoderFactory, ServerError> {
    let config = |e: &dyn std::fmt::Display| ServerError::Config(format!("{kind}:{arg}: {e}"));
    Ok(match kind {
        "nature" => Arc::new(|| Ok(Box::new(ScriptedDecoder::new(nature_transcript())) as Box<_>)),
        "scripted" => {
            let transcript = ScriptTranscript::from_json(&read(arg)?).map_err(|e| config(&e))?;
            Arc::new(move || Ok(Box::new(ScriptedDecoder::new(transcript.clone())) as Box<_>))
        }
        "toy" => {
            let spec: ToyTranslatorSpec = serde_json::from_str(&read(arg)?).map_err(|e| config(&e))?;
            Arc::new(move || Ok(Box::new(ToyDecoder::new(spec.clone())) as Box<_>))
        }
        "remote" if !arg.is_empty() => {
            let endpoint = arg.to_string();
            Arc::new(move || {
                RemoteDecoder::connect(endpoint.clone(), DEFAULT_REMOTE_TIMEOUT).map(|d| Box::new(d) as Box<_>)
            })
        }
        _ => {
            return Err(ServerError::Config(format!(
                "unknown backend spec `{kind}:{arg}` (expected nature, scripted:<path>, toy:<path> or remote:<addr>)"
            )))
        }
    })
}
