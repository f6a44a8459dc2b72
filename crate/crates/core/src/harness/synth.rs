//! Seeded synthetic manifests for the toy backend.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::manifest::{EvalManifest, Utterance, UtteranceInput};
use crate::chunk::DEFAULT_CHUNK_SECONDS;
use crate::decoder::{TailGuessMode, ToyTranslatorSpec};
use crate::policy::DEFAULT_AGREEMENT_DEPTH;
use crate::tokens::TokenizerTag;

const VOCAB: usize = 64;
const DIRECTIONS: [&str; 3] = ["xx-en", "yy-en", "zz-en"];

/// `n` utterances of 1..=40 source words, read 1..=3 words per chunk, with
/// references equal to the word-for-word translation. The toy spec guesses
/// its unstable tail at random with a one-chunk horizon.
pub fn synthetic_toy_manifest(n: usize, seed: u64) -> EvalManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word_map: BTreeMap<String, String> = (0..VOCAB)
        .map(|i| (format!("s{i}"), format!("t{i}")))
        .collect();
    let utterances = (0..n)
        .map(|i| {
            let len = rng.gen_range(1..=40);
            let tokens: Vec<String> = (0..len)
                .map(|_| format!("s{}", rng.gen_range(0..VOCAB)))
                .collect();
            let reference = tokens
                .iter()
                .map(|t| word_map[t].as_str())
                .collect::<Vec<_>>()
                .join(" ");
            Utterance {
                id: format!("synth-{i:05}"),
                direction: DIRECTIONS[i % DIRECTIONS.len()].to_string(),
                reference,
                input: UtteranceInput::Tokens {
                    tokens,
                    tokens_per_chunk: rng.gen_range(1..=3),
                },
            }
        })
        .collect();
    EvalManifest {
        chunk_duration_s: DEFAULT_CHUNK_SECONDS,
        agreement_depth: DEFAULT_AGREEMENT_DEPTH,
        tokenizer: TokenizerTag::word(),
        backend: Some("toy".into()),
        toy: Some(ToyTranslatorSpec::new(word_map).with_tail(TailGuessMode::Random, seed, 1)),
        utterances,
        base_dir: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_eval, BackendSpec, Mode, Parallelism};

    #[test]
    fn deterministic_and_valid() {
        let a = synthetic_toy_manifest(20, 7);
        assert_eq!(a, synthetic_toy_manifest(20, 7));
        assert_ne!(a, synthetic_toy_manifest(20, 8));
        a.validate(&BackendSpec::Toy).unwrap();
    }

    #[test]
    fn toy_runs_cleanly() {
        // The final chunk is always inside the horizon, so both modes may
        // end in guesses; only lengths and latency ordering are fixed.
        let m = synthetic_toy_manifest(12, 3);
        let recs = run_eval(
            &m,
            &[Mode::Online, Mode::Offline],
            &BackendSpec::Toy,
            Parallelism::Auto,
        )
        .unwrap();
        for pair in recs.chunks(2) {
            assert!(pair[0].is_ok() && pair[1].is_ok());
            let words = |s: &str| s.split_whitespace().count();
            assert_eq!(words(&pair[1].output), words(&pair[1].reference));
            assert!(pair[0].latency_s <= pair[1].latency_s);
        }
    }
}
