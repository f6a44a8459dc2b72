//! Token sequences tagged with the segmentation scheme that produced them.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tag used for plain whitespace-separated words.
pub const WORD_TAG: &str = "word";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("empty token at position {0}")]
    EmptyToken(usize),
    #[error("tokenizer mismatch: `{left}` vs `{right}`")]
    TagMismatch { left: String, right: String },
}

/// Identifies a segmentation scheme. Sequences are only comparable under equal tags.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenizerTag(String);

impl TokenizerTag {
    pub fn new(tag: impl Into<String>) -> Self {
        TokenizerTag(tag.into())
    }

    pub fn word() -> Self {
        TokenizerTag(WORD_TAG.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for TokenizerTag {
    fn default() -> Self {
        TokenizerTag::word()
    }
}

impl fmt::Display for TokenizerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered list of non-empty text tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<String>,
    tag: TokenizerTag,
}

impl TokenSequence {
    pub fn new<I, S>(tokens: I, tag: TokenizerTag) -> Result<Self, TokenError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if let Some(pos) = tokens.iter().position(|t| t.is_empty()) {
            return Err(TokenError::EmptyToken(pos));
        }
        Ok(TokenSequence { tokens, tag })
    }

    pub fn empty(tag: TokenizerTag) -> Self {
        TokenSequence {
            tokens: Vec::new(),
            tag,
        }
    }

    /// Splits `text` on whitespace into a word-tagged sequence.
    pub fn from_words(text: &str) -> Self {
        TokenSequence {
            tokens: text.split_whitespace().map(str::to_string).collect(),
            tag: TokenizerTag::word(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn tag(&self) -> &TokenizerTag {
        &self.tag
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }

    pub fn check_comparable(&self, other: &TokenSequence) -> Result<(), TokenError> {
        if self.tag == other.tag {
            Ok(())
        } else {
            Err(TokenError::TagMismatch {
                left: self.tag.0.clone(),
                right: other.tag.0.clone(),
            })
        }
    }

    /// True when `prefix` is a prefix of `self`. Sequences with different tags never match.
    pub fn starts_with(&self, prefix: &TokenSequence) -> bool {
        self.tag == prefix.tag && self.tokens.starts_with(&prefix.tokens)
    }

    /// The leading `len` tokens.
    pub fn prefix(&self, len: usize) -> TokenSequence {
        TokenSequence {
            tokens: self.tokens[..len.min(self.tokens.len())].to_vec(),
            tag: self.tag.clone(),
        }
    }

    /// Tokens after the first `len`.
    pub fn suffix_from(&self, len: usize) -> &[String] {
        &self.tokens[len.min(self.tokens.len())..]
    }

    pub fn extend_from_slice(&mut self, tokens: &[String]) {
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));
        self.tokens.extend_from_slice(tokens);
    }

    /// Tokens joined by single spaces.
    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

/// Longest sequence that is a prefix of both `a` and `b`.
pub fn longest_common_prefix(
    a: &TokenSequence,
    b: &TokenSequence,
) -> Result<TokenSequence, TokenError> {
    a.check_comparable(b)?;
    let len = common_prefix_len(&a.tokens, &b.tokens);
    Ok(a.prefix(len))
}

/// Longest common prefix of every sequence in `seqs`; empty input yields `None`.
pub fn longest_common_prefix_all<'a, I>(seqs: I) -> Result<Option<TokenSequence>, TokenError>
where
    I: IntoIterator<Item = &'a TokenSequence>,
{
    let mut iter = seqs.into_iter();
    let Some(first) = iter.next() else {
        return Ok(None);
    };
    let mut len = first.len();
    for seq in iter {
        first.check_comparable(seq)?;
        len = common_prefix_len(&first.tokens[..len], &seq.tokens);
    }
    Ok(Some(first.prefix(len)))
}

fn common_prefix_len(a: &[String], b: &[String]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}
