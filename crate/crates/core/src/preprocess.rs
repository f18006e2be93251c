//! Placeholder-token removal and whitespace normalization for tweet text.
//!
//! Matching is on whole whitespace-delimited tokens and is case-sensitive:
//! `URL` is removed, `URLS` and `url` are not. Nothing else about the text is
//! touched, so Arabic script, emoji and punctuation pass through verbatim.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const DEFAULT_NOISE_TOKENS: [&str; 3] = ["USER", "NUM", "URL"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    pub noise_tokens: Vec<String>,
    pub collapse_whitespace: bool,
    pub trim: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            noise_tokens: DEFAULT_NOISE_TOKENS.iter().map(|s| s.to_string()).collect(),
            collapse_whitespace: true,
            trim: true,
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        for token in &self.noise_tokens {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(Error::validation(format!(
                    "noise token {token:?} must be non-empty and contain no whitespace"
                )));
            }
        }
        Ok(())
    }

    fn is_noise(&self, token: &str) -> bool {
        self.noise_tokens.iter().any(|t| t == token)
    }
}

/// Counters gathered while cleaning a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningStats {
    pub examples: usize,
    pub tokens_removed: usize,
    pub emptied: usize,
}

pub fn clean_text(text: &str, config: &CleaningConfig) -> String {
    clean_text_counted(text, config).0
}

/// Like [`clean_text`], also returning how many noise tokens were deleted.
pub fn clean_text_counted(text: &str, config: &CleaningConfig) -> (String, usize) {
    let mut out = String::with_capacity(text.len());
    let mut removed = 0;
    let mut rest = text;
    while !rest.is_empty() {
        let ws_len = rest
            .char_indices()
            .find(|(_, c)| !c.is_whitespace())
            .map_or(rest.len(), |(i, _)| i);
        let (ws, tail) = rest.split_at(ws_len);
        if !ws.is_empty() {
            if config.collapse_whitespace {
                if !out.ends_with(' ') {
                    out.push(' ');
                }
            } else {
                out.push_str(ws);
            }
        }
        let tok_len = tail
            .char_indices()
            .find(|(_, c)| c.is_whitespace())
            .map_or(tail.len(), |(i, _)| i);
        let (token, tail) = tail.split_at(tok_len);
        if !token.is_empty() {
            if config.is_noise(token) {
                removed += 1;
            } else {
                out.push_str(token);
            }
        }
        rest = tail;
    }
    if config.trim {
        let trimmed = out.trim();
        if trimmed.len() != out.len() {
            out = trimmed.to_owned();
        }
    }
    (out, removed)
}

pub fn clean_corpus(corpus: &Corpus, config: &CleaningConfig) -> Corpus {
    clean_corpus_with_stats(corpus, config).0
}

pub fn clean_corpus_with_stats(corpus: &Corpus, config: &CleaningConfig) -> (Corpus, CleaningStats) {
    let mut stats = CleaningStats {
        examples: corpus.len(),
        ..Default::default()
    };
    let cleaned = corpus.map_content(|content| {
        let (text, removed) = clean_text_counted(content, config);
        stats.tokens_removed += removed;
        if text.is_empty() {
            stats.emptied += 1;
        }
        text
    });
    (cleaned, stats)
}
