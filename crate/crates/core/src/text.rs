//! Prompt text utilities: tokenization, phrase splitting and the style lexicon.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CaprError, Result};

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.json");

/// Lowercase whitespace tokens with punctuation stripped from token edges.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Comma-separated phrases, trimmed, empty segments dropped.
pub fn phrases(prompt: &str) -> Vec<&str> {
    prompt
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Number of non-empty comma-separated phrases.
pub fn phrase_count(prompt: &str) -> usize {
    phrases(prompt).len()
}

/// Ordered style vocabulary plus the filler phrases used by the synthetic
/// reformulator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleLexicon {
    pub style_terms: Vec<String>,
    pub fillers: Vec<String>,
    #[serde(skip)]
    hash: String,
}

impl StyleLexicon {
    pub fn from_json(raw: &str) -> Result<Self> {
        let mut lex: StyleLexicon = serde_json::from_str(raw)?;
        if lex.style_terms.is_empty() {
            return Err(CaprError::invalid("style lexicon has no terms"));
        }
        if lex.fillers.is_empty() {
            return Err(CaprError::invalid("style lexicon has no filler phrases"));
        }
        for term in &mut lex.style_terms {
            *term = term.trim().to_lowercase();
        }
        lex.hash = hex_sha256(raw.as_bytes());
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| CaprError::io(path, e))?;
        Self::from_json(&raw)
    }

    /// SHA-256 of the source bytes, hex encoded.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn contains(&self, token: &str) -> bool {
        self.style_terms.iter().any(|t| t == token)
    }

    /// Distinct lexicon terms occurring as tokens of `text`.
    pub fn distinct_terms(&self, text: &str) -> BTreeSet<String> {
        tokenize(text)
            .into_iter()
            .filter(|t| self.contains(t))
            .collect()
    }

    /// Token-level lexicon hits, repeats included.
    pub fn term_hits(&self, text: &str) -> usize {
        tokenize(text).iter().filter(|t| self.contains(t)).count()
    }
}

impl Default for StyleLexicon {
    fn default() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }
}

pub(crate) fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
