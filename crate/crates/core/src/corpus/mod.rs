//! Labeled sentences with their dependency parses.

mod adjacency;
mod conllu;
mod dataset;
pub mod synthetic;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adjacency::{build_adjacency, AdjacencyMatrix};
pub use conllu::{parse_conllu, to_conllu};
pub use dataset::{load_dataset, parse_dataset, write_dataset, DatasetRecord};
pub use vocab::{dep_label_sequence, Vocab};

/// Sentiment classes in their fixed order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive = 0,
    Neutral = 1,
    Negative = 2,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Neutral, Polarity::Negative];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Polarity> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Neutral => "neutral",
            Polarity::Negative => "negative",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = Error;

    /// Case-insensitive.
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Data(format!("unknown polarity `{s}`")))
    }
}

/// Tokens with one head (1-based, 0 = root) and one arc label per token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSentence {
    tokens: Vec<String>,
    heads: Vec<usize>,
    dep_labels: Vec<String>,
}

impl ParsedSentence {
    pub fn new(tokens: Vec<String>, heads: Vec<usize>, dep_labels: Vec<String>) -> Result<Self> {
        let n = tokens.len();
        if n == 0 {
            return Err(Error::Data("sentence has no tokens".into()));
        }
        if heads.len() != n || dep_labels.len() != n {
            return Err(Error::Data(format!(
                "length mismatch: {} tokens, {} heads, {} dep_labels",
                n,
                heads.len(),
                dep_labels.len()
            )));
        }
        for (i, &h) in heads.iter().enumerate() {
            if h > n {
                return Err(Error::Data(format!("head {h} of token {} out of range 0..={n}", i + 1)));
            }
            if h == i + 1 {
                return Err(Error::Data(format!("token {} is its own head", i + 1)));
            }
        }
        Ok(Self { tokens, heads, dep_labels })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn dep_labels(&self) -> &[String] {
        &self.dep_labels
    }
}

/// A sentence, an aspect span `[aspect_from, aspect_to)` and the gold polarity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledExample {
    pub sentence: ParsedSentence,
    pub aspect_from: usize,
    pub aspect_to: usize,
    pub polarity: Polarity,
}

impl LabeledExample {
    pub fn new(sentence: ParsedSentence, aspect_from: usize, aspect_to: usize, polarity: Polarity) -> Result<Self> {
        if aspect_from >= aspect_to || aspect_to > sentence.len() {
            return Err(Error::Data(format!(
                "aspect span out of bounds: [{aspect_from}, {aspect_to}) on {} tokens",
                sentence.len()
            )));
        }
        Ok(Self { sentence, aspect_from, aspect_to, polarity })
    }

    pub fn aspect_len(&self) -> usize {
        self.aspect_to - self.aspect_from
    }

    pub fn aspect_tokens(&self) -> &[String] {
        &self.sentence.tokens()[self.aspect_from..self.aspect_to]
    }
}
