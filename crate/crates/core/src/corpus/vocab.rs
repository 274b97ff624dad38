use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledExample, ParsedSentence};
use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Word and dependency-label indices.
///
/// Words reserve index 0 for padding and 1 for unknown; labels reserve 0 for
/// unknown. Unseen keys map to the unknown index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabLists", into = "VocabLists")]
pub struct Vocab {
    words: Vec<String>,
    labels: Vec<String>,
    word_index: HashMap<String, usize>,
    label_index: HashMap<String, usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct VocabLists {
    words: Vec<String>,
    labels: Vec<String>,
}

impl TryFrom<VocabLists> for Vocab {
    type Error = Error;

    fn try_from(v: VocabLists) -> Result<Self> {
        Vocab::from_lists(v.words, v.labels)
    }
}

impl From<Vocab> for VocabLists {
    fn from(v: Vocab) -> Self {
        VocabLists { words: v.words, labels: v.labels }
    }
}

impl Vocab {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;
    pub const UNK_LABEL: usize = 0;

    /// Counts tokens over the examples. Words reaching `min_count` are indexed
    /// by descending frequency with ties in first-occurrence order; every
    /// dependency label is indexed in first-occurrence order.
    pub fn build(examples: &[LabeledExample], min_count: usize) -> Self {
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        let mut labels: Vec<String> = vec![UNK_TOKEN.to_string()];
        let mut seen_labels: HashMap<&str, ()> = HashMap::new();
        let mut order = 0;
        for ex in examples {
            for tok in ex.sentence.tokens() {
                let e = counts.entry(tok.as_str()).or_insert_with(|| {
                    order += 1;
                    (0, order)
                });
                e.0 += 1;
            }
            for label in ex.sentence.dep_labels() {
                if label != UNK_TOKEN && seen_labels.insert(label.as_str(), ()).is_none() {
                    labels.push(label.clone());
                }
            }
        }
        let mut kept: Vec<(&str, usize, usize)> = counts
            .into_iter()
            .filter(|(w, (c, _))| *c >= min_count.max(1) && *w != PAD_TOKEN && *w != UNK_TOKEN)
            .map(|(w, (c, first))| (w, c, first))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let words = [PAD_TOKEN, UNK_TOKEN]
            .into_iter()
            .chain(kept.into_iter().map(|(w, _, _)| w))
            .map(str::to_string)
            .collect();
        Self::from_lists(words, labels).expect("built lists are well-formed")
    }

    /// Rebuilds a vocabulary from its index-ordered lists.
    pub fn from_lists(words: Vec<String>, labels: Vec<String>) -> Result<Self> {
        if words.len() < 2 || words[Self::PAD] != PAD_TOKEN || words[Self::UNK] != UNK_TOKEN {
            return Err(Error::Data("word list must start with <pad>, <unk>".into()));
        }
        if labels.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::Data("label list must start with <unk>".into()));
        }
        let word_index = index_of(&words, "word")?;
        let label_index = index_of(&labels, "label")?;
        Ok(Self { words, labels, word_index, label_index })
    }

    /// `V`, including reserved rows.
    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    /// `V'`, including the reserved row.
    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn word_id(&self, word: &str) -> usize {
        self.word_index.get(word).copied().unwrap_or(Self::UNK)
    }

    pub fn label_id(&self, label: &str) -> usize {
        self.label_index.get(label).copied().unwrap_or(Self::UNK_LABEL)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn word_ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.word_id(t)).collect()
    }
}

fn index_of(items: &[String], kind: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        if map.insert(item.clone(), i).is_some() {
            return Err(Error::Data(format!("duplicate {kind} `{item}` in vocabulary")));
        }
    }
    Ok(map)
}

/// Label index of each token's arc to its head (the root carries its own label).
pub fn dep_label_sequence(sentence: &ParsedSentence, vocab: &Vocab) -> Vec<usize> {
    sentence.dep_labels().iter().map(|l| vocab.label_id(l)).collect()
}
