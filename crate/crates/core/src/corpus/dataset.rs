//! Line-delimited JSON datasets with the parse carried inline.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledExample, ParsedSentence, Polarity};
use crate::error::{Error, Result};

/// One dataset line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub tokens: Vec<String>,
    pub heads: Vec<usize>,
    pub dep_labels: Vec<String>,
    pub aspect_from: usize,
    pub aspect_to: usize,
    pub polarity: String,
}

impl DatasetRecord {
    pub fn into_example(self) -> Result<LabeledExample> {
        let polarity: Polarity = self.polarity.parse()?;
        let sentence = ParsedSentence::new(self.tokens, self.heads, self.dep_labels)?;
        LabeledExample::new(sentence, self.aspect_from, self.aspect_to, polarity)
    }
}

impl From<&LabeledExample> for DatasetRecord {
    fn from(ex: &LabeledExample) -> Self {
        Self {
            tokens: ex.sentence.tokens().to_vec(),
            heads: ex.sentence.heads().to_vec(),
            dep_labels: ex.sentence.dep_labels().to_vec(),
            aspect_from: ex.aspect_from,
            aspect_to: ex.aspect_to,
            polarity: ex.polarity.as_str().to_string(),
        }
    }
}

/// Parses dataset text; blank lines are ignored.
pub fn parse_dataset(text: &str) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let wrap = |msg: String| Error::Parse { line: i + 1, msg };
        let record: DatasetRecord = serde_json::from_str(line).map_err(|e| wrap(e.to_string()))?;
        let example = record.into_example().map_err(|e| match e {
            Error::Data(msg) => wrap(msg),
            other => wrap(other.to_string()),
        })?;
        out.push(example);
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledExample>> {
    parse_dataset(&fs::read_to_string(path)?)
}

/// Serializes examples in the format [`parse_dataset`] reads.
pub fn write_dataset(examples: &[LabeledExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&serde_json::to_string(&DatasetRecord::from(ex)).expect("record serializes"));
        out.push('\n');
    }
    out
}
