//! CoNLL-U reader for the ID, FORM, HEAD and DEPREL columns.

use crate::corpus::ParsedSentence;
use crate::error::{Error, Result};

struct Pending {
    tokens: Vec<String>,
    heads: Vec<usize>,
    labels: Vec<String>,
    lines: Vec<usize>,
}

impl Pending {
    fn new() -> Self {
        Self { tokens: vec![], heads: vec![], labels: vec![], lines: vec![] }
    }

    fn finish(self) -> Result<Option<ParsedSentence>> {
        let n = self.tokens.len();
        if n == 0 {
            return Ok(None);
        }
        for (i, &h) in self.heads.iter().enumerate() {
            if h > n || h == i + 1 {
                return Err(Error::Parse {
                    line: self.lines[i],
                    msg: format!("head {h} out of range for a {n}-token sentence"),
                });
            }
        }
        ParsedSentence::new(self.tokens, self.heads, self.labels).map(Some)
    }
}

/// Parses CoNLL-U text into sentences.
///
/// Comment lines, multiword-token ranges (`3-4`) and empty nodes (`5.1`) are
/// skipped. Token ids must run contiguously from 1 within each sentence.
pub fn parse_conllu(text: &str) -> Result<Vec<ParsedSentence>> {
    let mut out = Vec::new();
    let mut cur = Pending::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(s) = std::mem::replace(&mut cur, Pending::new()).finish()? {
                out.push(s);
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 8 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected at least 8 tab-separated fields, found {}", fields.len()),
            });
        }
        let id = fields[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("token id `{id}` is not an integer"),
        })?;
        if id != cur.tokens.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("token id {id} breaks the sequence (expected {})", cur.tokens.len() + 1),
            });
        }
        let head: usize = fields[6].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("head `{}` is not an integer", fields[6]),
        })?;
        cur.tokens.push(fields[1].to_string());
        cur.heads.push(head);
        cur.labels.push(fields[7].to_string());
        cur.lines.push(line_no);
    }
    if let Some(s) = cur.finish()? {
        out.push(s);
    }
    Ok(out)
}

/// Writes sentences back out as CoNLL-U, filling unused columns with `_`.
pub fn to_conllu(sentences: &[ParsedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (i, ((tok, head), label)) in s.tokens().iter().zip(s.heads()).zip(s.dep_labels()).enumerate() {
            out.push_str(&format!("{}\t{tok}\t_\t_\t_\t_\t{head}\t{label}\t_\t_\n", i + 1));
        }
        out.push('\n');
    }
    out
}
