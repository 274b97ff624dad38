//! Word and dependency-label embedding tables.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::compute::{Tape, Tensor, Var};
use crate::corpus::Vocab;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub matrix: Tensor,
    pub trainable: bool,
}

impl EmbeddingTable {
    /// Every row drawn from `U(-epsilon, epsilon)`.
    pub fn random<R: Rng + ?Sized>(rows: usize, dim: usize, epsilon: f64, rng: &mut R) -> Self {
        Self { matrix: Tensor::uniform(rows, dim, epsilon, rng), trainable: true }
    }

    /// Word table: random rows with the padding row zeroed.
    pub fn random_words<R: Rng + ?Sized>(vocab: &Vocab, dim: usize, epsilon: f64, rng: &mut R) -> Self {
        let mut t = Self::random(vocab.num_words(), dim, epsilon, rng);
        t.matrix.row_slice_mut(Vocab::PAD).fill(0.0);
        t
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }
}

/// Reads whitespace-separated `token v1 .. v_dim` lines into a word table.
///
/// Vocabulary words missing from the text keep their `U(-epsilon, epsilon)`
/// sample; the padding row is zero. Rows are sampled before the text is
/// consulted, so the result depends only on the text, vocabulary and RNG state.
pub fn parse_pretrained<R: Rng + ?Sized>(
    text: &str,
    vocab: &Vocab,
    dim: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::random_words(vocab, dim, epsilon, rng);
    for (i, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {dim} values for `{word}`, found {}", values.len()),
            });
        }
        let id = vocab.word_id(word);
        if id == Vocab::UNK || id == Vocab::PAD {
            continue;
        }
        let row = table.matrix.row_slice_mut(id);
        for (dst, v) in row.iter_mut().zip(values) {
            *dst = v.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("`{v}` is not a number"),
            })?;
        }
    }
    Ok(table)
}

pub fn load_pretrained<R: Rng + ?Sized>(
    path: impl AsRef<Path>,
    vocab: &Vocab,
    dim: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<EmbeddingTable> {
    parse_pretrained(&fs::read_to_string(path)?, vocab, dim, epsilon, rng)
}

/// Row gather: the one-hot product `onehot(indices) * table`.
pub fn lookup(tape: &mut Tape, table: Var, indices: &[usize]) -> Result<Var> {
    tape.gather_rows(table, indices)
}
