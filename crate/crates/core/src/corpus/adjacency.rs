use crate::corpus::ParsedSentence;
use crate::error::{Error, Result};

/// Undirected arc connectivity between the tokens of one sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    entries: Vec<u8>,
}

impl AdjacencyMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, entries: vec![0; n * n] }
    }

    /// Builds from a dense 0/1 matrix without checking symmetry, so callers
    /// downstream can be tested against malformed input.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Data("adjacency matrix must be square".into()));
        }
        if rows.iter().flatten().any(|&v| v > 1) {
            return Err(Error::Data("adjacency entries must be 0 or 1".into()));
        }
        Ok(Self { n, entries: rows.concat() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.n + j]
    }

    fn connect(&mut self, i: usize, j: usize) {
        self.entries[i * self.n + j] = 1;
        self.entries[j * self.n + i] = 1;
    }

    pub fn count_ones(&self) -> usize {
        self.entries.iter().filter(|&&v| v == 1).count()
    }

    /// First `(i, j)` with `G_ij != G_ji`, if any.
    pub fn asymmetry(&self) -> Option<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .find(|&(i, j)| self.get(i, j) != self.get(j, i))
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry().is_none()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.entries.chunks(self.n).map(<[u8]>::to_vec).collect()
    }
}

/// Arc `i -> head` fills both `(i, head-1)` and `(head-1, i)`; root arcs add nothing.
pub fn build_adjacency(sentence: &ParsedSentence) -> AdjacencyMatrix {
    let mut g = AdjacencyMatrix::zeros(sentence.len());
    for (i, &h) in sentence.heads().iter().enumerate() {
        if h > 0 {
            g.connect(i, h - 1);
        }
    }
    g
}
