//! Generated corpora for smoke tests and controlled experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{LabeledExample, ParsedSentence, Polarity};

/// Random dependency tree over `n` tokens as 1-based heads (0 = root).
pub fn random_heads<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        heads[order[k]] = parent + 1;
    }
    heads
}

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

const ASPECTS: [&str; 4] = ["food", "service", "screen", "battery"];
const ADJECTIVES: [[&str; 3]; 3] = [
    ["great", "excellent", "tasty"],
    ["okay", "average", "standard"],
    ["awful", "bad", "terrible"],
];

/// 32 hand-parsed review sentences: 4 templates, each filled with 8
/// aspect/adjective pairs whose adjective decides the polarity.
pub fn fixture_corpus() -> Vec<LabeledExample> {
    let mut out = Vec::with_capacity(32);
    for t in 0..4 {
        for j in 0..8 {
            let polarity = Polarity::ALL[(t + j) % 3];
            let adj = ADJECTIVES[polarity.index()][(j / 3 + t) % 3];
            let aspect = ASPECTS[(j + t) % 4];
            let (tokens, heads, labels, at): (Vec<&str>, Vec<usize>, Vec<&str>, usize) = match t {
                0 => (
                    vec!["the", aspect, "was", adj],
                    vec![2, 4, 4, 0],
                    vec!["det", "nsubj", "cop", "root"],
                    1,
                ),
                1 => (vec![adj, aspect, "here"], vec![2, 0, 2], vec!["amod", "root", "advmod"], 1),
                2 => (
                    vec!["i", "found", "the", aspect, adj],
                    vec![2, 0, 4, 2, 2],
                    vec!["nsubj", "root", "det", "obj", "xcomp"],
                    3,
                ),
                _ => (
                    vec!["their", aspect, "is", "really", adj],
                    vec![2, 5, 5, 5, 0],
                    vec!["nmod:poss", "nsubj", "cop", "advmod", "root"],
                    1,
                ),
            };
            let sentence = ParsedSentence::new(owned(&tokens), heads, owned(&labels)).expect("fixture parse");
            out.push(LabeledExample::new(sentence, at, at + 1, polarity).expect("fixture span"));
        }
    }
    out
}

/// Token whose incoming arc label carries the class in [`label_cue_corpus`].
pub const CUE_TOKEN: &str = "cue";
/// Arc label on the cue token for positive examples.
pub const POSITIVE_CUE_LABEL: &str = "amod";
/// Arc label on the cue token for negative examples.
pub const NEGATIVE_CUE_LABEL: &str = "advmod";

const FILLER_LABELS: [&str; 8] = ["det", "nsubj", "obj", "nmod", "case", "conj", "cc", "compound"];

/// Corpus where polarity is decided only by the arc label attaching the
/// fixed token [`CUE_TOKEN`].
///
/// Words, sentence length, tree shape and aspect position are drawn from the
/// same distribution for both classes, so without labels the two classes are
/// indistinguishable.
pub fn label_cue_corpus(count: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fillers: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let positive = k % 2 == 0;
        let n = rng.random_range(5..=9);
        let heads = random_heads(n, &mut rng);
        let root = heads.iter().position(|&h| h == 0).expect("tree has a root");
        let non_root: Vec<usize> = (0..n).filter(|&i| i != root).collect();
        let cue = non_root[rng.random_range(0..non_root.len())];
        let aspect_choices: Vec<usize> = (0..n).filter(|&i| i != cue).collect();
        let aspect = aspect_choices[rng.random_range(0..aspect_choices.len())];

        let mut tokens = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            if i == cue {
                tokens.push(CUE_TOKEN.to_string());
                let l = if positive { POSITIVE_CUE_LABEL } else { NEGATIVE_CUE_LABEL };
                labels.push(l.to_string());
            } else {
                tokens.push(fillers[rng.random_range(0..fillers.len())].clone());
                let l = if i == root { "root" } else { FILLER_LABELS[rng.random_range(0..FILLER_LABELS.len())] };
                labels.push(l.to_string());
            }
        }
        let polarity = if positive { Polarity::Positive } else { Polarity::Negative };
        let sentence = ParsedSentence::new(tokens, heads, labels).expect("generated parse");
        out.push(LabeledExample::new(sentence, aspect, aspect + 1, polarity).expect("generated span"));
    }
    out
}
