//! Polarity scoring head and training objective.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compute::{softmax_rows, Axis, ParamId, ParamStore, Tape, Tensor, Var, PROB_FLOOR};
use crate::corpus::Polarity;
use crate::error::{Error, Result};

/// Two fully connected layers: `relu(W2 relu(W1 h + b1) + b2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mlp {
    /// `input x hidden`
    pub w1: ParamId,
    pub b1: ParamId,
    /// `hidden x 3`
    pub w2: ParamId,
    pub b2: ParamId,
}

impl Mlp {
    pub fn register<R: Rng + ?Sized>(
        params: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let k = Polarity::COUNT;
        Ok(Self {
            w1: params.add(format!("{prefix}.w1"), Tensor::uniform(input, hidden, epsilon, rng), true)?,
            b1: params.add(format!("{prefix}.b1"), Tensor::uniform(1, hidden, epsilon, rng), true)?,
            w2: params.add(format!("{prefix}.w2"), Tensor::uniform(hidden, k, epsilon, rng), true)?,
            b2: params.add(format!("{prefix}.b2"), Tensor::uniform(1, k, epsilon, rng), true)?,
        })
    }

    pub fn lookup(params: &ParamStore, prefix: &str) -> Result<Self> {
        let m = Self {
            w1: params.id(&format!("{prefix}.w1"))?,
            b1: params.id(&format!("{prefix}.b1"))?,
            w2: params.id(&format!("{prefix}.w2"))?,
            b2: params.id(&format!("{prefix}.b2"))?,
        };
        let [_, hidden] = params.value(m.w1).shape();
        let expect = [(m.b1, [1, hidden]), (m.w2, [hidden, Polarity::COUNT]), (m.b2, [1, Polarity::COUNT])];
        for (id, shape) in expect {
            let got = params.value(id).shape();
            if got != shape {
                return Err(Error::Shape { op: "mlp", lhs: shape, rhs: got });
            }
        }
        Ok(m)
    }

    pub fn input_dim(&self, params: &ParamStore) -> usize {
        params.value(self.w1).rows()
    }
}

/// Concatenates `parts` into `h*` and returns the `1 x 3` logits `y'`.
pub fn fuse_and_score(tape: &mut Tape, params: &ParamStore, parts: &[Var], mlp: &Mlp) -> Result<Var> {
    let h = if parts.len() == 1 { parts[0] } else { tape.concat(parts, Axis::Cols)? };
    let [r, c] = tape.shape(h);
    let input = mlp.input_dim(params);
    if r != 1 || c != input {
        return Err(Error::Shape { op: "fuse_and_score", lhs: [r, c], rhs: [1, input] });
    }
    let w1 = tape.param(params, mlp.w1);
    let b1 = tape.param(params, mlp.b1);
    let w2 = tape.param(params, mlp.w2);
    let b2 = tape.param(params, mlp.b2);
    let z1 = tape.matmul(h, w1)?;
    let z1 = tape.add(z1, b1)?;
    let a1 = tape.relu(z1);
    let z2 = tape.matmul(a1, w2)?;
    let z2 = tape.add(z2, b2)?;
    Ok(tape.relu(z2))
}

/// Per-example cross-entropy `-ln softmax(y')[gold]` on the tape.
pub fn example_loss(tape: &mut Tape, logits: Var, gold: Polarity) -> Result<Var> {
    let probs = tape.softmax_rows(logits);
    tape.cross_entropy(probs, gold.index())
}

/// Probabilities over (positive, neutral, negative).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarityDistribution {
    pub probs: [f64; Polarity::COUNT],
}

impl PolarityDistribution {
    /// Most probable class; ties go to the lowest class index.
    pub fn predicted(&self) -> Polarity {
        let mut best = 0;
        for i in 1..Polarity::COUNT {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        Polarity::ALL[best]
    }

    pub fn prob(&self, p: Polarity) -> f64 {
        self.probs[p.index()]
    }
}

pub fn predict(logits: &[f64; Polarity::COUNT]) -> PolarityDistribution {
    let t = softmax_rows(&Tensor::row(logits.to_vec()));
    let mut probs = [0.0; Polarity::COUNT];
    probs.copy_from_slice(t.data());
    PolarityDistribution { probs }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub data_term: f64,
    pub penalty: f64,
    /// Gold probabilities that fell below the floor.
    pub clamped: usize,
}

/// `-sum_i ln p_i[gold_i] + lambda * ||theta||^2` over trainable parameters.
pub fn loss(
    predictions: &[PolarityDistribution],
    gold: &[Polarity],
    params: &ParamStore,
    lambda: f64,
) -> Result<LossValue> {
    if predictions.is_empty() || predictions.len() != gold.len() {
        return Err(Error::Data(format!(
            "loss needs equal non-empty lists, got {} predictions and {} labels",
            predictions.len(),
            gold.len()
        )));
    }
    let mut data_term = 0.0;
    let mut clamped = 0;
    for (d, &g) in predictions.iter().zip(gold) {
        let p = d.prob(g);
        if p < PROB_FLOOR {
            clamped += 1;
        }
        data_term -= p.max(PROB_FLOOR).ln();
    }
    let penalty = lambda * params.trainable_sum_squares();
    Ok(LossValue { total: data_term + penalty, data_term, penalty, clamped })
}
