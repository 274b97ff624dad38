//! Aspect attention (scaled dot product) and dependency attention (additive).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compute::{Axis, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Attention weights over sentence positions; one row per query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    pub weights: Vec<Vec<f64>>,
}

impl AttentionTrace {
    /// Reads an evaluated weight matrix off the tape.
    pub fn read(tape: &Tape, weights: Var) -> Result<Self> {
        let t = tape.value(weights).ok_or(Error::NotEvaluated)?;
        Ok(Self { weights: t.to_rows() })
    }

    /// Largest deviation of any row sum from 1, or infinity if an entry lies outside `[0, 1]`.
    pub fn max_normalization_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.weights {
            if row.iter().any(|w| !(0.0..=1.0).contains(w)) {
                return f64::INFINITY;
            }
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        worst
    }
}

/// Output of an attention module on a tape.
#[derive(Clone, Copy, Debug)]
pub struct Attended {
    /// `1 x 2d_h` pooled representation.
    pub pooled: Var,
    /// Weight matrix, `m x n` for aspect attention and `1 x n` for dependency attention.
    pub weights: Var,
}

/// `softmax(h_a h_s^T / sqrt(2d_h)) h_s`, averaged over the `m` aspect rows.
pub fn aspect_attention(tape: &mut Tape, h_a: Var, h_s_k: Var) -> Result<Attended> {
    let [_, da] = tape.shape(h_a);
    let [n, ds] = tape.shape(h_s_k);
    if da != ds {
        return Err(Error::Shape { op: "aspect_attention", lhs: tape.shape(h_a), rhs: [n, ds] });
    }
    let keys = tape.transpose(h_s_k);
    let raw = tape.matmul(h_a, keys)?;
    let scores = tape.scale(raw, 1.0 / (ds as f64).sqrt());
    let weights = tape.softmax_rows(scores);
    let context = tape.matmul(weights, h_s_k)?;
    let pooled = tape.mean(context, Axis::Rows);
    Ok(Attended { pooled, weights })
}

/// Parameters of the additive dependency attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DepAttention {
    /// `dim_depgcn x d_att`
    pub w_q: ParamId,
    /// `2d_h x d_att`
    pub w_k: ParamId,
    /// `1 x d_att`
    pub w_v: ParamId,
}

impl DepAttention {
    pub fn register<R: Rng + ?Sized>(
        params: &mut ParamStore,
        prefix: &str,
        label_dim: usize,
        state_dim: usize,
        d_att: usize,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let w_q = params.add(format!("{prefix}.w_q"), Tensor::uniform(label_dim, d_att, epsilon, rng), true)?;
        let w_k = params.add(format!("{prefix}.w_k"), Tensor::uniform(state_dim, d_att, epsilon, rng), true)?;
        let w_v = params.add(format!("{prefix}.w_v"), Tensor::uniform(1, d_att, epsilon, rng), true)?;
        Ok(Self { w_q, w_k, w_v })
    }

    pub fn lookup(params: &ParamStore, prefix: &str) -> Result<Self> {
        let a = Self {
            w_q: params.id(&format!("{prefix}.w_q"))?,
            w_k: params.id(&format!("{prefix}.w_k"))?,
            w_v: params.id(&format!("{prefix}.w_v"))?,
        };
        let (q, k, v) = (params.value(a.w_q).shape(), params.value(a.w_k).shape(), params.value(a.w_v).shape());
        if q[1] != k[1] || v != [1, q[1]] {
            return Err(Error::Shape { op: "dep_attention", lhs: q, rhs: k });
        }
        Ok(a)
    }
}

/// `score_i = w_v . tanh(W_q^T D_i + W_k^T h_s_i)`, softmax over positions,
/// `h_d = sum_i weight_i h_s_i`.
pub fn dependency_attention(
    tape: &mut Tape,
    params: &ParamStore,
    d_k: Var,
    h_s: Var,
    att: &DepAttention,
) -> Result<Attended> {
    let (ds, hs) = (tape.shape(d_k), tape.shape(h_s));
    if ds[0] != hs[0] {
        return Err(Error::Shape { op: "dependency_attention", lhs: ds, rhs: hs });
    }
    let w_q = tape.param(params, att.w_q);
    let w_k = tape.param(params, att.w_k);
    let w_v = tape.param(params, att.w_v);
    let q = tape.matmul(d_k, w_q)?;
    let k = tape.matmul(h_s, w_k)?;
    let pre = tape.add(q, k)?;
    let act = tape.tanh(pre);
    let act_t = tape.transpose(act);
    let scores = tape.matmul(w_v, act_t)?;
    let weights = tape.softmax_rows(scores);
    let pooled = tape.matmul(weights, h_s)?;
    Ok(Attended { pooled, weights })
}

/// Scales row `i` of `h` by `n * weights[i]` for a `1 x n` weight row.
pub fn reweight_rows(tape: &mut Tape, h: Var, weights: Var) -> Result<Var> {
    let [_, n] = tape.shape(weights);
    let col = tape.transpose(weights);
    let col = tape.scale(col, n as f64);
    tape.mul(h, col)
}
