//! Graph convolution over the dependency graph:
//! `H' = act(D^-1/2 (A + I) D^-1/2 H W)`, no bias.

use rand::Rng;

use crate::compute::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::corpus::AdjacencyMatrix;
use crate::error::{Error, Result};

/// Symmetrically normalized adjacency with self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency(Tensor);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &Tensor {
        &self.0
    }

    pub fn into_matrix(self) -> Tensor {
        self.0
    }
}

pub fn normalize_adjacency(g: &AdjacencyMatrix) -> Result<NormalizedAdjacency> {
    if let Some((i, j)) = g.asymmetry() {
        return Err(Error::Asymmetric(i, j));
    }
    let n = g.n();
    let a_hat = |i: usize, j: usize| if i == j { 1.0 } else { f64::from(g.get(i, j)) };
    // row sums of A + I; always >= 1 thanks to the self-loop
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| 1.0 / (0..n).map(|j| a_hat(i, j)).sum::<f64>().sqrt())
        .collect();
    let mut out = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, a_hat(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j]);
        }
    }
    Ok(NormalizedAdjacency(out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GcnStack {
    pub layers: Vec<GcnLayer>,
    pub activation: Activation,
}

impl GcnStack {
    /// Registers `dims.len() - 1` layers mapping `dims[l] -> dims[l + 1]`.
    pub fn register<R: Rng + ?Sized>(
        params: &mut ParamStore,
        prefix: &str,
        dims: &[usize],
        activation: Activation,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(format!("{prefix}: a GCN stack needs at least one layer")));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (l, w) in dims.windows(2).enumerate() {
            let weight = params.add(format!("{prefix}.{l}.weight"), Tensor::uniform(w[0], w[1], epsilon, rng), true)?;
            layers.push(GcnLayer { weight, in_dim: w[0], out_dim: w[1] });
        }
        Ok(Self { layers, activation })
    }

    /// Resolves `prefix.0.weight`, `prefix.1.weight`, ... and checks they chain.
    pub fn lookup(params: &ParamStore, prefix: &str, activation: Activation) -> Result<Self> {
        let mut layers: Vec<GcnLayer> = Vec::new();
        for l in 0.. {
            let name = format!("{prefix}.{l}.weight");
            if !params.contains(&name) {
                break;
            }
            let weight = params.id(&name)?;
            let [in_dim, out_dim] = params.value(weight).shape();
            if let Some(prev) = layers.last() {
                if prev.out_dim != in_dim {
                    return Err(Error::Shape { op: "gcn", lhs: [prev.in_dim, prev.out_dim], rhs: [in_dim, out_dim] });
                }
            }
            layers.push(GcnLayer { weight, in_dim, out_dim });
        }
        if layers.is_empty() {
            return Err(Error::UnknownParam(format!("{prefix}.0.weight")));
        }
        Ok(Self { layers, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }
}

/// Applies every layer of `stack` to `h0` (`n x in_dim`) over `ghat` (`n x n`).
pub fn gcn_forward(tape: &mut Tape, params: &ParamStore, h0: Var, ghat: Var, stack: &GcnStack) -> Result<Var> {
    let [n, d] = tape.shape(h0);
    let gs = tape.shape(ghat);
    if gs != [n, n] {
        return Err(Error::Shape { op: "gcn_forward", lhs: gs, rhs: [n, n] });
    }
    if d != stack.in_dim() {
        return Err(Error::Shape { op: "gcn_forward", lhs: [n, d], rhs: [n, stack.in_dim()] });
    }
    let mut h = h0;
    for layer in &stack.layers {
        let w = tape.param(params, layer.weight);
        let hw = tape.matmul(h, w)?;
        let agg = tape.matmul(ghat, hw)?;
        h = match stack.activation {
            Activation::Relu => tape.relu(agg),
            Activation::Identity => agg,
        };
    }
    Ok(h)
}
