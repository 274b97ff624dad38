//! Bidirectional LSTM encoders.

use rand::Rng;

use crate::compute::{Axis, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Weights of one LSTM direction. Gate columns are ordered
/// input, forget, cell, output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmDirection {
    /// `input_dim x 4*hidden`
    pub w_x: ParamId,
    /// `hidden x 4*hidden`
    pub w_h: ParamId,
    /// `1 x 4*hidden`
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmDirection {
    pub fn register<R: Rng + ?Sized>(
        params: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let w_x = params.add(format!("{prefix}.w_x"), Tensor::uniform(input_dim, 4 * hidden, epsilon, rng), true)?;
        let w_h = params.add(format!("{prefix}.w_h"), Tensor::uniform(hidden, 4 * hidden, epsilon, rng), true)?;
        let bias = params.add(format!("{prefix}.bias"), Tensor::uniform(1, 4 * hidden, epsilon, rng), true)?;
        Ok(Self { w_x, w_h, bias, input_dim, hidden })
    }

    /// Resolves an already-registered direction by name.
    pub fn lookup(params: &ParamStore, prefix: &str) -> Result<Self> {
        let w_x = params.id(&format!("{prefix}.w_x"))?;
        let w_h = params.id(&format!("{prefix}.w_h"))?;
        let bias = params.id(&format!("{prefix}.bias"))?;
        let [input_dim, four_h] = params.value(w_x).shape();
        let hidden = four_h / 4;
        let dir = Self { w_x, w_h, bias, input_dim, hidden };
        dir.check(params)?;
        Ok(dir)
    }

    fn check(&self, params: &ParamStore) -> Result<()> {
        let h4 = 4 * self.hidden;
        let expect = [
            (self.w_x, [self.input_dim, h4]),
            (self.w_h, [self.hidden, h4]),
            (self.bias, [1, h4]),
        ];
        for (id, shape) in expect {
            let got = params.value(id).shape();
            if got != shape {
                return Err(Error::Shape { op: "lstm", lhs: shape, rhs: got });
            }
        }
        Ok(())
    }

    pub fn bind(&self, tape: &mut Tape, params: &ParamStore) -> BoundLstm {
        BoundLstm {
            w_x: tape.param(params, self.w_x),
            w_h: tape.param(params, self.w_h),
            bias: tape.param(params, self.bias),
            hidden: self.hidden,
        }
    }
}

/// An [`LstmDirection`] whose weights are already leaves on a tape.
#[derive(Clone, Copy, Debug)]
pub struct BoundLstm {
    pub w_x: Var,
    pub w_h: Var,
    pub bias: Var,
    pub hidden: usize,
}

/// One cell update from the input projection `x_proj = x_t * W_x` (`1 x 4h`).
fn cell(tape: &mut Tape, p: &BoundLstm, x_proj: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
    let h = p.hidden;
    let rec = tape.matmul(h_prev, p.w_h)?;
    let pre = tape.add(x_proj, rec)?;
    let pre = tape.add(pre, p.bias)?;
    let i = tape.slice_cols(pre, 0, h)?;
    let f = tape.slice_cols(pre, h, 2 * h)?;
    let g = tape.slice_cols(pre, 2 * h, 3 * h)?;
    let o = tape.slice_cols(pre, 3 * h, 4 * h)?;
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h_t = tape.mul(o, tc)?;
    Ok((h_t, c))
}

/// `c_t = f*c_prev + i*g`, `h_t = o*tanh(c_t)` for a single `1 x input_dim` input.
pub fn lstm_step(tape: &mut Tape, p: &BoundLstm, x_t: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
    let x_proj = tape.matmul(x_t, p.w_x)?;
    cell(tape, p, x_proj, h_prev, c_prev)
}

/// Runs one direction over all rows of `seq` in the given order, returning the
/// hidden state for each visited row (in visiting order).
fn run_direction(tape: &mut Tape, p: &BoundLstm, seq: Var, order: impl Iterator<Item = usize>) -> Result<Vec<Var>> {
    let proj = tape.matmul(seq, p.w_x)?;
    let mut h = tape.input(Tensor::zeros(1, p.hidden));
    let mut c = tape.input(Tensor::zeros(1, p.hidden));
    let mut out = Vec::new();
    for t in order {
        let x_proj = tape.gather_rows(proj, &[t])?;
        (h, c) = cell(tape, p, x_proj, h, c)?;
        out.push(h);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BiLstm {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
}

impl BiLstm {
    pub fn register<R: Rng + ?Sized>(
        params: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let forward = LstmDirection::register(params, &format!("{prefix}.fwd"), input_dim, hidden, epsilon, rng)?;
        let backward = LstmDirection::register(params, &format!("{prefix}.bwd"), input_dim, hidden, epsilon, rng)?;
        Ok(Self { forward, backward })
    }

    pub fn lookup(params: &ParamStore, prefix: &str) -> Result<Self> {
        let forward = LstmDirection::lookup(params, &format!("{prefix}.fwd"))?;
        let backward = LstmDirection::lookup(params, &format!("{prefix}.bwd"))?;
        if (forward.input_dim, forward.hidden) != (backward.input_dim, backward.hidden) {
            return Err(Error::Config(format!("{prefix}: forward and backward dimensions differ")));
        }
        Ok(Self { forward, backward })
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden
    }
}

/// Encodes an `n x input_dim` sequence into `n x 2*hidden`; row `t` is the
/// forward state at `t` followed by the backward state at `t`. Both
/// directions start from zero states.
pub fn bilstm_encode(tape: &mut Tape, params: &ParamStore, enc: &BiLstm, seq: Var) -> Result<Var> {
    let [n, d] = tape.shape(seq);
    if d != enc.forward.input_dim {
        return Err(Error::Shape { op: "bilstm_encode", lhs: [n, d], rhs: [n, enc.forward.input_dim] });
    }
    let fwd = enc.forward.bind(tape, params);
    let bwd = enc.backward.bind(tape, params);
    let fwd_states = run_direction(tape, &fwd, seq, 0..n)?;
    let mut bwd_states = run_direction(tape, &bwd, seq, (0..n).rev())?;
    bwd_states.reverse();
    let f = tape.concat(&fwd_states, Axis::Rows)?;
    let b = tape.concat(&bwd_states, Axis::Rows)?;
    tape.concat(&[f, b], Axis::Cols)
}
