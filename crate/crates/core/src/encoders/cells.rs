use rand::Rng;

use crate::numerics::{init, Graph, ParamId, ParamStore, Real, Tensor, Var};
use crate::Result;

/// LSTM cell with gate blocks ordered input, forget, cell, output.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(LstmCell {
            w_ih: store.register(
                format!("{prefix}.w_ih"),
                init::xavier_uniform(rng, input, 4 * hidden),
                true,
            )?,
            w_hh: store.register(
                format!("{prefix}.w_hh"),
                init::xavier_uniform(rng, hidden, 4 * hidden),
                true,
            )?,
            bias: store.register(format!("{prefix}.bias"), Tensor::zeros(&[1, 4 * hidden]), true)?,
            input,
            hidden,
        })
    }

    /// Runs the recurrence over the rows of `seq` (a `T × input` matrix)
    /// visited in `order`, returning the hidden state after each visit.
    pub fn run<F: Real>(&self, g: &mut Graph<'_, F>, seq: Var, order: &[usize]) -> Result<Vec<Var>> {
        let h_dim = self.hidden;
        let (w_ih, w_hh, bias) = (g.param(self.w_ih), g.param(self.w_hh), g.param(self.bias));
        let projected = g.matmul(seq, w_ih)?;
        let projected = g.add(projected, bias)?;
        let mut h = g.constant(Tensor::zeros(&[1, h_dim]));
        let mut c = g.constant(Tensor::zeros(&[1, h_dim]));
        let mut states = Vec::with_capacity(order.len());
        for &t in order {
            let x = g.slice(projected, 0, t, 1)?;
            let rec = g.matmul(h, w_hh)?;
            let gates = g.add(x, rec)?;
            let input_forget = g.slice(gates, 1, 0, 2 * h_dim)?;
            let input_forget = g.sigmoid(input_forget);
            let i = g.slice(input_forget, 1, 0, h_dim)?;
            let f = g.slice(input_forget, 1, h_dim, h_dim)?;
            let cand = g.slice(gates, 1, 2 * h_dim, h_dim)?;
            let cand = g.tanh(cand);
            let o = g.slice(gates, 1, 3 * h_dim, h_dim)?;
            let o = g.sigmoid(o);
            let keep = g.mul(f, c)?;
            let write = g.mul(i, cand)?;
            c = g.add(keep, write)?;
            let squashed = g.tanh(c);
            h = g.mul(o, squashed)?;
            states.push(h);
        }
        Ok(states)
    }
}

/// GRU cell with gate blocks ordered reset, update, new; the reset gate is
/// applied after the recurrent projection.
#[derive(Clone, Debug)]
pub struct GruCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(GruCell {
            w_ih: store.register(
                format!("{prefix}.w_ih"),
                init::xavier_uniform(rng, input, 3 * hidden),
                true,
            )?,
            w_hh: store.register(
                format!("{prefix}.w_hh"),
                init::xavier_uniform(rng, hidden, 3 * hidden),
                true,
            )?,
            b_ih: store.register(format!("{prefix}.b_ih"), Tensor::zeros(&[1, 3 * hidden]), true)?,
            b_hh: store.register(format!("{prefix}.b_hh"), Tensor::zeros(&[1, 3 * hidden]), true)?,
            input,
            hidden,
        })
    }

    pub fn run<F: Real>(&self, g: &mut Graph<'_, F>, seq: Var, order: &[usize]) -> Result<Vec<Var>> {
        let h_dim = self.hidden;
        let (w_ih, w_hh) = (g.param(self.w_ih), g.param(self.w_hh));
        let (b_ih, b_hh) = (g.param(self.b_ih), g.param(self.b_hh));
        let projected = g.matmul(seq, w_ih)?;
        let projected = g.add(projected, b_ih)?;
        let mut h = g.constant(Tensor::zeros(&[1, h_dim]));
        let mut states = Vec::with_capacity(order.len());
        for &t in order {
            let x = g.slice(projected, 0, t, 1)?;
            let rec = g.matmul(h, w_hh)?;
            let rec = g.add(rec, b_hh)?;
            let x_rz = g.slice(x, 1, 0, 2 * h_dim)?;
            let h_rz = g.slice(rec, 1, 0, 2 * h_dim)?;
            let rz = g.add(x_rz, h_rz)?;
            let rz = g.sigmoid(rz);
            let r = g.slice(rz, 1, 0, h_dim)?;
            let z = g.slice(rz, 1, h_dim, h_dim)?;
            let x_n = g.slice(x, 1, 2 * h_dim, h_dim)?;
            let h_n = g.slice(rec, 1, 2 * h_dim, h_dim)?;
            let gated = g.mul(r, h_n)?;
            let n = g.add(x_n, gated)?;
            let n = g.tanh(n);
            // h' = (1 - z) * n + z * h = n + z * (h - n)
            let diff = g.sub(h, n)?;
            let carry = g.mul(z, diff)?;
            h = g.add(n, carry)?;
            states.push(h);
        }
        Ok(states)
    }
}
