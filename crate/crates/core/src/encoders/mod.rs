//! Sentence encoders: reduce a `T × D` token matrix to one sentence vector.

mod cells;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cells::{GruCell, LstmCell};

use crate::numerics::{init, Graph, ParamId, ParamStore, Real, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    Bilstm,
    Gru,
    Han,
    PoolMean,
    PoolMax,
    PoolMeanmax,
    PoolBos,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 7] = [
        EncoderKind::Bilstm,
        EncoderKind::Gru,
        EncoderKind::Han,
        EncoderKind::PoolMean,
        EncoderKind::PoolMax,
        EncoderKind::PoolMeanmax,
        EncoderKind::PoolBos,
    ];

    pub fn is_recurrent(self) -> bool {
        matches!(self, EncoderKind::Bilstm | EncoderKind::Gru | EncoderKind::Han)
    }

    pub fn is_pooling(self) -> bool {
        !self.is_recurrent()
    }

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Bilstm => "bilstm",
            EncoderKind::Gru => "gru",
            EncoderKind::Han => "han",
            EncoderKind::PoolMean => "pool-mean",
            EncoderKind::PoolMax => "pool-max",
            EncoderKind::PoolMeanmax => "pool-meanmax",
            EncoderKind::PoolBos => "pool-bos",
        }
    }
}

fn default_hidden() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    /// Hidden units per direction for the recurrent kinds.
    #[serde(default = "default_hidden")]
    pub hidden_per_direction: usize,
}

impl EncoderConfig {
    pub fn new(kind: EncoderKind, hidden_per_direction: usize) -> Self {
        EncoderConfig {
            kind,
            hidden_per_direction,
        }
    }

    /// Width of the sentence vector for `input_dim`-wide token features.
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self.kind {
            k if k.is_recurrent() => 2 * self.hidden_per_direction,
            EncoderKind::PoolMeanmax => 2 * input_dim,
            _ => input_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_recurrent() && self.hidden_per_direction == 0 {
            return Err(Error::Config("recurrent encoders need hidden_per_direction > 0".into()));
        }
        Ok(())
    }
}

/// Output of an encoder: a `1 × out` row and, for the attention encoder, the
/// `1 × T` attention weights.
#[derive(Clone, Copy, Debug)]
pub struct EncodedSentence {
    pub vector: Var,
    pub attention: Option<Var>,
}

/// Bidirectional recurrence over the unmasked positions of a sequence.
#[derive(Clone, Debug)]
pub enum BiRnn {
    Lstm { fwd: LstmCell, bwd: LstmCell },
    Gru { fwd: GruCell, bwd: GruCell },
}

/// Per-position states of a bidirectional pass, indexed by real position.
pub struct BiStates {
    pub positions: Vec<usize>,
    pub forward: Vec<Var>,
    /// Backward states aligned with `positions` (not with visiting order).
    pub backward: Vec<Var>,
}

impl BiRnn {
    pub fn lstm<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(BiRnn::Lstm {
            fwd: LstmCell::new(store, &format!("{prefix}.fwd"), input, hidden, rng)?,
            bwd: LstmCell::new(store, &format!("{prefix}.bwd"), input, hidden, rng)?,
        })
    }

    pub fn gru<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(BiRnn::Gru {
            fwd: GruCell::new(store, &format!("{prefix}.fwd"), input, hidden, rng)?,
            bwd: GruCell::new(store, &format!("{prefix}.bwd"), input, hidden, rng)?,
        })
    }

    pub fn hidden(&self) -> usize {
        match self {
            BiRnn::Lstm { fwd, .. } => fwd.hidden,
            BiRnn::Gru { fwd, .. } => fwd.hidden,
        }
    }

    /// Masked positions are skipped entirely, so padding never alters the
    /// states of real tokens.
    pub fn states<F: Real>(&self, g: &mut Graph<'_, F>, seq: Var, mask: &[bool]) -> Result<BiStates> {
        let rows = g
            .value(seq)
            .dims2()
            .map(|d| d.0)
            .ok_or_else(|| Error::Contract("encoder input must be a matrix".into()))?;
        if mask.len() != rows {
            return Err(Error::Contract(format!(
                "mask of length {} for {rows} positions",
                mask.len()
            )));
        }
        let positions: Vec<usize> = (0..rows).filter(|&t| mask[t]).collect();
        if positions.is_empty() {
            return Err(Error::Contract("cannot encode an all-masked sequence".into()));
        }
        let reversed: Vec<usize> = positions.iter().rev().copied().collect();
        let (forward, mut backward) = match self {
            BiRnn::Lstm { fwd, bwd } => (fwd.run(g, seq, &positions)?, bwd.run(g, seq, &reversed)?),
            BiRnn::Gru { fwd, bwd } => (fwd.run(g, seq, &positions)?, bwd.run(g, seq, &reversed)?),
        };
        backward.reverse();
        Ok(BiStates {
            positions,
            forward,
            backward,
        })
    }

    /// Final forward state (last real token) joined with the final backward
    /// state (first real token).
    pub fn encode<F: Real>(&self, g: &mut Graph<'_, F>, seq: Var, mask: &[bool]) -> Result<Var> {
        let s = self.states(g, seq, mask)?;
        let last = *s.forward.last().expect("non-empty");
        let first = s.backward[0];
        g.concat(&[last, first], 1)
    }
}

/// Attention over BiLSTM states: `u_t = tanh(W h_t + b)`,
/// `alpha = softmax(u_t . u_ctx)`, output `sum_t alpha_t h_t`.
#[derive(Clone, Debug)]
pub struct AttentionEncoder {
    pub rnn: BiRnn,
    pub w: ParamId,
    pub b: ParamId,
    pub context: ParamId,
}

impl AttentionEncoder {
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let rnn = BiRnn::lstm(store, &format!("{prefix}.rnn"), input, hidden, rng)?;
        let width = 2 * hidden;
        Ok(AttentionEncoder {
            rnn,
            w: store.register(
                format!("{prefix}.attn_w"),
                init::xavier_uniform(rng, width, width),
                true,
            )?,
            b: store.register(format!("{prefix}.attn_b"), Tensor::zeros(&[1, width]), true)?,
            context: store.register(
                format!("{prefix}.attn_context"),
                init::uniform(rng, &[width, 1], 0.1),
                true,
            )?,
        })
    }

    pub fn encode<F: Real>(&self, g: &mut Graph<'_, F>, seq: Var, mask: &[bool]) -> Result<EncodedSentence> {
        let s = self.rnn.states(g, seq, mask)?;
        let width = 2 * self.rnn.hidden();
        let mut rows = Vec::with_capacity(mask.len());
        let mut next = 0;
        for (t, &real) in mask.iter().enumerate() {
            if real {
                debug_assert_eq!(s.positions[next], t);
                rows.push(g.concat(&[s.forward[next], s.backward[next]], 1)?);
                next += 1;
            } else {
                rows.push(g.constant(Tensor::zeros(&[1, width])));
            }
        }
        let states = g.concat(&rows, 0)?;
        self.attend(g, states, mask)
    }

    /// The attention tier alone, over a `T × 2h` state matrix whose masked
    /// rows are zero.
    pub fn attend<F: Real>(&self, g: &mut Graph<'_, F>, states: Var, mask: &[bool]) -> Result<EncodedSentence> {
        if !mask.iter().any(|&m| m) {
            return Err(Error::Contract("cannot attend over an all-masked sequence".into()));
        }
        let (w, b, ctx) = (g.param(self.w), g.param(self.b), g.param(self.context));
        let u = g.matmul(states, w)?;
        let u = g.add(u, b)?;
        let u = g.tanh(u);
        let scores = g.matmul(u, ctx)?;
        let scores = g.reshape(scores, &[1, mask.len()])?;
        let alpha = g.masked_softmax(scores, mask)?;
        let vector = g.matmul(alpha, states)?;
        Ok(EncodedSentence {
            vector,
            attention: Some(alpha),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolStrategy {
    Mean,
    Max,
    MeanMax,
    Bos,
}

/// Parameter-free reductions over precomputed contextual vectors. For
/// [`PoolStrategy::Bos`] row 0 of the input is the sentence-start vector.
pub fn pool<F: Real>(g: &mut Graph<'_, F>, seq: Var, mask: &[bool], strategy: PoolStrategy) -> Result<Var> {
    if !mask.iter().any(|&m| m) {
        return Err(Error::Contract("cannot pool an all-masked sequence".into()));
    }
    match strategy {
        PoolStrategy::Mean => g.mean_over_time(seq, mask),
        PoolStrategy::Max => g.max_over_time(seq, mask),
        PoolStrategy::MeanMax => {
            let mean = g.mean_over_time(seq, mask)?;
            let max = g.max_over_time(seq, mask)?;
            g.concat(&[mean, max], 1)
        }
        PoolStrategy::Bos => {
            if !mask[0] {
                return Err(Error::Contract("sentence-start position is masked".into()));
            }
            g.slice(seq, 0, 0, 1)
        }
    }
}

/// Any of the configured encoders.
#[derive(Clone, Debug)]
pub enum Encoder {
    Recurrent(BiRnn),
    Attention(AttentionEncoder),
    Pool(PoolStrategy),
}

impl Encoder {
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        config: &EncoderConfig,
        input_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_per_direction;
        Ok(match config.kind {
            EncoderKind::Bilstm => Encoder::Recurrent(BiRnn::lstm(store, "encoder", input_dim, h, rng)?),
            EncoderKind::Gru => Encoder::Recurrent(BiRnn::gru(store, "encoder", input_dim, h, rng)?),
            EncoderKind::Han => Encoder::Attention(AttentionEncoder::new(store, "encoder", input_dim, h, rng)?),
            EncoderKind::PoolMean => Encoder::Pool(PoolStrategy::Mean),
            EncoderKind::PoolMax => Encoder::Pool(PoolStrategy::Max),
            EncoderKind::PoolMeanmax => Encoder::Pool(PoolStrategy::MeanMax),
            EncoderKind::PoolBos => Encoder::Pool(PoolStrategy::Bos),
        })
    }

    pub fn encode<F: Real>(&self, g: &mut Graph<'_, F>, seq: Var, mask: &[bool]) -> Result<EncodedSentence> {
        match self {
            Encoder::Recurrent(rnn) => Ok(EncodedSentence {
                vector: rnn.encode(g, seq, mask)?,
                attention: None,
            }),
            Encoder::Attention(han) => han.encode(g, seq, mask),
            Encoder::Pool(strategy) => Ok(EncodedSentence {
                vector: pool(g, seq, mask, *strategy)?,
                attention: None,
            }),
        }
    }
}
