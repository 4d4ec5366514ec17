use rand::Rng;

use crate::corpus::{Vocabulary, PAD};
use crate::encoders::BiRnn;
use crate::numerics::{init, Graph, ParamId, ParamStore, Real, Var};
use crate::{Error, Result};

use super::tables::INIT_BOUND;

/// Word encoder over characters: embeds each character and runs a BiLSTM,
/// returning the final forward and backward states side by side.
#[derive(Clone, Debug)]
pub struct CharEncoder {
    pub charset: Vocabulary,
    pub embedding: ParamId,
    pub rnn: BiRnn,
    pub out_dim: usize,
}

impl CharEncoder {
    pub fn new<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        prefix: &str,
        charset: Vocabulary,
        char_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if out_dim == 0 || !out_dim.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "character encoder output must be a positive even number, got {out_dim}"
            )));
        }
        let mut table = init::uniform(rng, &[charset.len(), char_dim], INIT_BOUND);
        table.data_mut()[PAD * char_dim..(PAD + 1) * char_dim].fill(F::zero());
        let embedding = store.register(format!("{prefix}.embedding"), table, true)?;
        let rnn = BiRnn::lstm(store, &format!("{prefix}.rnn"), char_dim, out_dim / 2, rng)?;
        Ok(CharEncoder {
            charset,
            embedding,
            rnn,
            out_dim,
        })
    }

    /// `1 × out_dim` encoding of `word`.
    pub fn encode<F: Real>(&self, g: &mut Graph<'_, F>, word: &str) -> Result<Var> {
        if word.is_empty() {
            return Err(Error::Contract("cannot encode the characters of an empty word".into()));
        }
        let idx: Vec<usize> = word
            .chars()
            .map(|c| self.charset.encode(c.encode_utf8(&mut [0; 4])))
            .collect();
        let table = g.param(self.embedding);
        let seq = g.embedding(table, &idx, Some(PAD))?;
        self.rnn.encode(g, seq, &vec![true; idx.len()])
    }
}
