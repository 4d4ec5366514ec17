use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;

use crate::corpus::{Vocabulary, PAD};
use crate::numerics::{init, Graph, ParamId, ParamStore, Real, Tensor, Var};
use crate::{Error, Result};

/// Bound of the uniform draw used for rows without a pretrained vector.
pub const INIT_BOUND: f64 = 0.1;

/// Embedding matrix registered in a parameter store. Row `PAD` is zero and,
/// because lookups pass it as the padding index, never receives gradient.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    pub vocab: Vocabulary,
    pub param: ParamId,
    pub dim: usize,
    pub frozen: bool,
}

impl EmbeddingTable {
    pub fn new<F: Real>(
        store: &mut ParamStore<F>,
        name: &str,
        vocab: Vocabulary,
        mut matrix: Tensor<F>,
        frozen: bool,
    ) -> Result<Self> {
        let (rows, dim) = matrix
            .dims2()
            .filter(|_| matrix.shape().len() == 2)
            .ok_or_else(|| Error::dim("embedding table", format!("shape {:?}", matrix.shape())))?;
        if rows != vocab.len() {
            return Err(Error::dim(
                "embedding table",
                format!("{rows} rows for a vocabulary of {}", vocab.len()),
            ));
        }
        matrix.data_mut()[PAD * dim..(PAD + 1) * dim].fill(F::zero());
        let param = store.register(name, matrix, !frozen)?;
        Ok(EmbeddingTable {
            vocab,
            param,
            dim,
            frozen,
        })
    }

    /// Table with every row drawn uniformly from ±[`INIT_BOUND`].
    pub fn random<F: Real, R: Rng>(
        store: &mut ParamStore<F>,
        name: &str,
        vocab: Vocabulary,
        dim: usize,
        frozen: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let matrix = init::uniform(rng, &[vocab.len(), dim], INIT_BOUND);
        Self::new(store, name, vocab, matrix, frozen)
    }

    pub fn indices<S: AsRef<str>>(&self, surfaces: &[S]) -> Vec<usize> {
        surfaces.iter().map(|s| self.vocab.encode(s.as_ref())).collect()
    }

    /// `surfaces.len() × dim` rows; unknown surfaces map to the UNK row.
    pub fn lookup<F: Real, S: AsRef<str>>(&self, g: &mut Graph<'_, F>, surfaces: &[S]) -> Result<Var> {
        let table = g.param(self.param);
        g.embedding(table, &self.indices(surfaces), Some(PAD))
    }
}

/// Vectors read from a word2vec text file.
#[derive(Clone, Debug, Default)]
pub struct WordVectors {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f32>>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

impl WordVectors {
    /// Parses `V D` followed by `V` lines of `surface v1 .. vD`. When `keep`
    /// is given, only its surfaces are retained (the whole file is still
    /// checked).
    pub fn load(path: &Path, keep: Option<&Vocabulary>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| Error::io(path, e))?,
            None => return Err(parse_err(path, 1, "empty file, expected header \"V D\"")),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (count, dim) = match fields.as_slice() {
            [v, d] => match (v.parse::<usize>(), d.parse::<usize>()) {
                (Ok(v), Ok(d)) if d > 0 => (v, d),
                _ => return Err(parse_err(path, 1, format!("bad header {header:?}"))),
            },
            _ => {
                return Err(parse_err(
                    path,
                    1,
                    format!("header has {} fields, expected 2", fields.len()),
                ))
            }
        };
        let mut vectors = HashMap::new();
        let mut seen = 0;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let surface = parts.next().expect("non-blank line");
            let values = parts
                .map(str::parse::<f32>)
                .collect::<std::result::Result<Vec<f32>, _>>()
                .map_err(|e| parse_err(path, line_no, format!("bad number: {e}")))?;
            if values.len() != dim {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("{} values for {surface:?}, header declares {dim}", values.len()),
                ));
            }
            seen += 1;
            if keep.is_none_or(|v| v.get(surface).is_some()) {
                vectors.insert(surface.to_string(), values);
            }
        }
        if seen != count {
            return Err(parse_err(
                path,
                1,
                format!("header declares {count} vectors, file has {seen}"),
            ));
        }
        Ok(WordVectors { dim, vectors })
    }

    /// One row per vocabulary entry: copied when present, uniform
    /// ±[`INIT_BOUND`] otherwise, zero for PAD.
    pub fn matrix<F: Real, R: Rng>(&self, vocab: &Vocabulary, dim: usize, rng: &mut R) -> Result<Tensor<F>> {
        if self.dim != dim {
            return Err(Error::dim(
                "word vectors",
                format!(
                    "file has {}-dimensional vectors, configured word_dim is {dim}",
                    self.dim
                ),
            ));
        }
        let mut data = Vec::with_capacity(vocab.len() * dim);
        for (i, surface) in vocab.entries().iter().enumerate() {
            // Draw for every row so a row's value does not depend on which
            // other words the file happens to cover.
            let drawn: Vec<F> = (0..dim)
                .map(|_| F::of(rng.random_range(-INIT_BOUND..INIT_BOUND)))
                .collect();
            match self.vectors.get(surface) {
                _ if i == PAD => data.extend(std::iter::repeat_n(F::zero(), dim)),
                Some(v) => data.extend(v.iter().map(|&x| F::of(x as f64))),
                None => data.extend(drawn),
            }
        }
        Tensor::matrix(vocab.len(), dim, data)
    }
}

/// Reads a word2vec text file and builds the matrix for `vocab`.
pub fn load_word_vectors<F: Real, R: Rng>(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut R,
) -> Result<Tensor<F>> {
    WordVectors::load(path, Some(vocab))?.matrix(vocab, dim, rng)
}

/// Writes vectors in word2vec text format.
pub fn write_word_vectors(path: &Path, dim: usize, rows: &[(String, Vec<f32>)]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{} {dim}", rows.len())?;
        for (surface, v) in rows {
            write!(out, "{surface}")?;
            for x in v {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
