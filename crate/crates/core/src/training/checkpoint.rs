//! Binary checkpoint layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "SEMTAGCK"
//! version  u32      1
//! header   u64 length + UTF-8 JSON {"config", "vocabs", "precision"}
//! count    u32      number of tensors
//! tensor*  u32 name length, name bytes, u32 rank, u64 per dim,
//!          then every element as f32 or f64 per "precision"
//! ```
//!
//! Tensors appear in registration order; loading rebuilds the network from
//! the header and overwrites every value, so a round trip is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureVocabs, Pretrained};
use crate::numerics::Real;
use crate::{Error, Result};

use super::config::ModelConfig;
use super::model::Model;

pub const MAGIC: &[u8; 8] = b"SEMTAGCK";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocabs: FeatureVocabs,
    precision: String,
}

fn precision_name<F: Real>() -> &'static str {
    if F::BYTES == 4 {
        "f32"
    } else {
        "f64"
    }
}

pub fn encode_checkpoint<F: Real>(model: &Model<F>) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        vocabs: model.vocabs.clone(),
        precision: precision_name::<F>().into(),
    })?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(model.store.len() as u32).to_le_bytes());
    for (_, p) in model.store.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        let shape = p.value.shape();
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in p.value.data() {
            x.write_le(&mut out);
        }
    }
    Ok(out)
}

pub fn save_checkpoint<F: Real>(model: &Model<F>, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.at)))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("length overflows".into()))
    }
}

pub fn decode_checkpoint<F: Real>(bytes: &[u8]) -> Result<Model<F>> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let header_len = r.len()?;
    let header: Header =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.precision != precision_name::<F>() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} parameters, loader expects {}",
            header.precision,
            precision_name::<F>()
        )));
    }
    let mut model = Model::<F>::new(header.config, header.vocabs, &Pretrained::default(), 0)?;
    let count = r.u32()? as usize;
    if count != model.store.len() {
        return Err(Error::Checkpoint(format!(
            "{count} tensors stored, configuration defines {}",
            model.store.len()
        )));
    }
    let ids: Vec<_> = model.store.iter().map(|(id, _)| id).collect();
    for id in ids {
        let name_len = r.u32()? as usize;
        let name =
            std::str::from_utf8(r.take(name_len)?).map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let param = model.store.get(id);
        if name != param.name {
            return Err(Error::Checkpoint(format!(
                "expected tensor {}, found {name}",
                param.name
            )));
        }
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
        if shape != param.value.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {shape:?}, configuration expects {:?}",
                param.value.shape()
            )));
        }
        let n = param.value.len();
        let raw = r.take(n * F::BYTES)?;
        let dst = model.store.value_mut(id).data_mut();
        for (d, chunk) in dst.iter_mut().zip(raw.chunks_exact(F::BYTES)) {
            *d = F::read_le(chunk);
        }
    }
    if r.at != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.at
        )));
    }
    Ok(model)
}

pub fn load_checkpoint<F: Real>(path: &Path) -> Result<Model<F>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
