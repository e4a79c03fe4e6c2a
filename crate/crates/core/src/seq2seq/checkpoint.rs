//! Single-file binary checkpoint.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "MDSEQ2SQ" | version u32
//! emb u32 | hidden u32 | enc_layers u32 | dec_layers u32 | cell u8
//! max_src u32 | max_tgt u32 | seed u64 | init_range f64
//! src vocab: n u32, n × (len u32, utf-8 bytes)    reserved tokens omitted
//! tgt vocab: same
//! tensors: n u32, n × (rows u32, cols u32, rows·cols f64)
//! ```

use std::path::Path;

use thiserror::Error;

use super::cell::CellKind;
use super::model::{Model, ModelConfig, Params};
use super::tensor::{lit, Scalar};
use super::vocab::{Vocabulary, RESERVED};

pub const MAGIC: &[u8; 8] = b"MDSEQ2SQ";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint is corrupt: {0}")]
    Corrupt(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("size fits in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }

    fn vocab(&mut self, v: &Vocabulary) {
        let user = &v.tokens()[RESERVED.len()..];
        self.u32(user.len());
        for t in user {
            self.str(t);
        }
    }
}

pub fn to_bytes<T: Scalar>(model: &Model<T>) -> Vec<u8> {
    let c = &model.config;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    for v in [c.emb_dim, c.hidden_dim, c.enc_layers, c.dec_layers] {
        w.u32(v);
    }
    w.0.push(c.cell.code());
    w.u32(c.max_src_len);
    w.u32(c.max_tgt_len);
    w.0.extend_from_slice(&c.seed.to_le_bytes());
    w.0.extend_from_slice(&c.init_range.to_le_bytes());
    w.vocab(&model.src_vocab);
    w.vocab(&model.tgt_vocab);
    let tensors = model.params.tensors();
    w.u32(tensors.len());
    for t in tensors {
        w.u32(t.rows());
        w.u32(t.cols());
        for x in t.data() {
            w.0.extend_from_slice(&x.to_f64().unwrap_or(f64::NAN).to_le_bytes());
        }
    }
    w.0
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() < n {
            return Err(CheckpointError::Truncated);
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn vocab(&mut self) -> Result<Vocabulary, CheckpointError> {
        let n = self.u32()?;
        let mut tokens = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let len = self.u32()?;
            let s = std::str::from_utf8(self.take(len)?)
                .map_err(|_| CheckpointError::Corrupt("vocabulary token is not UTF-8".into()))?;
            tokens.push(s.to_owned());
        }
        let vocab = Vocabulary::from_tokens(tokens);
        if vocab
            .tokens()
            .iter()
            .collect::<std::collections::HashSet<_>>()
            .len()
            != vocab.len()
        {
            return Err(CheckpointError::Corrupt(
                "duplicate vocabulary token".into(),
            ));
        }
        Ok(vocab)
    }
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Model<T>, CheckpointError> {
    let mut r = Reader { buf: bytes };
    if r.take(MAGIC.len()).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let (emb_dim, hidden_dim, enc_layers, dec_layers) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    let cell = CellKind::from_code(r.take(1)?[0])
        .ok_or_else(|| CheckpointError::Corrupt("unknown cell code".into()))?;
    let config = ModelConfig {
        emb_dim,
        hidden_dim,
        enc_layers,
        dec_layers,
        cell,
        max_src_len: r.u32()?,
        max_tgt_len: r.u32()?,
        seed: r.u64()?,
        init_range: r.f64()?,
    };
    config
        .validate()
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let src_vocab = r.vocab()?;
    let tgt_vocab = r.vocab()?;
    let mut params: Params<T> = Params::zeros(&config, src_vocab.len(), tgt_vocab.len());
    let count = r.u32()?;
    let mut tensors = params.tensors_mut();
    if count != tensors.len() {
        return Err(CheckpointError::Corrupt(format!(
            "{count} tensors, expected {}",
            tensors.len()
        )));
    }
    for t in tensors.iter_mut() {
        let shape = (r.u32()?, r.u32()?);
        if shape != t.shape() {
            return Err(CheckpointError::Corrupt(format!(
                "tensor shape {shape:?}, expected {:?}",
                t.shape()
            )));
        }
        for x in t.data_mut() {
            let v = r.f64()?;
            if !v.is_finite() {
                return Err(CheckpointError::Corrupt("non-finite parameter".into()));
            }
            *x = lit(v);
        }
    }
    if !r.buf.is_empty() {
        return Err(CheckpointError::Corrupt("trailing bytes".into()));
    }
    Ok(Model {
        config,
        src_vocab,
        tgt_vocab,
        params,
    })
}

pub fn save<T: Scalar>(model: &Model<T>, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, to_bytes(model)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load<T: Scalar>(path: &Path) -> Result<Model<T>, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_bytes(&bytes)
}
