//! Binary checkpoint format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "DSRK"                      4 bytes
//! version = 1                 u32
//! n_layers, hidden_dim, embed_dim, input_dim, seed_lo, seed_hi   6 x u32
//! per tensor, in EncoderParams::tensor_names order:
//!     name length             u32
//!     name                    UTF-8 bytes
//!     element count           u32
//!     elements                f64 each
//! ```

use std::fs;
use std::path::Path;

use super::{EncoderConfig, EncoderParams};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DSRK";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(params: &EncoderParams) -> Vec<u8> {
    let c = &params.config;
    let mut out = Vec::with_capacity(32 + 8 * params.num_params() + 32 * params.layers.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [
        c.n_layers as u32,
        c.hidden_dim as u32,
        c.embed_dim as u32,
        c.input_dim as u32,
        c.seed as u32,
        (c.seed >> 32) as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (name, t) in params.tensor_names().iter().zip(params.tensors()) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.len() as u32).to_le_bytes());
        for x in t {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<EncoderParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut f = [0u32; 6];
    for v in &mut f {
        *v = r.u32()?;
    }
    let config = EncoderConfig {
        n_layers: f[0] as usize,
        hidden_dim: f[1] as usize,
        embed_dim: f[2] as usize,
        input_dim: f[3] as usize,
        seed: f[4] as u64 | (f[5] as u64) << 32,
    };
    config
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut params = EncoderParams::zeros(config);
    let names = params.tensor_names();
    for (name, tensor) in names.iter().zip(params.tensors_mut()) {
        let len = r.u32()? as usize;
        let got = r.take(len)?;
        if got != name.as_bytes() {
            return Err(Error::Checkpoint(format!(
                "expected tensor {name}, found {:?}",
                String::from_utf8_lossy(got)
            )));
        }
        let count = r.u32()? as usize;
        if count != tensor.len() {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has {count} elements, config implies {}",
                tensor.len()
            )));
        }
        for x in tensor.iter_mut() {
            *x = r.f64()?;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    if !params.is_finite() {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &EncoderParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<EncoderParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
