//! Stacked-LSTM speaker encoder with a linear projection and L2
//! normalization, exact backpropagation, plain SGD and checkpoints.

mod checkpoint;
pub mod gradcheck;
mod lstm;
mod params;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, MAGIC, VERSION,
};
pub use lstm::{backward, encode, encode_backward, encode_batch, forward, Trace};
pub use params::{init_params, sgd_step, EncoderConfig, EncoderParams, Gradients, LstmLayer};

use std::ops::Deref;

use crate::{Error, Result};

/// A unit-norm speaker embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `v` to unit length. Fails on a zero or non-finite vector.
    pub fn normalized(mut v: Vec<f64>) -> Result<Self> {
        let norm = l2_norm(&v);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Numeric(format!(
                "cannot normalize vector of norm {norm}"
            )));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(Embedding(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Embedding {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Normalized mean of a set of embeddings.
pub fn centroid<E: AsRef<[f64]>>(embeddings: &[E]) -> Result<Embedding> {
    let dim = embeddings
        .first()
        .map(|e| e.as_ref().len())
        .ok_or_else(|| Error::Shape("centroid of an empty set".into()))?;
    let mut sum = vec![0.0; dim];
    for e in embeddings {
        let e = e.as_ref();
        if e.len() != dim {
            return Err(Error::Shape(format!("embedding dims {} vs {dim}", e.len())));
        }
        sum.iter_mut().zip(e).for_each(|(s, x)| *s += x);
    }
    Embedding::normalized(sum)
}
