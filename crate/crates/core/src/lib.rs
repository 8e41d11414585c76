//! Trainable core of a dysarthric speech reconstruction pipeline.
//!
//! The crate covers everything needed to fine-tune an LSTM speaker encoder
//! with a triplet objective whose negatives are pitch-lowered copies of the
//! anchor and whose positives are tempo-stretched copies:
//!
//! * [`audio`]: PCM16 WAV I/O, synthetic harmonic voices, log-mel features.
//! * [`augment`]: phase-vocoder tempo change and pitch shift.
//! * [`encoder`]: stacked LSTM encoder with exact backpropagation, checkpoints.
//! * [`losses`]: triplet, GE2E, CTC, sequence cross-entropy and the weighted ASR loss.
//! * [`sampling`]: gender- and severity-dependent triplet construction.
//! * [`eval`]: cosine, EER, WER, MOS confidence intervals and the gender probe.
//! * [`pipeline`]: corpus synthesis, GE2E pretraining, triplet fine-tuning, evaluation.
//!
//! Batch work (feature extraction, encoding, backpropagation) runs through
//! [`par`], which uses rayon when the `parallel` feature is enabled and plain
//! iterators otherwise. Results are identical either way.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod augment;
pub mod encoder;
mod error;
pub mod eval;
pub mod losses;
pub mod par;
pub mod pipeline;
pub mod sampling;
pub mod seed;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
