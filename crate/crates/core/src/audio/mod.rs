//! Audio representation, PCM16 WAV I/O, synthetic voices and log-mel features.

mod mel;
mod synth;
mod wav;

pub(crate) use mel::hann_window;
pub use mel::{hz_to_mel, log_mel, mel_to_hz, MelConfig, MelFilterbank, MelFrames, LOG_FLOOR};
pub use synth::{synth_voice, VoiceSpec};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav};

use crate::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono audio at a fixed sample rate. Samples are finite and lie in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Builds a buffer, clipping samples into `[-1, 1]`.
    ///
    /// Fails on a zero sample rate or any non-finite sample.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Numeric(format!("sample {i} is not finite")));
        }
        Ok(Self::from_clipped(samples, sample_rate))
    }

    pub(crate) fn from_clipped(mut samples: Vec<f64>, sample_rate: u32) -> Self {
        for s in &mut samples {
            *s = s.clamp(-1.0, 1.0);
        }
        AudioBuffer {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}
