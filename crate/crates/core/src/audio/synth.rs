use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AudioBuffer;
use crate::{Error, Result};

const VIBRATO_RATE_HZ: f64 = 5.0;
const PEAK_LEVEL: f64 = 0.9;

/// Parameters of a synthetic harmonic voice.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiceSpec {
    /// Fundamental frequency in Hz.
    pub f0: f64,
    pub n_harmonics: usize,
    /// Amplitude rolloff of the harmonic series, dB per octave.
    pub harmonic_rolloff: f64,
    pub duration_s: f64,
    /// Peak deviation of the slow f0 vibrato, in cents.
    pub vibrato_cents: f64,
    pub seed: u64,
}

impl VoiceSpec {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::Parameter(format!(
                "f0 must be positive, got {}",
                self.f0
            )));
        }
        if self.n_harmonics == 0 {
            return Err(Error::Parameter("n_harmonics must be at least 1".into()));
        }
        let top = self.f0 * self.n_harmonics as f64;
        if top >= sample_rate as f64 / 2.0 {
            return Err(Error::Parameter(format!(
                "highest harmonic {top} Hz aliases at {sample_rate} Hz"
            )));
        }
        if !(self.duration_s > 0.0)
            || !self.harmonic_rolloff.is_finite()
            || !(self.vibrato_cents >= 0.0)
        {
            return Err(Error::Parameter(
                "duration must be positive, rolloff finite, vibrato nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Renders a harmonic stack at `k * f0` with `harmonic_rolloff` dB/octave
/// amplitude decay and a 5 Hz vibrato, peak-normalized to 0.9.
///
/// Harmonic start phases and the vibrato phase are drawn from `spec.seed`.
pub fn synth_voice(spec: &VoiceSpec, sample_rate: u32) -> Result<AudioBuffer> {
    spec.validate(sample_rate)?;
    let n = (spec.duration_s * sample_rate as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vibrato_phase = rng.random_range(0.0..2.0 * PI);
    let harmonics: Vec<(f64, f64)> = (1..=spec.n_harmonics)
        .map(|k| {
            let octaves = (k as f64).log2();
            let amp = 10f64.powf(-spec.harmonic_rolloff * octaves / 20.0);
            (amp, rng.random_range(0.0..2.0 * PI))
        })
        .collect();

    let sr = sample_rate as f64;
    let depth = spec.vibrato_cents / 1200.0;
    let mut samples = Vec::with_capacity(n);
    // base phase of the fundamental; harmonic k runs at k times this
    let mut phase = 0.0f64;
    for i in 0..n {
        let t = i as f64 / sr;
        let f = spec.f0 * 2f64.powf(depth * (2.0 * PI * VIBRATO_RATE_HZ * t + vibrato_phase).sin());
        let s: f64 = harmonics
            .iter()
            .enumerate()
            .map(|(k, &(amp, ph0))| amp * ((k + 1) as f64 * phase + ph0).sin())
            .sum();
        samples.push(s);
        phase = (phase + 2.0 * PI * f / sr) % (2.0 * PI);
    }
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        let g = PEAK_LEVEL / peak;
        samples.iter_mut().for_each(|s| *s *= g);
    }
    AudioBuffer::new(samples, sample_rate)
}
