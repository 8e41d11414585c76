//! Pitch shifting and tempo changing for contrastive sample fabrication.
//!
//! Both effects sit on one phase vocoder (1024-point FFT, hop 256, Hann).
//! Tempo change is a pure time stretch. Pitch shift stretches by the inverse
//! of the frequency ratio and then resamples by linear interpolation, which
//! scales every frequency by the ratio while keeping the duration.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioBuffer;
use crate::{Error, Result};

pub const FFT_SIZE: usize = 1024;
pub const HOP: usize = 256;
/// Shortest input the vocoder accepts, in samples.
pub const MIN_INPUT: usize = 4 * FFT_SIZE;

/// Strength of the pitch-lowering and tempo-slowing augmentations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentCoeffs {
    /// Shift-down strength `c`; spectral content is scaled by `1 - c / 2`.
    pub pitch_coeff: f64,
    /// Speed factor `t`; output duration is the input duration divided by `t`.
    pub tempo_coeff: f64,
}

impl AugmentCoeffs {
    pub fn new(pitch_coeff: f64, tempo_coeff: f64) -> Result<Self> {
        let c = AugmentCoeffs {
            pitch_coeff,
            tempo_coeff,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pitch", self.pitch_coeff), ("tempo", self.tempo_coeff)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Parameter(format!(
                    "{name} coefficient must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn frequency_ratio(&self) -> f64 {
        pitch_ratio(self.pitch_coeff)
    }
}

/// Frequency ratio applied by [`pitch_shift`] for a given coefficient.
pub fn pitch_ratio(pitch_coeff: f64) -> f64 {
    1.0 - 0.5 * pitch_coeff
}

fn check_len(buffer: &AudioBuffer) -> Result<()> {
    if buffer.len() < MIN_INPUT {
        return Err(Error::EmptyInput(format!(
            "{} samples, the vocoder needs at least {MIN_INPUT}",
            buffer.len()
        )));
    }
    Ok(())
}

/// Lowers every frequency by `1 - pitch_coeff / 2` and keeps the duration.
/// A coefficient of exactly 0 returns the input unchanged.
pub fn pitch_shift(buffer: &AudioBuffer, pitch_coeff: f64) -> Result<AudioBuffer> {
    if pitch_coeff == 0.0 {
        return Ok(buffer.clone());
    }
    if !(pitch_coeff > 0.0 && pitch_coeff <= 1.0) {
        return Err(Error::Parameter(format!(
            "pitch coefficient must lie in (0, 1], got {pitch_coeff}"
        )));
    }
    check_len(buffer)?;
    let ratio = pitch_ratio(pitch_coeff);
    let stretched = time_stretch(buffer.samples(), 1.0 / ratio);
    let out = resample_linear(&stretched, ratio, buffer.len());
    Ok(AudioBuffer::from_clipped(out, buffer.sample_rate()))
}

/// Slows playback by `tempo_coeff` without changing pitch; the output lasts
/// `duration / tempo_coeff`. A coefficient of exactly 1 returns the input.
pub fn tempo_change(buffer: &AudioBuffer, tempo_coeff: f64) -> Result<AudioBuffer> {
    if tempo_coeff == 1.0 {
        return Ok(buffer.clone());
    }
    if !(tempo_coeff > 0.0 && tempo_coeff <= 1.0) {
        return Err(Error::Parameter(format!(
            "tempo coefficient must lie in (0, 1], got {tempo_coeff}"
        )));
    }
    check_len(buffer)?;
    let out = time_stretch(buffer.samples(), tempo_coeff);
    Ok(AudioBuffer::from_clipped(out, buffer.sample_rate()))
}

/// Reads `input` at positions `n * step` for `n < out_len`, interpolating
/// linearly and holding the last sample past the end.
fn resample_linear(input: &[f64], step: f64, out_len: usize) -> Vec<f64> {
    let last = input.len() - 1;
    (0..out_len)
        .map(|n| {
            let pos = n as f64 * step;
            let i = pos.floor() as usize;
            if i >= last {
                return input[last];
            }
            let frac = pos - i as f64;
            input[i] * (1.0 - frac) + input[i + 1] * frac
        })
        .collect()
}

fn wrap_phase(p: f64) -> f64 {
    p - 2.0 * PI * (p / (2.0 * PI)).round()
}

/// Phase-vocoder time stretch. `rate > 1` speeds up, `rate < 1` slows down;
/// the output has `round(len / rate)` samples.
pub fn time_stretch(input: &[f64], rate: f64) -> Vec<f64> {
    let n_bins = FFT_SIZE / 2 + 1;
    let half = FFT_SIZE / 2;
    let target = (input.len() as f64 / rate).round() as usize;
    let window = crate::audio::hann_window(FFT_SIZE);

    // centered analysis: half a window of zeros each side, padded to whole hops
    let n_frames = 1 + input.len().div_ceil(HOP);
    let mut padded = vec![0.0; (n_frames - 1) * HOP + FFT_SIZE];
    padded[half..half + input.len()].copy_from_slice(input);

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(FFT_SIZE);
    let inv = planner.plan_fft_inverse(FFT_SIZE);

    let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE];
    let mut spectra: Vec<Vec<Complex<f64>>> = (0..n_frames)
        .map(|t| {
            for (i, c) in buf.iter_mut().enumerate() {
                *c = Complex::new(padded[t * HOP + i] * window[i], 0.0);
            }
            fwd.process(&mut buf);
            buf[..n_bins].to_vec()
        })
        .collect();
    spectra.push(vec![Complex::new(0.0, 0.0); n_bins]);

    let expected: Vec<f64> = (0..n_bins)
        .map(|b| 2.0 * PI * b as f64 * HOP as f64 / FFT_SIZE as f64)
        .collect();
    let mut phase: Vec<f64> = spectra[0].iter().map(|c| c.arg()).collect();

    let n_out = ((n_frames as f64) / rate).ceil() as usize;
    let out_len = (n_out - 1) * HOP + FFT_SIZE;
    let mut out = vec![0.0; out_len.max(half + target)];
    let mut norm = vec![0.0; out.len()];
    for m in 0..n_out {
        let pos = m as f64 * rate;
        let k = pos.floor() as usize;
        if k >= n_frames {
            break;
        }
        let alpha = pos - k as f64;
        let (cur, next) = (&spectra[k], &spectra[k + 1]);
        for b in 0..n_bins {
            let mag = (1.0 - alpha) * cur[b].norm() + alpha * next[b].norm();
            buf[b] = Complex::from_polar(mag, phase[b]);
            let dphi = wrap_phase(next[b].arg() - cur[b].arg() - expected[b]);
            phase[b] += expected[b] + dphi;
        }
        // Hermitian completion for a real inverse
        for b in 1..half {
            buf[FFT_SIZE - b] = buf[b].conj();
        }
        buf[0].im = 0.0;
        buf[half].im = 0.0;
        inv.process(&mut buf);
        let start = m * HOP;
        for i in 0..FFT_SIZE {
            out[start + i] += window[i] * buf[i].re / FFT_SIZE as f64;
            norm[start + i] += window[i] * window[i];
        }
    }
    out.iter_mut().zip(&norm).for_each(|(y, &n)| {
        if n > 1e-10 {
            *y /= n;
        }
    });
    out.drain(..half);
    out.resize(target, 0.0);
    out
}
