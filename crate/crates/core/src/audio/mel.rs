use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::AudioBuffer;
use crate::{Error, Result};

/// Floor applied to natural-log mel energies.
pub const LOG_FLOOR: f64 = -10.0;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub win_s: f64,
    pub hop_s: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            n_mels: 20,
            win_s: 0.025,
            hop_s: 0.010,
        }
    }
}

/// Time-ordered log-mel feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFrames {
    pub frames: Vec<Vec<f64>>,
    pub frame_hop_s: f64,
    pub frame_win_s: f64,
}

impl MelFrames {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Width of each frame, or 0 when there are no frames.
    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    /// Wraps raw feature rows (used by tests and synthetic inputs).
    pub fn from_rows(frames: Vec<Vec<f64>>) -> Self {
        MelFrames {
            frames,
            frame_hop_s: 0.0,
            frame_win_s: 0.0,
        }
    }
}

/// Triangular HTK-mel filterbank over the bins of an `n_fft`-point spectrum,
/// spanning 0 Hz to Nyquist.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// Per filter: first bin index and weights from that bin on.
    filters: Vec<(usize, Vec<f64>)>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Self {
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let n_bins = n_fft / 2 + 1;
        let filters = (0..n_mels)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let weight = |f: f64| {
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                };
                let first = (lo / bin_hz).floor() as usize;
                let last = ((hi / bin_hz).ceil() as usize).min(n_bins - 1);
                let w = (first..=last).map(|k| weight(k as f64 * bin_hz)).collect();
                (first, w)
            })
            .collect();
        MelFilterbank {
            filters,
            centers_hz: edges[1..=n_mels].to_vec(),
        }
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn apply(&self, magnitude: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|(first, w)| w.iter().zip(&magnitude[*first..]).map(|(a, b)| a * b).sum())
            .collect()
    }
}

pub(crate) fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

struct Stft {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    n_fft: usize,
}

impl Stft {
    fn new(win_len: usize) -> Self {
        let n_fft = win_len.next_power_of_two();
        Stft {
            fft: FftPlanner::new().plan_fft_forward(n_fft),
            window: hann_window(win_len),
            n_fft,
        }
    }

    fn magnitude(&self, frame: &[f64], scratch: &mut Vec<Complex<f64>>) -> Vec<f64> {
        scratch.clear();
        scratch.extend(
            frame
                .iter()
                .zip(&self.window)
                .map(|(x, w)| Complex::new(x * w, 0.0)),
        );
        scratch.resize(self.n_fft, Complex::new(0.0, 0.0));
        self.fft.process(scratch);
        scratch[..self.n_fft / 2 + 1]
            .iter()
            .map(|c| c.norm())
            .collect()
    }
}

/// Log-mel features: Hann-windowed magnitude STFT, HTK triangular
/// filterbank, natural log floored at [`LOG_FLOOR`].
///
/// The FFT size is the window length rounded up to a power of two. Frames
/// are not centered, so the count is `floor((n - win) / hop) + 1`.
pub fn log_mel(buffer: &AudioBuffer, config: &MelConfig) -> Result<MelFrames> {
    let sr = buffer.sample_rate() as f64;
    let win = (config.win_s * sr).round() as usize;
    let hop = (config.hop_s * sr).round() as usize;
    if config.n_mels == 0 || win == 0 || hop == 0 {
        return Err(Error::Parameter(
            "n_mels, window and hop must all be positive".into(),
        ));
    }
    if buffer.len() < win {
        return Err(Error::EmptyInput(format!(
            "{} samples is shorter than one {win}-sample window",
            buffer.len()
        )));
    }
    let stft = Stft::new(win);
    let bank = MelFilterbank::new(config.n_mels, stft.n_fft, buffer.sample_rate());
    let n_frames = (buffer.len() - win) / hop + 1;
    let mut scratch = Vec::with_capacity(stft.n_fft);
    let frames = (0..n_frames)
        .map(|t| {
            let mag = stft.magnitude(&buffer.samples()[t * hop..t * hop + win], &mut scratch);
            bank.apply(&mag)
                .into_iter()
                .map(|e| {
                    if e > 0.0 {
                        e.ln().max(LOG_FLOOR)
                    } else {
                        LOG_FLOOR
                    }
                })
                .collect()
        })
        .collect();
    Ok(MelFrames {
        frames,
        frame_hop_s: config.hop_s,
        frame_win_s: config.win_s,
    })
}
