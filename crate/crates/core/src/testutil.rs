//! Independent spectral oracles for tests. Direct DFT evaluation, no FFT.

use std::f64::consts::PI;

/// Magnitude of the Hann-windowed DTFT of `x` at frequency `freq` (Hz).
pub fn dtft_magnitude(x: &[f64], sample_rate: f64, freq: f64) -> f64 {
    let n = x.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    let step = 2.0 * PI * freq / sample_rate;
    for (i, &v) in x.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos();
        let ph = step * i as f64;
        re += w * v * ph.cos();
        im -= w * v * ph.sin();
    }
    re.hypot(im)
}

/// Frequency of the strongest spectral component in `[lo, hi]`, located by a
/// 1 Hz grid scan refined to 0.05 Hz.
pub fn dominant_frequency(x: &[f64], sample_rate: f64, lo: f64, hi: f64) -> f64 {
    let scan = |from: f64, to: f64, step: f64| {
        let mut best = (from, f64::MIN);
        let mut f = from;
        while f <= to {
            let m = dtft_magnitude(x, sample_rate, f);
            if m > best.1 {
                best = (f, m);
            }
            f += step;
        }
        best.0
    };
    let coarse = scan(lo, hi, 1.0);
    scan(coarse - 1.0, coarse + 1.0, 0.05)
}

/// Index of the largest-magnitude DFT bin in `1..min(n/2, max_bin)`, by
/// direct summation.
pub fn peak_dft_bin(x: &[f64], max_bin: usize) -> usize {
    let n = x.len();
    let mut best = (0, f64::MIN);
    for k in 1..(n / 2).min(max_bin) {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &v) in x.iter().enumerate() {
            let ph = 2.0 * PI * ((k * i) % n) as f64 / n as f64;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        let m = re.hypot(im);
        if m > best.1 {
            best = (k, m);
        }
    }
    best.0
}

pub fn sine(freq: f64, sample_rate: u32, seconds: f64, amplitude: f64) -> Vec<f64> {
    let n = (seconds * sample_rate as f64).round() as usize;
    (0..n)
        .map(|i| amplitude * (2.0 * PI * freq * i as f64 / sample_rate as f64).sin())
        .collect()
}
