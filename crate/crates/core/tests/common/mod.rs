//! Oracles shared by the integration tests. Nothing here calls into the
//! code paths it is used to check.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;

/// Floor on the denominator of [`rel_err`]; gradients smaller than this are
/// compared absolutely.
pub const REL_FLOOR: f64 = 1e-4;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_grad(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest [`rel_err`] between two gradient vectors.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| rel_err(*a, *n))
        .fold(0.0, f64::max)
}

pub fn normal_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random log-softmax frames.
pub fn log_softmax_frames(rng: &mut impl Rng, t: usize, k: usize) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| {
            let z: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let m = z.iter().cloned().fold(f64::MIN, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            z.iter().map(|v| v - lse).collect()
        })
        .collect()
}

/// Collapses an alignment: merge repeats, then drop blanks.
pub fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &s in path {
        if Some(s) != prev && s != blank {
            out.push(s);
        }
        prev = Some(s);
    }
    out
}

/// Probability of `target` by enumerating every length-T path over the
/// alphabet and summing those that collapse to it.
pub fn ctc_brute_force_prob(logprobs: &[Vec<f64>], blank: usize, target: &[usize]) -> f64 {
    let t = logprobs.len();
    let k = logprobs[0].len();
    let mut total = 0.0;
    let mut path = vec![0usize; t];
    for code in 0..k.pow(t as u32) {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % k;
            c /= k;
        }
        if collapse(&path, blank) == target {
            total += path
                .iter()
                .enumerate()
                .map(|(i, &s)| logprobs[i][s].exp())
                .product::<f64>();
        }
    }
    total
}

/// Hann-windowed DTFT magnitude at `freq`.
pub fn dtft_magnitude(x: &[f64], sample_rate: f64, freq: f64) -> f64 {
    let n = x.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    let step = 2.0 * PI * freq / sample_rate;
    for (i, &v) in x.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos();
        re += w * v * (step * i as f64).cos();
        im -= w * v * (step * i as f64).sin();
    }
    re.hypot(im)
}

/// Strongest frequency in `[lo, hi]`: 1 Hz scan, then 0.05 Hz refinement.
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

pub fn sine(freq: f64, sample_rate: u32, seconds: f64, amplitude: f64) -> Vec<f64> {
    let n = (seconds * sample_rate as f64).round() as usize;
    (0..n)
        .map(|i| amplitude * (2.0 * PI * freq * i as f64 / sample_rate as f64).sin())
        .collect()
}
