use super::{logsumexp, lse2};
use crate::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Per-frame log-probabilities over an alphabet that includes `blank`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbSeq {
    frames: Vec<Vec<f64>>,
    blank: usize,
}

impl LogProbSeq {
    /// Validates that each frame log-normalizes to 1 within 1e-9 and that
    /// all frames share one alphabet containing `blank`.
    pub fn new(frames: Vec<Vec<f64>>, blank: usize) -> Result<Self> {
        let seq = Self::new_unchecked(frames, blank)?;
        for (t, f) in seq.frames.iter().enumerate() {
            let z = logsumexp(f);
            if !((z).abs() <= NORMALIZATION_TOL) {
                return Err(Error::Validation(format!(
                    "frame {t} log-normalizer is {z}, expected 0"
                )));
            }
        }
        Ok(seq)
    }

    /// Skips the normalization check (shape is still validated). Useful when
    /// differentiating with respect to individual log-probabilities.
    pub fn new_unchecked(frames: Vec<Vec<f64>>, blank: usize) -> Result<Self> {
        let k = frames.first().map_or(0, Vec::len);
        if frames.iter().any(|f| f.len() != k) {
            return Err(Error::Shape("frames have different alphabet sizes".into()));
        }
        if !frames.is_empty() && blank >= k {
            return Err(Error::Shape(format!(
                "blank {blank} outside alphabet of {k}"
            )));
        }
        Ok(LogProbSeq { frames, blank })
    }

    /// Builds a sequence from probabilities (natural log taken per entry).
    pub fn from_probs(probs: &[Vec<f64>], blank: usize) -> Result<Self> {
        Self::new(
            probs
                .iter()
                .map(|f| f.iter().map(|p| p.ln()).collect())
                .collect(),
            blank,
        )
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtcOutput {
    pub loss: f64,
    /// `d loss / d logprob[t][k]`.
    pub grad: Vec<Vec<f64>>,
}

/// Fewest frames that can emit `target`: one per symbol plus a separating
/// blank between each pair of equal neighbours.
pub fn ctc_min_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Negative log-likelihood of `target` under CTC, summed over all
/// blank-extended alignments with the forward algorithm in log space.
/// The gradient comes from the forward-backward recursions.
pub fn ctc_loss(logprobs: &LogProbSeq, target: &[usize]) -> Result<CtcOutput> {
    let lp = logprobs.frames();
    let blank = logprobs.blank();
    let k = logprobs.alphabet_size();
    if let Some(&s) = target.iter().find(|&&s| s == blank || s >= k) {
        return Err(Error::Parameter(format!(
            "target symbol {s} is blank or outside the alphabet"
        )));
    }
    let t_len = lp.len();
    let required = ctc_min_frames(target).max(1);
    if t_len < required {
        return Err(Error::InfeasibleAlignment {
            required,
            available: t_len,
        });
    }

    let mut ext = Vec::with_capacity(2 * target.len() + 1);
    ext.push(blank);
    for &s in target {
        ext.push(s);
        ext.push(blank);
    }
    let s_len = ext.len();
    let skip = |s: usize| s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
    let neg = f64::NEG_INFINITY;

    // alpha includes the emission at t
    let mut alpha = vec![vec![neg; s_len]; t_len];
    alpha[0][0] = lp[0][ext[0]];
    if s_len > 1 {
        alpha[0][1] = lp[0][ext[1]];
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut a = alpha[t - 1][s];
            if s >= 1 {
                a = lse2(a, alpha[t - 1][s - 1]);
            }
            if skip(s) {
                a = lse2(a, alpha[t - 1][s - 2]);
            }
            alpha[t][s] = a + lp[t][ext[s]];
        }
    }
    let last = &alpha[t_len - 1];
    let log_p = if s_len > 1 {
        lse2(last[s_len - 1], last[s_len - 2])
    } else {
        last[0]
    };
    if !log_p.is_finite() {
        return Err(Error::Numeric("target has zero probability".into()));
    }

    // beta excludes the emission at t
    let mut beta = vec![vec![neg; s_len]; t_len];
    beta[t_len - 1][s_len - 1] = 0.0;
    if s_len > 1 {
        beta[t_len - 1][s_len - 2] = 0.0;
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let step = |s2: usize| beta[t + 1][s2] + lp[t + 1][ext[s2]];
            let mut b = step(s);
            if s + 1 < s_len {
                b = lse2(b, step(s + 1));
            }
            if s + 2 < s_len && skip(s + 2) {
                b = lse2(b, step(s + 2));
            }
            beta[t][s] = b;
        }
    }

    let mut grad = vec![vec![0.0; k]; t_len];
    let mut acc = vec![neg; k];
    for t in 0..t_len {
        acc.iter_mut().for_each(|a| *a = neg);
        for s in 0..s_len {
            acc[ext[s]] = lse2(acc[ext[s]], alpha[t][s] + beta[t][s]);
        }
        for (g, a) in grad[t].iter_mut().zip(&acc) {
            *g = -(a - log_p).exp();
        }
    }
    Ok(CtcOutput { loss: -log_p, grad })
}
