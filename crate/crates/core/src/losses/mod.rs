//! Objectives: triplet (contrastive) loss, GE2E, CTC, sequence
//! cross-entropy and their weighted ASR combination.
//!
//! Every loss returns its value together with analytic gradients.

mod asr;
mod ctc;
mod ge2e;
mod triplet;

pub use asr::{asr_loss, s2s_ce_loss, AsrMixWeight, CrossEntropyOutput};
pub use ctc::{ctc_loss, ctc_min_frames, CtcOutput, LogProbSeq};
pub use ge2e::{ge2e_loss, Ge2eOutput, Ge2eScale};
pub use triplet::{triplet_loss, TripletMargin, TripletOutput};

/// Numerically stable `log(sum(exp(xs)))`; `-inf` for an empty or all
/// `-inf` input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn lse2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}
