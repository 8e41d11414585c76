//! Evaluation metrics: cosine similarity, equal error rate, word error rate,
//! MOS means with 95% confidence intervals, and the nearest-centroid gender
//! probe.

mod report;
mod ttable;

pub use report::{Report, ReportRow, CSV_HEADER};
pub use ttable::t975;

use std::fmt;

use crate::sampling::Gender;
use crate::{Error, Result};

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cosine of dims {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Numeric("cosine with a zero vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialLabel {
    Genuine,
    Impostor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialScore {
    pub score: f64,
    pub label: TrialLabel,
}

impl TrialScore {
    pub fn is_genuine(&self) -> bool {
        self.label == TrialLabel::Genuine
    }

    pub fn genuine(score: f64) -> Self {
        TrialScore {
            score,
            label: TrialLabel::Genuine,
        }
    }

    pub fn impostor(score: f64) -> Self {
        TrialScore {
            score,
            label: TrialLabel::Impostor,
        }
    }
}

/// Equal error rate by a sweep over every distinct score as the acceptance
/// threshold (accept when `score >= threshold`). Returns `(FAR + FRR) / 2`
/// at the threshold minimizing `|FAR - FRR|`, preferring the lower
/// threshold on ties.
pub fn eer(trials: &[TrialScore]) -> Result<f64> {
    let n_gen = trials
        .iter()
        .filter(|t| t.label == TrialLabel::Genuine)
        .count();
    let n_imp = trials.len() - n_gen;
    if n_gen == 0 || n_imp == 0 {
        return Err(Error::InsufficientTrials(format!(
            "{n_gen} genuine and {n_imp} impostor trials"
        )));
    }
    if let Some(t) = trials.iter().find(|t| !t.score.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite trial score {}",
            t.score
        )));
    }
    let mut sorted: Vec<TrialScore> = trials.to_vec();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));

    // walking thresholds upwards: everything below the threshold is rejected
    let (mut rejected_gen, mut rejected_imp) = (0usize, 0usize);
    let mut best: Option<(f64, f64)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let thr = sorted[i].score;
        let far = (n_imp - rejected_imp) as f64 / n_imp as f64;
        let frr = rejected_gen as f64 / n_gen as f64;
        let gap = (far - frr).abs();
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, (far + frr) / 2.0));
        }
        while i < sorted.len() && sorted[i].score == thr {
            match sorted[i].label {
                TrialLabel::Genuine => rejected_gen += 1,
                TrialLabel::Impostor => rejected_imp += 1,
            }
            i += 1;
        }
    }
    Ok(best.expect("at least one trial").1)
}

/// Lowercases, splits on whitespace and strips leading and trailing ASCII
/// punctuation from each token; tokens that become empty are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| c.is_ascii_punctuation())
                .to_string()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Word-level edit distance with unit costs.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=hypothesis.len()).collect();
    let mut cur = vec![0; hypothesis.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let sub = prev[j] + usize::from(r != h);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[hypothesis.len()]
}

/// `(substitutions + deletions + insertions) / |reference|` over tokenized
/// word sequences.
pub fn wer(reference: &str, hypothesis: &str) -> Result<f64> {
    let (errors, words) = wer_counts(reference, hypothesis)?;
    Ok(errors as f64 / words as f64)
}

/// Edit errors and reference word count, for corpus-level aggregation.
pub fn wer_counts(reference: &str, hypothesis: &str) -> Result<(usize, usize)> {
    let r = tokenize(reference);
    if r.is_empty() {
        return Err(Error::UndefinedMetric("WER of an empty reference".into()));
    }
    let h = tokenize(hypothesis);
    Ok((edit_distance(&r, &h), r.len()))
}

/// Mean opinion score with a two-sided 95% t confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosSummary {
    pub mean: f64,
    pub half_width_95: f64,
    pub n: usize,
}

impl MosSummary {
    pub fn ci(&self) -> (f64, f64) {
        (
            self.mean - self.half_width_95,
            self.mean + self.half_width_95,
        )
    }
}

impl fmt::Display for MosSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.half_width_95)
    }
}

/// Aggregates 1-5 ratings. A single rating has zero half-width.
pub fn mos_summary(scores: &[f64]) -> Result<MosSummary> {
    if scores.is_empty() {
        return Err(Error::Validation("no MOS ratings".into()));
    }
    if let Some(s) = scores.iter().find(|s| !(1.0..=5.0).contains(*s)) {
        return Err(Error::Validation(format!("rating {s} outside [1, 5]")));
    }
    let n = scores.len();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let half_width_95 = if n < 2 {
        0.0
    } else {
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
        t975(n - 1) * var.sqrt() / (n as f64).sqrt()
    };
    Ok(MosSummary {
        mean,
        half_width_95,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub gender: Gender,
    /// Winning cosine minus losing cosine; never negative.
    pub margin: f64,
}

/// Nearest-centroid gender decision by cosine similarity. Exact ties go to
/// female.
pub fn gender_probe(
    embedding: &[f64],
    female_centroid: &[f64],
    male_centroid: &[f64],
) -> Result<ProbeResult> {
    let f = cosine(embedding, female_centroid)?;
    let m = cosine(embedding, male_centroid)?;
    Ok(if f >= m {
        ProbeResult {
            gender: Gender::Female,
            margin: f - m,
        }
    } else {
        ProbeResult {
            gender: Gender::Male,
            margin: m - f,
        }
    })
}
