use crate::{Error, Result};

/// Weight of the sequence cross-entropy term in the ASR objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsrMixWeight(f64);

impl AsrMixWeight {
    pub fn new(lambda_s2s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda_s2s) {
            return Err(Error::Parameter(format!(
                "lambda_s2s must lie in [0, 1], got {lambda_s2s}"
            )));
        }
        Ok(AsrMixWeight(lambda_s2s))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for AsrMixWeight {
    fn default() -> Self {
        AsrMixWeight(0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropyOutput {
    pub loss: f64,
    pub grad: Vec<Vec<f64>>,
}

/// Mean over decoder steps of `-log p_t(target_t)`, with the gradient
/// with respect to the supplied log-probabilities.
pub fn s2s_ce_loss(logprobs: &[Vec<f64>], target: &[usize]) -> Result<CrossEntropyOutput> {
    if logprobs.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} decoder steps for {} target symbols",
            logprobs.len(),
            target.len()
        )));
    }
    if target.is_empty() {
        return Err(Error::Shape("empty target".into()));
    }
    let n = target.len() as f64;
    let mut loss = 0.0;
    let mut grad: Vec<Vec<f64>> = logprobs.iter().map(|f| vec![0.0; f.len()]).collect();
    for (t, (&y, f)) in target.iter().zip(logprobs).enumerate() {
        let lp = *f.get(y).ok_or_else(|| {
            Error::Shape(format!(
                "symbol {y} outside alphabet of {} at step {t}",
                f.len()
            ))
        })?;
        loss -= lp / n;
        grad[t][y] = -1.0 / n;
    }
    Ok(CrossEntropyOutput { loss, grad })
}

/// `lambda * l_s2s + (1 - lambda) * l_ctc`.
pub fn asr_loss(l_s2s: f64, l_ctc: f64, lambda_s2s: f64) -> Result<f64> {
    let w = AsrMixWeight::new(lambda_s2s)?.get();
    Ok(w * l_s2s + (1.0 - w) * l_ctc)
}
