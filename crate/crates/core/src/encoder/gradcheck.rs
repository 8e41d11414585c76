//! Central finite-difference verification of analytic gradients.

use super::{encode, encode_backward, EncoderParams};
use crate::audio::MelFrames;
use crate::Result;

/// Denominator floor for [`relative_error`]. Below it the comparison is
/// effectively absolute, where finite-difference roundoff dominates.
pub const RELATIVE_FLOOR: f64 = 1e-4;

/// `|a - b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Central difference of `f` along coordinate `i` of `x`; `x` is restored.
pub fn central_difference<F>(x: &mut [f64], i: usize, h: f64, mut f: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let orig = x[i];
    x[i] = orig + h;
    let up = f(x);
    x[i] = orig - h;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Tensor name and flat index of the worst coordinate.
    pub worst: (String, usize),
    pub checked: usize,
}

/// Compares [`encode_backward`] against central differences of
/// `grad_out . encode(params, frames)` for every parameter.
pub fn check_encoder(
    params: &EncoderParams,
    frames: &MelFrames,
    grad_out: &[f64],
    h: f64,
) -> Result<GradCheckReport> {
    let analytic = encode_backward(params, frames, grad_out)?;
    let names = params.tensor_names();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (String::new(), 0),
        checked: 0,
    };
    let objective = |p: &EncoderParams| -> f64 {
        let e = encode(p, frames).expect("shapes validated by encode_backward");
        e.iter().zip(grad_out).map(|(a, b)| a * b).sum()
    };
    for (ti, name) in names.iter().enumerate() {
        let n = analytic.0.tensors()[ti].len();
        for i in 0..n {
            let orig = probe.tensors_mut()[ti][i];
            probe.tensors_mut()[ti][i] = orig + h;
            let up = objective(&probe);
            probe.tensors_mut()[ti][i] = orig - h;
            let down = objective(&probe);
            probe.tensors_mut()[ti][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic.0.tensors()[ti][i], numeric);
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = (name.clone(), i);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
