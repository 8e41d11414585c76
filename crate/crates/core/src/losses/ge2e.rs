use super::logsumexp;
use crate::{Error, Result};

/// Learned affine map `w * cos + b` applied to GE2E similarities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ge2eScale {
    pub w: f64,
    pub b: f64,
}

impl Ge2eScale {
    pub const MIN_W: f64 = 1e-6;

    pub fn new(w: f64, b: f64) -> Result<Self> {
        if !(w > 0.0) || !b.is_finite() {
            return Err(Error::Parameter(format!(
                "GE2E scale needs w > 0, got w={w} b={b}"
            )));
        }
        Ok(Ge2eScale { w, b })
    }

    /// Keeps `w` positive after a gradient step.
    pub fn project(&mut self) {
        self.w = self.w.max(Self::MIN_W);
    }
}

impl Default for Ge2eScale {
    fn default() -> Self {
        Ge2eScale { w: 10.0, b: -5.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ge2eOutput {
    pub loss: f64,
    /// Same `[speaker][utterance][dim]` layout as the input.
    pub grad_embeddings: Vec<Vec<Vec<f64>>>,
    pub grad_w: f64,
    pub grad_b: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Softmax GE2E loss over `N` speakers with `M` utterances each.
///
/// The similarity of utterance `i` of speaker `j` to speaker `k` is
/// `w * cos(e_ji, c_k) + b`, where `c_j` omits `e_ji` itself. The loss sums
/// `-S(j,i,j) + logsumexp_k S(j,i,k)` over all utterances.
pub fn ge2e_loss<E: AsRef<[f64]>>(embeddings: &[Vec<E>], scale: Ge2eScale) -> Result<Ge2eOutput> {
    let n = embeddings.len();
    let m = embeddings.first().map_or(0, Vec::len);
    if n < 2 || m < 2 {
        return Err(Error::InsufficientBatch(format!(
            "GE2E needs at least 2 speakers x 2 utterances, got {n} x {m}"
        )));
    }
    let dim = embeddings[0][0].as_ref().len();
    for spk in embeddings {
        if spk.len() != m {
            return Err(Error::Shape(
                "speakers have different utterance counts".into(),
            ));
        }
        if spk.iter().any(|e| e.as_ref().len() != dim) {
            return Err(Error::Shape("embeddings have different dimensions".into()));
        }
    }

    let sums: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|spk| {
            let mut s = vec![0.0; dim];
            for e in spk {
                s.iter_mut().zip(e.as_ref()).for_each(|(a, b)| *a += b);
            }
            s
        })
        .collect();
    let full: Vec<Vec<f64>> = sums
        .iter()
        .map(|s| s.iter().map(|x| x / m as f64).collect())
        .collect();

    let mut grads = vec![vec![vec![0.0; dim]; m]; n];
    // gradient w.r.t. each full centroid, spread over its utterances at the end
    let mut grad_full = vec![vec![0.0; dim]; n];
    let mut loss = 0.0;
    let (mut grad_w, mut grad_b) = (0.0, 0.0);
    let mut cos = vec![0.0; n];
    let mut sim = vec![0.0; n];

    for j in 0..n {
        for i in 0..m {
            let e = embeddings[j][i].as_ref();
            let e_norm = dot(e, e).sqrt();
            let own: Vec<f64> = sums[j]
                .iter()
                .zip(e)
                .map(|(s, x)| (s - x) / (m - 1) as f64)
                .collect();
            let centroid = |k: usize| if k == j { &own[..] } else { &full[k][..] };
            for k in 0..n {
                let c = centroid(k);
                let c_norm = dot(c, c).sqrt();
                if e_norm == 0.0 || c_norm == 0.0 {
                    return Err(Error::Numeric("zero-length embedding or centroid".into()));
                }
                cos[k] = dot(e, c) / (e_norm * c_norm);
                sim[k] = scale.w * cos[k] + scale.b;
            }
            let lse = logsumexp(&sim);
            loss += lse - sim[j];
            for k in 0..n {
                let d_sim = (sim[k] - lse).exp() - if k == j { 1.0 } else { 0.0 };
                grad_w += d_sim * cos[k];
                grad_b += d_sim;
                let d_cos = scale.w * d_sim;
                let c = centroid(k);
                let c_norm = dot(c, c).sqrt();
                let inv = 1.0 / (e_norm * c_norm);
                for d in 0..dim {
                    grads[j][i][d] += d_cos * (c[d] * inv - cos[k] * e[d] / (e_norm * e_norm));
                }
                let dc: Vec<f64> = (0..dim)
                    .map(|d| d_cos * (e[d] * inv - cos[k] * c[d] / (c_norm * c_norm)))
                    .collect();
                if k == j {
                    for (u, g) in grads[j].iter_mut().enumerate() {
                        if u != i {
                            g.iter_mut()
                                .zip(&dc)
                                .for_each(|(g, x)| *g += x / (m - 1) as f64);
                        }
                    }
                } else {
                    grad_full[k].iter_mut().zip(&dc).for_each(|(g, x)| *g += x);
                }
            }
        }
    }
    for (k, gc) in grad_full.iter().enumerate() {
        for g in &mut grads[k] {
            g.iter_mut().zip(gc).for_each(|(g, x)| *g += x / m as f64);
        }
    }
    Ok(Ge2eOutput {
        loss,
        grad_embeddings: grads,
        grad_w,
        grad_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Ge2eScale {
        Ge2eScale::new(1.0, 0.0).unwrap()
    }

    #[test]
    fn orthogonal_hand_value() {
        let e = vec![vec![vec![1.0, 0.0]; 2], vec![vec![0.0, 1.0]; 2]];
        let out = ge2e_loss(&e, unit()).unwrap();
        let per = -1.0 + (1f64.exp() + 1.0).ln();
        assert!((per - 0.313262).abs() < 1e-6);
        assert!((out.loss - 4.0 * per).abs() < 1e-12);
        assert!((out.loss - 1.253046).abs() < 1e-6);
    }

    #[test]
    fn speaker_permutation_invariant() {
        let e = vec![
            vec![vec![0.3, 0.9, 0.1], vec![0.2, 0.8, -0.1]],
            vec![vec![0.9, -0.1, 0.2], vec![0.7, 0.1, 0.4]],
            vec![vec![-0.2, 0.1, 0.9], vec![0.0, 0.3, 0.8]],
        ];
        let base = ge2e_loss(&e, Ge2eScale::default()).unwrap().loss;
        let perm = vec![e[2].clone(), e[0].clone(), e[1].clone()];
        let swapped: Vec<Vec<Vec<f64>>> =
            e.iter().map(|s| vec![s[1].clone(), s[0].clone()]).collect();
        assert!((ge2e_loss(&perm, Ge2eScale::default()).unwrap().loss - base).abs() < 1e-12);
        assert!((ge2e_loss(&swapped, Ge2eScale::default()).unwrap().loss - base).abs() < 1e-12);
    }

    #[test]
    fn bias_gradient_vanishes() {
        let e = vec![
            vec![vec![0.6, 0.8]; 2],
            vec![vec![1.0, 0.0], vec![0.8, 0.6]],
        ];
        let out = ge2e_loss(&e, Ge2eScale::default()).unwrap();
        assert!(out.grad_b.abs() < 1e-12);
    }

    #[test]
    fn insufficient_batches() {
        let one: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0], vec![1.0]]];
        assert!(matches!(
            ge2e_loss(&one, unit()),
            Err(Error::InsufficientBatch(_))
        ));
        let thin: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0]], vec![vec![1.0]]];
        assert!(matches!(
            ge2e_loss(&thin, unit()),
            Err(Error::InsufficientBatch(_))
        ));
        assert!(Ge2eScale::new(0.0, 0.0).is_err());
        let mut s = Ge2eScale { w: -1.0, b: 0.0 };
        s.project();
        assert_eq!(s.w, Ge2eScale::MIN_W);
    }
}
