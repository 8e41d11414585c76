use crate::{Error, Result};

/// Hinge margin `alpha` of the triplet objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletMargin(f64);

impl TripletMargin {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!(
                "margin must be >= 0, got {alpha}"
            )));
        }
        Ok(TripletMargin(alpha))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for TripletMargin {
    fn default() -> Self {
        TripletMargin(0.3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletOutput {
    pub loss: f64,
    pub grad_anchor: Vec<f64>,
    pub grad_positive: Vec<f64>,
    pub grad_negative: Vec<f64>,
}

impl TripletOutput {
    pub fn is_active(&self) -> bool {
        self.loss > 0.0
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `max(|a - p|^2 - |a - n|^2 + alpha, 0)` with gradients for all three
/// inputs. At the kink (argument exactly 0) the hinge counts as inactive.
pub fn triplet_loss(
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    margin: TripletMargin,
) -> Result<TripletOutput> {
    let d = anchor.len();
    if positive.len() != d || negative.len() != d {
        return Err(Error::Shape(format!(
            "triplet dims {d}, {}, {}",
            positive.len(),
            negative.len()
        )));
    }
    let z = sq_dist(anchor, positive) - sq_dist(anchor, negative) + margin.get();
    if z <= 0.0 {
        return Ok(TripletOutput {
            loss: 0.0,
            grad_anchor: vec![0.0; d],
            grad_positive: vec![0.0; d],
            grad_negative: vec![0.0; d],
        });
    }
    let mut out = TripletOutput {
        loss: z,
        grad_anchor: Vec::with_capacity(d),
        grad_positive: Vec::with_capacity(d),
        grad_negative: Vec::with_capacity(d),
    };
    for k in 0..d {
        let (a, p, n) = (anchor[k], positive[k], negative[k]);
        out.grad_anchor.push(2.0 * (n - p));
        out.grad_positive.push(-2.0 * (a - p));
        out.grad_negative.push(2.0 * (a - n));
    }
    Ok(out)
}
