use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Gate rows are stacked as input, forget, cell candidate, output.
pub(crate) const GATES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    /// Feature width, equal to the number of mel bands.
    pub input_dim: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    /// Desk-scale profile: 2 layers of 32 units, 16-dim embeddings, 20 mels.
    fn default() -> Self {
        EncoderConfig {
            n_layers: 2,
            hidden_dim: 32,
            embed_dim: 16,
            input_dim: 20,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    /// Full-size profile: 3 layers of 256 units and a 256-dim projection.
    pub fn full_size(input_dim: usize, seed: u64) -> Self {
        EncoderConfig {
            n_layers: 3,
            hidden_dim: 256,
            embed_dim: 256,
            input_dim,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.hidden_dim == 0 || self.embed_dim == 0 || self.input_dim == 0
        {
            return Err(Error::Parameter(format!(
                "encoder dimensions must all be at least 1: {self:?}"
            )));
        }
        Ok(())
    }
}

/// One LSTM layer. Weight matrices are row-major with `4 * hidden` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LstmLayer {
    fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmLayer {
            input_dim,
            hidden_dim,
            w_ih: vec![0.0; GATES * hidden_dim * input_dim],
            w_hh: vec![0.0; GATES * hidden_dim * hidden_dim],
            bias: vec![0.0; GATES * hidden_dim],
        }
    }
}

/// All trainable weights of the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub layers: Vec<LstmLayer>,
    /// `embed_dim x hidden_dim`, row-major.
    pub proj_weight: Vec<f64>,
    pub proj_bias: Vec<f64>,
}

impl EncoderParams {
    pub fn zeros(config: EncoderConfig) -> Self {
        let layers = (0..config.n_layers)
            .map(|l| {
                let input = if l == 0 {
                    config.input_dim
                } else {
                    config.hidden_dim
                };
                LstmLayer::zeros(input, config.hidden_dim)
            })
            .collect();
        EncoderParams {
            config,
            layers,
            proj_weight: vec![0.0; config.embed_dim * config.hidden_dim],
            proj_bias: vec![0.0; config.embed_dim],
        }
    }

    /// Tensor names in checkpoint order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in 0..self.layers.len() {
            names.push(format!("lstm.{l}.w_ih"));
            names.push(format!("lstm.{l}.w_hh"));
            names.push(format!("lstm.{l}.bias"));
        }
        names.push("proj.weight".into());
        names.push("proj.bias".into());
        names
    }

    /// Tensors in checkpoint order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for layer in &self.layers {
            out.push(&layer.w_ih);
            out.push(&layer.w_hh);
            out.push(&layer.bias);
        }
        out.push(&self.proj_weight);
        out.push(&self.proj_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for layer in &mut self.layers {
            out.push(&mut layer.w_ih);
            out.push(&mut layer.w_hh);
            out.push(&mut layer.bias);
        }
        out.push(&mut self.proj_weight);
        out.push(&mut self.proj_bias);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Parameter gradients, shaped like [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub EncoderParams);

impl Gradients {
    pub fn zeros(config: EncoderConfig) -> Self {
        Gradients(EncoderParams::zeros(config))
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.tensors_mut().into_iter().zip(other.0.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    /// Sums gradient sets left to right, so the result does not depend on
    /// how the items were computed.
    pub fn sum<'a>(config: EncoderConfig, grads: impl IntoIterator<Item = &'a Gradients>) -> Self {
        let mut total = Gradients::zeros(config);
        for g in grads {
            total.add_assign(g);
        }
        total
    }

    pub fn global_norm(&self) -> f64 {
        self.0
            .tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
}

/// Seeded initialization: every weight and bias uniform in `(-k, k)` with
/// `k = 1 / sqrt(hidden_dim)`, plus 1 on the forget-gate biases. The
/// projection bias is drawn nonzero so an all-zero LSTM still has a
/// well-defined embedding.
pub fn init_params(config: &EncoderConfig) -> Result<EncoderParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let k = 1.0 / (config.hidden_dim as f64).sqrt();
    let mut params = EncoderParams::zeros(*config);
    for t in params.tensors_mut() {
        t.iter_mut().for_each(|x| *x = rng.random_range(-k..k));
    }
    let h = config.hidden_dim;
    for layer in &mut params.layers {
        layer.bias[h..2 * h].iter_mut().for_each(|b| *b += 1.0);
    }
    for b in &mut params.proj_bias {
        while *b == 0.0 {
            *b = rng.random_range(-k..k);
        }
    }
    Ok(params)
}

/// Clips `grads` to global norm `clip`, then steps `params` against them.
pub fn sgd_step(params: &mut EncoderParams, grads: &Gradients, lr: f64, clip: f64) -> Result<()> {
    if !(lr > 0.0) || !(clip > 0.0) {
        return Err(Error::Parameter(format!(
            "lr and clip must be positive, got {lr} and {clip}"
        )));
    }
    if params.config != grads.0.config {
        return Err(Error::Shape("gradient and parameter configs differ".into()));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    let norm = grads.global_norm();
    let scale = if norm > clip { clip / norm } else { 1.0 };
    for (p, g) in params.tensors_mut().into_iter().zip(grads.0.tensors()) {
        p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * scale * g);
    }
    Ok(())
}
