use super::params::{EncoderParams, Gradients, LstmLayer, GATES};
use super::{l2_norm, Embedding};
use crate::audio::MelFrames;
use crate::{par, Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one layer across time.
#[derive(Debug, Clone)]
struct LayerTrace {
    /// Post-activation gates per step, `[i, f, g, o]` blocks of `hidden`.
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
}

/// Forward activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    layers: Vec<LayerTrace>,
    /// Pre-normalization projection output.
    projected: Vec<f64>,
    embedding: Embedding,
}

impl Trace {
    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }
}

fn check_input(params: &EncoderParams, frames: &MelFrames) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::Shape("no input frames".into()));
    }
    let want = params.config.input_dim;
    if let Some((t, f)) = frames
        .frames
        .iter()
        .enumerate()
        .find(|(_, f)| f.len() != want)
    {
        return Err(Error::Shape(format!(
            "frame {t} has {} features, encoder expects {want}",
            f.len()
        )));
    }
    Ok(())
}

fn layer_forward(layer: &LstmLayer, inputs: &[Vec<f64>]) -> LayerTrace {
    let h = layer.hidden_dim;
    let n_in = layer.input_dim;
    let mut trace = LayerTrace {
        gates: Vec::with_capacity(inputs.len()),
        cells: Vec::with_capacity(inputs.len()),
        hidden: Vec::with_capacity(inputs.len()),
    };
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for x in inputs {
        let mut a = layer.bias.clone();
        for (r, a_r) in a.iter_mut().enumerate() {
            let wi = &layer.w_ih[r * n_in..(r + 1) * n_in];
            let wh = &layer.w_hh[r * h..(r + 1) * h];
            *a_r += wi.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
                + wh.iter().zip(&h_prev).map(|(w, v)| w * v).sum::<f64>();
        }
        for (r, v) in a.iter_mut().enumerate() {
            *v = if r / h == 2 { v.tanh() } else { sigmoid(*v) };
        }
        let mut c = vec![0.0; h];
        let mut hid = vec![0.0; h];
        for j in 0..h {
            let (i, f, g, o) = (a[j], a[h + j], a[2 * h + j], a[3 * h + j]);
            c[j] = f * c_prev[j] + i * g;
            hid[j] = o * c[j].tanh();
        }
        trace.gates.push(a);
        trace.cells.push(c.clone());
        trace.hidden.push(hid.clone());
        c_prev = c;
        h_prev = hid;
    }
    trace
}

/// Runs the encoder and keeps the activations needed by [`backward`].
pub fn forward(params: &EncoderParams, frames: &MelFrames) -> Result<Trace> {
    check_input(params, frames)?;
    let mut layers: Vec<LayerTrace> = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let inputs = layers.last().map_or(&frames.frames, |t| &t.hidden);
        let t = layer_forward(layer, inputs);
        layers.push(t);
    }
    let last = layers
        .last()
        .and_then(|t| t.hidden.last())
        .expect("at least one layer and frame");
    let hd = params.config.hidden_dim;
    let projected: Vec<f64> = params
        .proj_bias
        .iter()
        .enumerate()
        .map(|(e, b)| {
            b + params.proj_weight[e * hd..(e + 1) * hd]
                .iter()
                .zip(last)
                .map(|(w, v)| w * v)
                .sum::<f64>()
        })
        .collect();
    let embedding = Embedding::normalized(projected.clone())?;
    Ok(Trace {
        layers,
        projected,
        embedding,
    })
}

/// Embeds an utterance: stacked LSTM, last top-layer hidden state, affine
/// projection, L2 normalization.
pub fn encode(params: &EncoderParams, frames: &MelFrames) -> Result<Embedding> {
    forward(params, frames).map(|t| t.embedding)
}

/// Embeds many utterances, in parallel when enabled. Output order matches input.
pub fn encode_batch(params: &EncoderParams, batch: &[&MelFrames]) -> Result<Vec<Embedding>> {
    par::try_map(batch, |f| encode(params, f))
}

/// Gradients of `grad_out . encode(params, frames)` with respect to every
/// parameter.
pub fn encode_backward(
    params: &EncoderParams,
    frames: &MelFrames,
    grad_out: &[f64],
) -> Result<Gradients> {
    let trace = forward(params, frames)?;
    backward(params, frames, &trace, grad_out)
}

/// Backpropagates `grad_out` (a gradient on the embedding) through
/// normalization, projection and time.
pub fn backward(
    params: &EncoderParams,
    frames: &MelFrames,
    trace: &Trace,
    grad_out: &[f64],
) -> Result<Gradients> {
    let cfg = params.config;
    if grad_out.len() != cfg.embed_dim {
        return Err(Error::Shape(format!(
            "output gradient has {} entries, embedding has {}",
            grad_out.len(),
            cfg.embed_dim
        )));
    }
    let mut grads = Gradients::zeros(cfg);
    if grad_out.iter().all(|&g| g == 0.0) {
        return Ok(grads);
    }

    // d(z/|z|)/dz = (I - e e^T) / |z|
    let e = &trace.embedding;
    let norm = l2_norm(&trace.projected);
    let radial: f64 = grad_out.iter().zip(e.iter()).map(|(g, x)| g * x).sum();
    let dz: Vec<f64> = grad_out
        .iter()
        .zip(e.iter())
        .map(|(g, x)| (g - radial * x) / norm)
        .collect();

    let h = cfg.hidden_dim;
    let top = trace.layers.last().expect("at least one layer");
    let t_len = top.hidden.len();
    let h_last = &top.hidden[t_len - 1];
    let mut dh_last = vec![0.0; h];
    for (k, &d) in dz.iter().enumerate() {
        grads.0.proj_bias[k] = d;
        let w = &params.proj_weight[k * h..(k + 1) * h];
        let gw = &mut grads.0.proj_weight[k * h..(k + 1) * h];
        for j in 0..h {
            gw[j] = d * h_last[j];
            dh_last[j] += d * w[j];
        }
    }

    // external hidden-state gradient per step, flowing down the stack
    let mut dh_ext = vec![vec![0.0; h]; t_len];
    dh_ext[t_len - 1] = dh_last;
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let lt = &trace.layers[l];
        let inputs = if l == 0 {
            &frames.frames
        } else {
            &trace.layers[l - 1].hidden
        };
        let n_in = layer.input_dim;
        let g = &mut grads.0.layers[l];
        let mut dx = vec![vec![0.0; n_in]; t_len];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut da = vec![0.0; GATES * h];
        let zeros = vec![0.0; h];
        for t in (0..t_len).rev() {
            let gates = &lt.gates[t];
            let c = &lt.cells[t];
            let c_prev = if t > 0 { &lt.cells[t - 1] } else { &zeros };
            let h_prev = if t > 0 { &lt.hidden[t - 1] } else { &zeros };
            for j in 0..h {
                let (i, f, gg, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let dh = dh_ext[t][j] + dh_next[j];
                let tc = c[j].tanh();
                let d_o = dh * tc;
                let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
                da[j] = dc * gg * i * (1.0 - i);
                da[h + j] = dc * c_prev[j] * f * (1.0 - f);
                da[2 * h + j] = dc * i * (1.0 - gg * gg);
                da[3 * h + j] = d_o * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            let x = &inputs[t];
            for (r, &d) in da.iter().enumerate() {
                g.bias[r] += d;
                if d == 0.0 {
                    continue;
                }
                let gwi = &mut g.w_ih[r * n_in..(r + 1) * n_in];
                let wi = &layer.w_ih[r * n_in..(r + 1) * n_in];
                for k in 0..n_in {
                    gwi[k] += d * x[k];
                    dx[t][k] += d * wi[k];
                }
                let gwh = &mut g.w_hh[r * h..(r + 1) * h];
                let wh = &layer.w_hh[r * h..(r + 1) * h];
                for k in 0..h {
                    gwh[k] += d * h_prev[k];
                    dh_next[k] += d * wh[k];
                }
            }
        }
        dh_ext = dx;
    }
    Ok(grads)
}
