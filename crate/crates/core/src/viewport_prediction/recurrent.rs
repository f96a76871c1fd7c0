//! The recurrent gaze predictor: two stacked gated recurrent layers of 8
//! cells each, fed one step per history chunk with the chunk's gaze sample
//! concatenated with its tile-saliency feature, and a linear head mapping
//! the final hidden state to (yaw, pitch).
//!
//! The step paired with the gaze of chunk k carries the saliency of chunk
//! k+1, so the final step combines the newest gaze with the target chunk's
//! (content-derived, precomputable) saliency. Training is full-batch
//! gradient descent on the mean squared angular residual, with the yaw
//! residual wrapped across the seam.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{ParamArray, ParamContainer};
use crate::media_model::{wrap_angle, GazePoint};
use crate::{Error, Result};

pub const CHECKPOINT_KIND: &str = "gaze-predictor";

/// One prediction request: the per-chunk gaze history (oldest first) and
/// the per-chunk saliency features aligned one chunk ahead of the gaze.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorInput {
    pub gaze_history: Vec<GazePoint>,
    /// saliency[k] is the flattened tile-saliency of chunk k+1; steps past
    /// its end are fed zeros.
    pub saliency: Vec<Vec<f64>>,
    /// Chunks ahead the prediction targets (1 = the next chunk).
    pub horizon_chunks: usize,
}

impl PredictorInput {
    pub fn new(gaze_history: Vec<GazePoint>, saliency: Vec<Vec<f64>>) -> Self {
        PredictorInput {
            gaze_history,
            saliency,
            horizon_chunks: 1,
        }
    }
}

/// Parameters of one gated recurrent layer. Gate rows are stacked in
/// update/reset/candidate order: `wx` is 3H×I, `wh` is 3H×H, `b` is 3H.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruLayer {
    pub input_dim: usize,
    pub hidden: usize,
    pub wx: Vec<f64>,
    pub wh: Vec<f64>,
    pub b: Vec<f64>,
}

impl GruLayer {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        GruLayer {
            input_dim,
            hidden,
            wx: vec![0.0; 3 * hidden * input_dim],
            wh: vec![0.0; 3 * hidden * hidden],
            b: vec![0.0; 3 * hidden],
        }
    }

    fn param_count(&self) -> usize {
        self.wx.len() + self.wh.len() + self.b.len()
    }
}

/// The full predictor parameter set φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorParameters {
    pub layers: Vec<GruLayer>,
    /// 2×H head weights and 2 biases producing (yaw, pitch).
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

impl PredictorParameters {
    /// All-zero parameters (the zero network predicts gaze (0, 0)).
    pub fn zeros(input_dim: usize, hidden: usize, layers: usize) -> Self {
        let mut ls = Vec::with_capacity(layers);
        for l in 0..layers {
            let in_dim = if l == 0 { input_dim } else { hidden };
            ls.push(GruLayer::zeros(in_dim, hidden));
        }
        PredictorParameters {
            layers: ls,
            head_w: vec![0.0; 2 * hidden],
            head_b: vec![0.0; 2],
        }
    }

    /// Seeded uniform initialization in [−0.1, 0.1].
    pub fn init(input_dim: usize, hidden: usize, layers: usize, seed: u64) -> Self {
        let mut p = Self::zeros(input_dim, hidden, layers);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &mut p.layers {
            for v in l.wx.iter_mut().chain(l.wh.iter_mut()).chain(l.b.iter_mut()) {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
        for v in p.head_w.iter_mut().chain(p.head_b.iter_mut()) {
            *v = rng.gen_range(-0.1..0.1);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(GruLayer::param_count).sum::<usize>()
            + self.head_w.len()
            + self.head_b.len()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.wx.iter()
                .chain(l.wh.iter())
                .chain(l.b.iter())
                .all(|v| v.is_finite())
        }) && self
            .head_w
            .iter()
            .chain(self.head_b.iter())
            .all(|v| v.is_finite())
    }

    pub fn to_container(&self) -> ParamContainer {
        let mut c = ParamContainer::new(CHECKPOINT_KIND);
        for (i, l) in self.layers.iter().enumerate() {
            c.insert(
                &format!("gru{i}.wx"),
                ParamArray::matrix(3 * l.hidden, l.input_dim, l.wx.clone()).unwrap(),
            );
            c.insert(
                &format!("gru{i}.wh"),
                ParamArray::matrix(3 * l.hidden, l.hidden, l.wh.clone()).unwrap(),
            );
            c.insert(&format!("gru{i}.b"), ParamArray::vector(l.b.clone()));
        }
        let hidden = self.hidden();
        c.insert(
            "head.w",
            ParamArray::matrix(2, hidden, self.head_w.clone()).unwrap(),
        );
        c.insert("head.b", ParamArray::vector(self.head_b.clone()));
        c
    }

    pub fn from_container(c: &ParamContainer, input_dim: usize, hidden: usize, layers: usize) -> Result<Self> {
        c.expect_kind(CHECKPOINT_KIND)?;
        let mut p = Self::zeros(input_dim, hidden, layers);
        for (i, l) in p.layers.iter_mut().enumerate() {
            l.wx = c
                .take(&format!("gru{i}.wx"), &[3 * hidden, l.input_dim])?
                .data
                .clone();
            l.wh = c
                .take(&format!("gru{i}.wh"), &[3 * hidden, hidden])?
                .data
                .clone();
            l.b = c.take(&format!("gru{i}.b"), &[3 * hidden])?.data.clone();
        }
        p.head_w = c.take("head.w", &[2, hidden])?.data.clone();
        p.head_b = c.take("head.b", &[2])?.data.clone();
        Ok(p)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Cached activations of one layer over one sequence, for backprop.
struct LayerTrace {
    xs: Vec<Vec<f64>>,
    h_prev: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    h_last: Vec<f64>,
}

fn layer_forward(l: &GruLayer, xs: &[Vec<f64>]) -> LayerTrace {
    let hdim = l.hidden;
    let idim = l.input_dim;
    let mut h = vec![0.0; hdim];
    let mut trace = LayerTrace {
        xs: xs.to_vec(),
        h_prev: Vec::with_capacity(xs.len()),
        z: Vec::with_capacity(xs.len()),
        r: Vec::with_capacity(xs.len()),
        c: Vec::with_capacity(xs.len()),
        h_last: vec![0.0; hdim],
    };
    for x in xs {
        debug_assert_eq!(x.len(), idim);
        let mut z = vec![0.0; hdim];
        let mut r = vec![0.0; hdim];
        let mut c = vec![0.0; hdim];
        // Update and reset gates.
        for j in 0..hdim {
            let mut az = l.b[j];
            let mut ar = l.b[hdim + j];
            for (k, xv) in x.iter().enumerate() {
                az += l.wx[j * idim + k] * xv;
                ar += l.wx[(hdim + j) * idim + k] * xv;
            }
            for (k, hv) in h.iter().enumerate() {
                az += l.wh[j * hdim + k] * hv;
                ar += l.wh[(hdim + j) * hdim + k] * hv;
            }
            z[j] = sigmoid(az);
            r[j] = sigmoid(ar);
        }
        // Candidate state sees the reset-gated hidden state.
        for j in 0..hdim {
            let mut ac = l.b[2 * hdim + j];
            for (k, xv) in x.iter().enumerate() {
                ac += l.wx[(2 * hdim + j) * idim + k] * xv;
            }
            for k in 0..hdim {
                ac += l.wh[(2 * hdim + j) * hdim + k] * (r[k] * h[k]);
            }
            c[j] = ac.tanh();
        }
        trace.h_prev.push(h.clone());
        let mut h_next = vec![0.0; hdim];
        for j in 0..hdim {
            h_next[j] = (1.0 - z[j]) * c[j] + z[j] * h[j];
        }
        trace.z.push(z);
        trace.r.push(r);
        trace.c.push(c);
        h = h_next;
    }
    trace.h_last = h;
    trace
}

/// Gradient buffers mirroring [`PredictorParameters`].
#[derive(Debug, Clone)]
pub struct PredictorGradient {
    pub layers: Vec<GruLayer>,
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

impl PredictorGradient {
    fn zeros_like(p: &PredictorParameters) -> Self {
        PredictorGradient {
            layers: p
                .layers
                .iter()
                .map(|l| GruLayer::zeros(l.input_dim, l.hidden))
                .collect(),
            head_w: vec![0.0; p.head_w.len()],
            head_b: vec![0.0; p.head_b.len()],
        }
    }
}

/// Backprop through one layer; `dh_last` is the loss gradient w.r.t. the
/// final hidden state plus any per-step gradients in `dh_steps` (from an
/// upper layer). Returns per-step input gradients.
fn layer_backward(
    l: &GruLayer,
    trace: &LayerTrace,
    dh_last: &[f64],
    dh_steps: Option<&[Vec<f64>]>,
    grad: &mut GruLayer,
) -> Vec<Vec<f64>> {
    let hdim = l.hidden;
    let idim = l.input_dim;
    let steps = trace.xs.len();
    let mut dxs = vec![vec![0.0; idim]; steps];
    let mut dh = dh_last.to_vec();
    for t in (0..steps).rev() {
        if let Some(extra) = dh_steps {
            for j in 0..hdim {
                dh[j] += extra[t][j];
            }
        }
        let (x, h_prev) = (&trace.xs[t], &trace.h_prev[t]);
        let (z, r, c) = (&trace.z[t], &trace.r[t], &trace.c[t]);

        let mut dh_prev = vec![0.0; hdim];
        let mut dc_pre = vec![0.0; hdim];
        let mut dz_pre = vec![0.0; hdim];
        for j in 0..hdim {
            let dz = dh[j] * (h_prev[j] - c[j]);
            let dc = dh[j] * (1.0 - z[j]);
            dh_prev[j] += dh[j] * z[j];
            dz_pre[j] = dz * z[j] * (1.0 - z[j]);
            dc_pre[j] = dc * (1.0 - c[j] * c[j]);
        }
        // Candidate path: weights, reset-gated hidden, and reset gate.
        let mut dr_pre = vec![0.0; hdim];
        {
            let mut drh = vec![0.0; hdim];
            for j in 0..hdim {
                for k in 0..idim {
                    grad.wx[(2 * hdim + j) * idim + k] += dc_pre[j] * x[k];
                }
                for k in 0..hdim {
                    grad.wh[(2 * hdim + j) * hdim + k] += dc_pre[j] * r[k] * h_prev[k];
                    drh[k] += l.wh[(2 * hdim + j) * hdim + k] * dc_pre[j];
                }
                grad.b[2 * hdim + j] += dc_pre[j];
            }
            for k in 0..hdim {
                dh_prev[k] += drh[k] * r[k];
                let dr = drh[k] * h_prev[k];
                dr_pre[k] = dr * r[k] * (1.0 - r[k]);
            }
        }
        // Update and reset gate paths.
        for j in 0..hdim {
            for k in 0..idim {
                grad.wx[j * idim + k] += dz_pre[j] * x[k];
                grad.wx[(hdim + j) * idim + k] += dr_pre[j] * x[k];
            }
            for k in 0..hdim {
                grad.wh[j * hdim + k] += dz_pre[j] * h_prev[k];
                grad.wh[(hdim + j) * hdim + k] += dr_pre[j] * h_prev[k];
                dh_prev[k] += l.wh[j * hdim + k] * dz_pre[j];
                dh_prev[k] += l.wh[(hdim + j) * hdim + k] * dr_pre[j];
            }
            grad.b[j] += dz_pre[j];
            grad.b[hdim + j] += dr_pre[j];
        }
        // Input gradient from all three gates.
        for k in 0..idim {
            let mut acc = 0.0;
            for j in 0..hdim {
                acc += l.wx[j * idim + k] * dz_pre[j];
                acc += l.wx[(hdim + j) * idim + k] * dr_pre[j];
                acc += l.wx[(2 * hdim + j) * idim + k] * dc_pre[j];
            }
            dxs[t][k] = acc;
        }
        dh = dh_prev;
    }
    dxs
}

/// Builds the per-step input vectors from a prediction request.
fn sequence_inputs(input: &PredictorInput, input_dim: usize) -> Result<Vec<Vec<f64>>> {
    if input.gaze_history.is_empty() {
        return Err(Error::InvalidInput("gaze history is empty".into()));
    }
    let sal_dim = input_dim - 2;
    for (k, s) in input.saliency.iter().enumerate() {
        if s.len() != sal_dim {
            return Err(Error::Config(format!(
                "saliency feature {k} has {} values, the predictor expects {sal_dim}",
                s.len()
            )));
        }
    }
    let mut xs = Vec::with_capacity(input.gaze_history.len());
    for (k, g) in input.gaze_history.iter().enumerate() {
        let mut x = Vec::with_capacity(input_dim);
        x.push(g.yaw);
        x.push(g.pitch);
        match input.saliency.get(k) {
            Some(s) => x.extend_from_slice(s),
            None => x.extend(std::iter::repeat(0.0).take(sal_dim)),
        }
        xs.push(x);
    }
    Ok(xs)
}

struct ForwardTrace {
    layers: Vec<LayerTrace>,
    raw_out: [f64; 2],
}

fn forward(params: &PredictorParameters, xs: &[Vec<f64>]) -> ForwardTrace {
    let mut traces = Vec::with_capacity(params.layers.len());
    let mut seq: Vec<Vec<f64>> = xs.to_vec();
    for l in &params.layers {
        let trace = layer_forward(l, &seq);
        seq = reconstruct_hidden_sequence(&trace);
        traces.push(trace);
    }
    let h_last = traces.last().unwrap().h_last.clone();
    let hidden = params.hidden();
    let mut out = [params.head_b[0], params.head_b[1]];
    for (o, out_v) in out.iter_mut().enumerate() {
        for (k, hv) in h_last.iter().enumerate() {
            *out_v += params.head_w[o * hidden + k] * hv;
        }
    }
    ForwardTrace {
        layers: traces,
        raw_out: out,
    }
}

/// Hidden states per step of a layer (h_prev shifted by one, plus h_last).
fn reconstruct_hidden_sequence(trace: &LayerTrace) -> Vec<Vec<f64>> {
    let steps = trace.xs.len();
    let mut hs = Vec::with_capacity(steps);
    for t in 1..steps {
        hs.push(trace.h_prev[t].clone());
    }
    hs.push(trace.h_last.clone());
    hs
}

/// Deterministic forward pass producing a gaze estimate (yaw wrapped,
/// pitch clamped). Shape mismatches are configuration errors.
pub fn predict_recurrent(input: &PredictorInput, params: &PredictorParameters) -> Result<GazePoint> {
    if !params.is_finite() {
        return Err(Error::InvalidInput("predictor parameters are not finite".into()));
    }
    let xs = sequence_inputs(input, params.input_dim())?;
    if xs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("predictor input is not finite".into()));
    }
    let trace = forward(params, &xs);
    let [yaw, pitch] = trace.raw_out;
    if !yaw.is_finite() || !pitch.is_finite() {
        return Err(Error::InvalidInput("predictor produced a non-finite gaze".into()));
    }
    Ok(GazePoint::new(yaw, pitch))
}

/// Mean squared angular residual of the batch, with the full gradient.
/// The yaw residual is wrapped so errors never jump at the seam.
fn batch_loss_and_grad(
    params: &PredictorParameters,
    dataset: &[(PredictorInput, GazePoint)],
) -> Result<(f64, PredictorGradient)> {
    let mut grad = PredictorGradient::zeros_like(params);
    let mut loss = 0.0;
    let n = dataset.len() as f64;
    let hidden = params.hidden();
    for (input, target) in dataset {
        let xs = sequence_inputs(input, params.input_dim())?;
        let trace = forward(params, &xs);
        let res_yaw = wrap_angle(trace.raw_out[0] - target.yaw);
        let res_pitch = trace.raw_out[1] - target.pitch;
        loss += 0.5 * (res_yaw * res_yaw + res_pitch * res_pitch) / n;
        let dout = [res_yaw / n, res_pitch / n];

        // Head gradients and the seed gradient for the top layer.
        let h_last = &trace.layers.last().unwrap().h_last;
        let mut dh_last = vec![0.0; hidden];
        for o in 0..2 {
            grad.head_b[o] += dout[o];
            for k in 0..hidden {
                grad.head_w[o * hidden + k] += dout[o] * h_last[k];
                dh_last[k] += params.head_w[o * hidden + k] * dout[o];
            }
        }

        // Walk layers top-down; each produces per-step gradients for the
        // hidden sequence of the layer below.
        let mut dh_steps: Option<Vec<Vec<f64>>> = None;
        let mut seed = dh_last;
        for (li, l) in params.layers.iter().enumerate().rev() {
            let dxs = layer_backward(
                l,
                &trace.layers[li],
                &seed,
                dh_steps.as_deref(),
                &mut grad.layers[li],
            );
            dh_steps = Some(dxs);
            seed = vec![0.0; l.hidden];
        }
    }
    Ok((loss, grad))
}

/// Full-batch gradient-descent training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentTrainConfig {
    pub hidden: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for RecurrentTrainConfig {
    fn default() -> Self {
        RecurrentTrainConfig {
            hidden: 8,
            layers: 2,
            learning_rate: 0.05,
            epochs: 200,
            seed: 7,
        }
    }
}

/// Trains predictor parameters on (input, actual gaze) pairs, returning
/// the parameters and the per-epoch loss curve (epoch 0 is the loss of the
/// initialization). Aborts with a diagnostic if the loss turns non-finite.
pub fn train_recurrent(
    dataset: &[(PredictorInput, GazePoint)],
    config: &RecurrentTrainConfig,
) -> Result<(PredictorParameters, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("training dataset is empty".into()));
    }
    let input_dim = 2 + dataset[0]
        .0
        .saliency
        .first()
        .map(Vec::len)
        .unwrap_or(0);
    let mut params = PredictorParameters::init(input_dim, config.hidden, config.layers, config.seed);
    let mut curve = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..=config.epochs {
        let (loss, grad) = batch_loss_and_grad(&params, dataset)?;
        if !loss.is_finite() {
            return Err(Error::InvalidInput(format!(
                "training loss became non-finite at epoch {epoch}"
            )));
        }
        curve.push(loss);
        if epoch == config.epochs {
            break;
        }
        let lr = config.learning_rate;
        for (l, g) in params.layers.iter_mut().zip(&grad.layers) {
            for (p, d) in l.wx.iter_mut().zip(&g.wx) {
                *p -= lr * d;
            }
            for (p, d) in l.wh.iter_mut().zip(&g.wh) {
                *p -= lr * d;
            }
            for (p, d) in l.b.iter_mut().zip(&g.b) {
                *p -= lr * d;
            }
        }
        for (p, d) in params.head_w.iter_mut().zip(&grad.head_w) {
            *p -= lr * d;
        }
        for (p, d) in params.head_b.iter_mut().zip(&grad.head_b) {
            *p -= lr * d;
        }
    }
    Ok((params, curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain_input(history: &[(f64, f64)]) -> PredictorInput {
        PredictorInput::new(
            history.iter().map(|&(y, p)| GazePoint::new(y, p)).collect(),
            vec![],
        )
    }

    #[test]
    fn zero_network_predicts_origin() {
        let params = PredictorParameters::zeros(2, 8, 2);
        let g = predict_recurrent(&plain_input(&[(0.5, 0.2), (0.6, 0.1)]), &params).unwrap();
        assert_eq!(g.yaw, 0.0);
        assert_eq!(g.pitch, 0.0);
    }

    #[test]
    fn forward_is_deterministic() {
        let params = PredictorParameters::init(2, 8, 2, 99);
        let input = plain_input(&[(0.5, 0.2), (-0.4, 0.3), (0.1, -0.2)]);
        let a = predict_recurrent(&input, &params).unwrap();
        let b = predict_recurrent(&input, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scalar_cell_matches_hand_computed_gates() {
        // One layer, one cell, one step; saliency keeps input scalar-ish.
        let mut params = PredictorParameters::zeros(2, 1, 1);
        let l = &mut params.layers[0];
        // wx rows: update, reset, candidate; input (yaw, pitch).
        l.wx = vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.7];
        l.wh = vec![0.25, -0.15, 0.6];
        l.b = vec![0.05, -0.1, 0.2];
        params.head_w = vec![1.5, -0.8];
        params.head_b = vec![0.02, 0.03];

        let (yaw_in, pitch_in) = (0.4, -0.3);
        let az = 0.3 * yaw_in + (-0.2) * pitch_in + 0.05; // + wh·h0 = 0
        let ar = 0.5 * yaw_in + 0.1 * pitch_in + (-0.1);
        let z = sigmoid(az);
        let _r = sigmoid(ar); // gates a zero hidden state, so no effect here
        let ac = -0.4 * yaw_in + 0.7 * pitch_in + 0.2;
        let c = ac.tanh();
        let h = (1.0 - z) * c;
        let want_yaw = 1.5 * h + 0.02;
        let want_pitch = -0.8 * h + 0.03;

        let got = predict_recurrent(&plain_input(&[(yaw_in, pitch_in)]), &params).unwrap();
        assert!((got.yaw - wrap_angle(want_yaw)).abs() < 1e-12);
        assert!((got.pitch - want_pitch).abs() < 1e-12);
    }

    fn loss_of(params: &PredictorParameters, dataset: &[(PredictorInput, GazePoint)]) -> f64 {
        batch_loss_and_grad(params, dataset).unwrap().0
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let dataset: Vec<(PredictorInput, GazePoint)> = vec![
            (
                PredictorInput::new(
                    vec![GazePoint::new(0.3, 0.1), GazePoint::new(0.5, -0.2)],
                    vec![vec![0.4, 0.9], vec![0.1, 0.3]],
                ),
                GazePoint::new(0.7, -0.1),
            ),
            (
                PredictorInput::new(
                    vec![GazePoint::new(-1.0, 0.4)],
                    vec![vec![0.8, 0.2]],
                ),
                GazePoint::new(-1.2, 0.5),
            ),
        ];
        let mut params = PredictorParameters::init(4, 3, 2, 5);
        let (_, grad) = batch_loss_and_grad(&params, &dataset).unwrap();
        let eps = 1e-6;
        let mut max_rel: f64 = 0.0;
        // Central differences carry ~1e-11 cancellation noise at this eps;
        // gradients within that absolute band are compared absolutely.
        let rel_err = |fd: f64, analytic: f64| -> f64 {
            if (fd - analytic).abs() < 1e-8 {
                0.0
            } else {
                (fd - analytic).abs() / (fd.abs() + analytic.abs()).max(1e-7)
            }
        };

        // Walk every parameter through a mutable accessor list.
        let n_layers = params.layers.len();
        for li in 0..n_layers {
            for field in 0..3 {
                let len = match field {
                    0 => params.layers[li].wx.len(),
                    1 => params.layers[li].wh.len(),
                    _ => params.layers[li].b.len(),
                };
                for idx in 0..len {
                    let get = |p: &mut PredictorParameters| -> *mut f64 {
                        match field {
                            0 => &mut p.layers[li].wx[idx],
                            1 => &mut p.layers[li].wh[idx],
                            _ => &mut p.layers[li].b[idx],
                        }
                    };
                    let analytic = match field {
                        0 => grad.layers[li].wx[idx],
                        1 => grad.layers[li].wh[idx],
                        _ => grad.layers[li].b[idx],
                    };
                    unsafe {
                        let slot = get(&mut params);
                        let orig = *slot;
                        *slot = orig + eps;
                        let up = loss_of(&params, &dataset);
                        *get(&mut params) = orig - eps;
                        let down = loss_of(&params, &dataset);
                        *get(&mut params) = orig;
                        let fd = (up - down) / (2.0 * eps);
                        max_rel = max_rel.max(rel_err(fd, analytic));
                    }
                }
            }
        }
        for idx in 0..params.head_w.len() + params.head_b.len() {
            let analytic = if idx < params.head_w.len() {
                grad.head_w[idx]
            } else {
                grad.head_b[idx - params.head_w.len()]
            };
            let touch = |p: &mut PredictorParameters, delta: f64| {
                if idx < p.head_w.len() {
                    p.head_w[idx] += delta;
                } else {
                    let i = idx - p.head_w.len();
                    p.head_b[i] += delta;
                }
            };
            touch(&mut params, eps);
            let up = loss_of(&params, &dataset);
            touch(&mut params, -2.0 * eps);
            let down = loss_of(&params, &dataset);
            touch(&mut params, eps);
            let fd = (up - down) / (2.0 * eps);
            max_rel = max_rel.max(rel_err(fd, analytic));
        }
        assert!(max_rel < 1e-5, "max relative gradient error {max_rel}");
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let dataset = vec![(plain_input(&[(0.3, 0.1)]), GazePoint::new(0.5, 0.0))];
        let cfg = RecurrentTrainConfig {
            learning_rate: 0.0,
            epochs: 5,
            hidden: 4,
            layers: 2,
            seed: 3,
        };
        let (params, _) = train_recurrent(&dataset, &cfg).unwrap();
        assert_eq!(params, PredictorParameters::init(2, 4, 2, 3));
    }

    #[test]
    fn training_reduces_error_on_constant_gaze() {
        let target = GazePoint::new(0.9, -0.4);
        let dataset: Vec<(PredictorInput, GazePoint)> = (0..8)
            .map(|i| {
                (
                    plain_input(&[(0.9, -0.4), (0.9, -0.4), (0.9 + 0.001 * i as f64, -0.4)]),
                    target,
                )
            })
            .collect();
        let cfg = RecurrentTrainConfig::default();
        let (trained, curve) = train_recurrent(&dataset, &cfg).unwrap();
        let initial = PredictorParameters::init(2, cfg.hidden, cfg.layers, cfg.seed);

        let err = |p: &PredictorParameters| -> f64 {
            dataset
                .iter()
                .map(|(inp, t)| {
                    let g = predict_recurrent(inp, p).unwrap();
                    wrap_angle(g.yaw - t.yaw).abs() + (g.pitch - t.pitch).abs()
                })
                .sum()
        };
        assert!(err(&trained) < err(&initial), "training did not help");
        assert!(
            curve.last().unwrap() <= &curve[1],
            "loss after training exceeds loss after one epoch: {curve:?}"
        );
        // Full-batch descent at this rate is stable on this task.
        assert!(curve.last().unwrap() <= &curve[0]);
    }
}
