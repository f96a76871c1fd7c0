//! The actor/critic feature network: five 1-D convolution units over the
//! sequence inputs (throughput history, download-time history, view
//! probabilities, ladder, last levels) and three linear units (class
//! counts, remaining counts, buffer), rectified, concatenated into one
//! rectified hidden layer, then a softmax head (actor) or a scalar head
//! (critic).
//!
//! Parameters live in one flat `Vec<f64>` per network with a precomputed
//! segment layout, so gradients mirror the buffer index-for-index and
//! finite-difference checks, SGD updates, and checkpoints all operate on
//! plain slices.

use serde::{Deserialize, Serialize};

use crate::checkpoint::{ParamArray, ParamContainer};
use crate::{Error, Result};

/// The eight observation vectors of the allocator state, already
/// normalized to comparable scales by the producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub throughput: Vec<f64>,
    pub download_time: Vec<f64>,
    pub view_prob: Vec<f64>,
    pub ladder: Vec<f64>,
    pub last_levels: Vec<f64>,
    pub class_counts: Vec<f64>,
    pub remaining: Vec<f64>,
    pub buffer: Vec<f64>,
}

impl Observation {
    fn seqs(&self) -> [&[f64]; 5] {
        [
            &self.throughput,
            &self.download_time,
            &self.view_prob,
            &self.ladder,
            &self.last_levels,
        ]
    }

    fn vecs(&self) -> [&[f64]; 3] {
        [&self.class_counts, &self.remaining, &self.buffer]
    }

    pub fn is_finite(&self) -> bool {
        self.seqs()
            .iter()
            .chain(self.vecs().iter())
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Shape of both networks; the critic differs only in its head width (1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Lengths of the five sequence inputs (h, σ, p, q, l).
    pub seq_lens: [usize; 5],
    /// Lengths of the three linear-unit inputs (w, α, b_t).
    pub vec_lens: [usize; 3],
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub linear_width: usize,
    pub hidden: usize,
    pub actions: usize,
}

impl NetworkConfig {
    /// The network shape used for streaming sessions: 16 filters of width
    /// 4, 16-wide linear units, a 128-unit hidden layer, one action per
    /// ladder level.
    pub fn for_env(history_len: usize, tile_count: usize, ladder_levels: usize) -> Self {
        let seq_lens = [history_len, history_len, tile_count, ladder_levels, 4];
        let kernel = 4.min(*seq_lens.iter().min().unwrap());
        NetworkConfig {
            seq_lens,
            vec_lens: [4, 4, 1],
            conv_filters: 16,
            conv_kernel: kernel,
            linear_width: 16,
            hidden: 128,
            actions: ladder_levels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_filters == 0
            || self.conv_kernel == 0
            || self.linear_width == 0
            || self.hidden == 0
        {
            return Err(Error::Config("network widths must be ≥ 1".into()));
        }
        if self.actions < 2 {
            return Err(Error::Config("need at least 2 actions".into()));
        }
        if let Some(len) = self.seq_lens.iter().find(|&&l| l < self.conv_kernel) {
            return Err(Error::Config(format!(
                "sequence length {len} is shorter than the conv kernel {}",
                self.conv_kernel
            )));
        }
        if self.vec_lens.iter().any(|&l| l == 0) {
            return Err(Error::Config("linear-unit inputs must be non-empty".into()));
        }
        Ok(())
    }

    fn conv_out_len(&self, i: usize) -> usize {
        self.seq_lens[i] - self.conv_kernel + 1
    }

    pub fn concat_len(&self) -> usize {
        let conv: usize = (0..5).map(|i| self.conv_filters * self.conv_out_len(i)).sum();
        conv + 3 * self.linear_width
    }

    /// Total parameter count of one network with the given head width.
    pub fn param_len(&self, head_dim: usize) -> usize {
        let conv: usize = 5 * (self.conv_filters * self.conv_kernel + self.conv_filters);
        let lin: usize = self
            .vec_lens
            .iter()
            .map(|&l| self.linear_width * l + self.linear_width)
            .sum::<usize>();
        let hidden = self.hidden * self.concat_len() + self.hidden;
        let head = head_dim * self.hidden + head_dim;
        conv + lin + hidden + head
    }

    /// Named segments of the flat parameter buffer, in buffer order.
    pub fn segments(&self, head_dim: usize) -> Vec<(String, Vec<usize>)> {
        let mut segs = Vec::new();
        for i in 0..5 {
            segs.push((format!("conv{i}.w"), vec![self.conv_filters, self.conv_kernel]));
            segs.push((format!("conv{i}.b"), vec![self.conv_filters]));
        }
        for (j, &len) in self.vec_lens.iter().enumerate() {
            segs.push((format!("linear{j}.w"), vec![self.linear_width, len]));
            segs.push((format!("linear{j}.b"), vec![self.linear_width]));
        }
        segs.push(("hidden.w".into(), vec![self.hidden, self.concat_len()]));
        segs.push(("hidden.b".into(), vec![self.hidden]));
        segs.push(("head.w".into(), vec![head_dim, self.hidden]));
        segs.push(("head.b".into(), vec![head_dim]));
        segs
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Offsets of the layout segments inside the flat buffer.
struct Layout {
    conv_w: [usize; 5],
    conv_b: [usize; 5],
    lin_w: [usize; 3],
    lin_b: [usize; 3],
    hidden_w: usize,
    hidden_b: usize,
    head_w: usize,
    head_b: usize,
}

fn layout_with_head(cfg: &NetworkConfig, head_dim: usize) -> Layout {
    let mut off = 0;
    let mut conv_w = [0; 5];
    let mut conv_b = [0; 5];
    for i in 0..5 {
        conv_w[i] = off;
        off += cfg.conv_filters * cfg.conv_kernel;
        conv_b[i] = off;
        off += cfg.conv_filters;
    }
    let mut lin_w = [0; 3];
    let mut lin_b = [0; 3];
    for j in 0..3 {
        lin_w[j] = off;
        off += cfg.linear_width * cfg.vec_lens[j];
        lin_b[j] = off;
        off += cfg.linear_width;
    }
    let hidden_w = off;
    off += cfg.hidden * cfg.concat_len();
    let hidden_b = off;
    off += cfg.hidden;
    let head_w = off;
    let head_b = head_w + head_dim * cfg.hidden;
    Layout {
        conv_w,
        conv_b,
        lin_w,
        lin_b,
        hidden_w,
        hidden_b,
        head_w,
        head_b,
    }
}

/// Cached activations of one forward pass.
pub(crate) struct Trace {
    conv_pre: Vec<Vec<f64>>,
    lin_pre: Vec<Vec<f64>>,
    concat: Vec<f64>,
    hidden_pre: Vec<f64>,
    pub head: Vec<f64>,
}

pub(crate) fn forward(
    cfg: &NetworkConfig,
    head_dim: usize,
    params: &[f64],
    obs: &Observation,
) -> Result<Trace> {
    if !obs.is_finite() {
        return Err(Error::InvalidInput("observation holds non-finite values".into()));
    }
    let seqs = obs.seqs();
    let vecs = obs.vecs();
    for (i, s) in seqs.iter().enumerate() {
        if s.len() != cfg.seq_lens[i] {
            return Err(Error::Config(format!(
                "sequence input {i} has length {}, network expects {}",
                s.len(),
                cfg.seq_lens[i]
            )));
        }
    }
    for (j, v) in vecs.iter().enumerate() {
        if v.len() != cfg.vec_lens[j] {
            return Err(Error::Config(format!(
                "vector input {j} has length {}, network expects {}",
                v.len(),
                cfg.vec_lens[j]
            )));
        }
    }
    debug_assert_eq!(params.len(), cfg.param_len(head_dim));
    let lay = layout_with_head(cfg, head_dim);
    let (filters, kernel) = (cfg.conv_filters, cfg.conv_kernel);

    let mut concat = Vec::with_capacity(cfg.concat_len());
    let mut conv_pre = Vec::with_capacity(5);
    for (i, x) in seqs.iter().enumerate() {
        let out_len = cfg.conv_out_len(i);
        let mut pre = vec![0.0; filters * out_len];
        for f in 0..filters {
            let w = &params[lay.conv_w[i] + f * kernel..lay.conv_w[i] + (f + 1) * kernel];
            let b = params[lay.conv_b[i] + f];
            for pos in 0..out_len {
                let mut acc = b;
                for k in 0..kernel {
                    acc += w[k] * x[pos + k];
                }
                pre[f * out_len + pos] = acc;
            }
        }
        concat.extend(pre.iter().map(|&v| relu(v)));
        conv_pre.push(pre);
    }
    let mut lin_pre = Vec::with_capacity(3);
    for (j, x) in vecs.iter().enumerate() {
        let len = cfg.vec_lens[j];
        let mut pre = vec![0.0; cfg.linear_width];
        for u in 0..cfg.linear_width {
            let w = &params[lay.lin_w[j] + u * len..lay.lin_w[j] + (u + 1) * len];
            let mut acc = params[lay.lin_b[j] + u];
            for k in 0..len {
                acc += w[k] * x[k];
            }
            pre[u] = acc;
        }
        concat.extend(pre.iter().map(|&v| relu(v)));
        lin_pre.push(pre);
    }
    debug_assert_eq!(concat.len(), cfg.concat_len());

    let clen = concat.len();
    let mut hidden_pre = vec![0.0; cfg.hidden];
    for u in 0..cfg.hidden {
        let w = &params[lay.hidden_w + u * clen..lay.hidden_w + (u + 1) * clen];
        let mut acc = params[lay.hidden_b + u];
        for k in 0..clen {
            acc += w[k] * concat[k];
        }
        hidden_pre[u] = acc;
    }
    let hidden: Vec<f64> = hidden_pre.iter().map(|&v| relu(v)).collect();

    let mut head = vec![0.0; head_dim];
    for (o, hv) in head.iter_mut().enumerate() {
        let w = &params[lay.head_w + o * cfg.hidden..lay.head_w + (o + 1) * cfg.hidden];
        let mut acc = params[lay.head_b + o];
        for k in 0..cfg.hidden {
            acc += w[k] * hidden[k];
        }
        *hv = acc;
    }

    Ok(Trace {
        conv_pre,
        lin_pre,
        concat,
        hidden_pre,
        head,
    })
}

/// Accumulates parameter gradients for one observation given the gradient
/// at the head outputs.
pub(crate) fn backward(
    cfg: &NetworkConfig,
    head_dim: usize,
    params: &[f64],
    obs: &Observation,
    trace: &Trace,
    d_head: &[f64],
    grad: &mut [f64],
) {
    let lay = layout_with_head(cfg, head_dim);
    let (filters, kernel) = (cfg.conv_filters, cfg.conv_kernel);
    let hidden: Vec<f64> = trace.hidden_pre.iter().map(|&v| relu(v)).collect();

    // Head.
    let mut d_hidden = vec![0.0; cfg.hidden];
    for o in 0..head_dim {
        grad[lay.head_b + o] += d_head[o];
        for k in 0..cfg.hidden {
            grad[lay.head_w + o * cfg.hidden + k] += d_head[o] * hidden[k];
            d_hidden[k] += params[lay.head_w + o * cfg.hidden + k] * d_head[o];
        }
    }

    // Hidden layer.
    let clen = trace.concat.len();
    let mut d_concat = vec![0.0; clen];
    for u in 0..cfg.hidden {
        if trace.hidden_pre[u] <= 0.0 {
            continue;
        }
        let du = d_hidden[u];
        grad[lay.hidden_b + u] += du;
        for k in 0..clen {
            grad[lay.hidden_w + u * clen + k] += du * trace.concat[k];
            d_concat[k] += params[lay.hidden_w + u * clen + k] * du;
        }
    }

    // Feature units, in concat order.
    let seqs = obs.seqs();
    let vecs = obs.vecs();
    let mut base = 0;
    for (i, x) in seqs.iter().enumerate() {
        let out_len = cfg.conv_out_len(i);
        for f in 0..filters {
            for pos in 0..out_len {
                let idx = f * out_len + pos;
                if trace.conv_pre[i][idx] <= 0.0 {
                    continue;
                }
                let d = d_concat[base + idx];
                grad[lay.conv_b[i] + f] += d;
                for k in 0..kernel {
                    grad[lay.conv_w[i] + f * kernel + k] += d * x[pos + k];
                }
            }
        }
        base += filters * out_len;
    }
    for (j, x) in vecs.iter().enumerate() {
        let len = cfg.vec_lens[j];
        for u in 0..cfg.linear_width {
            if trace.lin_pre[j][u] <= 0.0 {
                continue;
            }
            let d = d_concat[base + u];
            grad[lay.lin_b[j] + u] += d;
            for k in 0..len {
                grad[lay.lin_w[j] + u * len + k] += d * x[k];
            }
        }
        base += cfg.linear_width;
    }
}

/// Numerically stable softmax.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Shannon entropy of a probability vector.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Writes the flat buffer into a checkpoint container under a name prefix.
pub(crate) fn export_params(
    c: &mut ParamContainer,
    prefix: &str,
    cfg: &NetworkConfig,
    head_dim: usize,
    params: &[f64],
) {
    let mut off = 0;
    for (name, shape) in cfg.segments(head_dim) {
        let len: usize = shape.iter().product();
        c.insert(
            &format!("{prefix}.{name}"),
            ParamArray::new(shape, params[off..off + len].to_vec()).unwrap(),
        );
        off += len;
    }
    debug_assert_eq!(off, params.len());
}

/// Reads a flat buffer back from a checkpoint container.
pub(crate) fn import_params(
    c: &ParamContainer,
    prefix: &str,
    cfg: &NetworkConfig,
    head_dim: usize,
) -> Result<Vec<f64>> {
    let mut params = Vec::with_capacity(cfg.param_len(head_dim));
    for (name, shape) in cfg.segments(head_dim) {
        let arr = c.take(&format!("{prefix}.{name}"), &shape)?;
        params.extend_from_slice(&arr.data);
    }
    Ok(params)
}
