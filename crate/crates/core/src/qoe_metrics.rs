//! The four per-chunk QoE components, their weighted combination, and the
//! bitrate-utilization metrics.
//!
//! For a chunk with n tiles and f frames, with B_j the delivered quality of
//! tile j (Mbps) and O_{i,j} the indicator that tile j is inside the
//! viewport at frame i, the per-frame viewport ratio is
//! r_i = Σ_j B_j·O_{i,j} / Σ_j B_j (0 when nothing was delivered). Then:
//!
//! * viewport quality    = (1/n) · Σ_i r_i
//! * rebuffer time       = Σ_j d_j (seconds stalled per tile)
//! * intra-chunk smoothness = (1/n) · population std-dev of {r_i}
//! * inter-chunk smoothness = (1/n) · |Σ_i r_i − Σ_i r_i(previous chunk)|
//! * qoe = μ1·q1 − μ2·q2 − μ3·q3 − μ4·q4
//!
//! The ratio r_i is homogeneous of degree 0 in B, so the quality terms
//! react to how bitrate is distributed over the viewport, not to its
//! absolute level. A normalized variant ([`viewport_quality_normalized`])
//! reporting the plain mean viewport bitrate share per frame is provided
//! for sanity output and is never substituted for the primary metric.

use serde::{Deserialize, Serialize};

use crate::tile_priority::WeightMatrix;
use crate::{Error, Result};

/// Everything needed to score one chunk after playback.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkPlayback {
    /// Delivered quality per tile, in Mbps (a ladder value or 0).
    pub quality_mbps: Vec<f64>,
    /// Viewport indicator per frame per tile.
    pub viewport: Vec<Vec<bool>>,
    /// Rebuffer seconds charged to each tile.
    pub rebuffer_s: Vec<f64>,
}

impl ChunkPlayback {
    pub fn tile_count(&self) -> usize {
        self.quality_mbps.len()
    }

    pub fn frame_count(&self) -> usize {
        self.viewport.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.tile_count();
        if self.rebuffer_s.len() != n {
            return Err(Error::InvalidInput(
                "rebuffer vector length differs from tile count".into(),
            ));
        }
        if self.viewport.iter().any(|f| f.len() != n) {
            return Err(Error::InvalidInput(
                "viewport indicator row length differs from tile count".into(),
            ));
        }
        if self.rebuffer_s.iter().any(|d| *d < 0.0) {
            return Err(Error::InvalidInput("negative rebuffer duration".into()));
        }
        Ok(())
    }

    /// The per-frame viewport ratio r_i; 0 when ΣB = 0.
    pub fn frame_ratios(&self) -> Vec<f64> {
        let total: f64 = self.quality_mbps.iter().sum();
        self.viewport
            .iter()
            .map(|frame| {
                if total <= 0.0 {
                    return 0.0;
                }
                let inside: f64 = self
                    .quality_mbps
                    .iter()
                    .zip(frame)
                    .filter(|(_, &o)| o)
                    .map(|(b, _)| *b)
                    .sum();
                inside / total
            })
            .collect()
    }
}

/// Weights (μ1, μ2, μ3, μ4) of the four QoE components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoEWeights {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
}

impl QoEWeights {
    pub fn new(mu1: f64, mu2: f64, mu3: f64, mu4: f64) -> Result<Self> {
        let w = QoEWeights { mu1, mu2, mu3, mu4 };
        if w.as_array().iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::Validation("QoE weights must be finite and ≥ 0".into()));
        }
        Ok(w)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.mu1, self.mu2, self.mu3, self.mu4]
    }
}

impl Default for QoEWeights {
    fn default() -> Self {
        QoEWeights {
            mu1: 1.0,
            mu2: 1.0,
            mu3: 1.0,
            mu4: 1.0,
        }
    }
}

/// A chunk's QoE breakdown. `qoe` is exactly
/// μ1·qoe1 − μ2·qoe2 − μ3·qoe3 − μ4·qoe4, and `utilization` is the
/// fraction of spent bitrate that went to the Top and TopMid classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoEReport {
    pub qoe1: f64,
    pub qoe2: f64,
    pub qoe3: f64,
    pub qoe4: f64,
    pub qoe: f64,
    pub utilization: f64,
}

/// Average viewport quality of a chunk: (1/n) · Σ_i r_i.
pub fn viewport_quality(p: &ChunkPlayback) -> f64 {
    let n = p.tile_count() as f64;
    if n == 0.0 {
        return 0.0;
    }
    p.frame_ratios().iter().sum::<f64>() / n
}

/// Normalized sanity variant: mean over frames of the viewport share,
/// i.e. (1/f) · Σ_i r_i. Not the primary metric.
pub fn viewport_quality_normalized(p: &ChunkPlayback) -> f64 {
    let f = p.frame_count() as f64;
    if f == 0.0 {
        return 0.0;
    }
    p.frame_ratios().iter().sum::<f64>() / f
}

/// Total rebuffer time of a chunk: Σ_j d_j.
pub fn rebuffer_time(p: &ChunkPlayback) -> f64 {
    p.rebuffer_s.iter().sum()
}

/// Intra-chunk smoothness: (1/n) · population std-dev of the per-frame
/// ratios. Zero for a single frame.
pub fn intra_chunk_smoothness(p: &ChunkPlayback) -> f64 {
    let n = p.tile_count() as f64;
    let ratios = p.frame_ratios();
    if ratios.is_empty() || n == 0.0 {
        return 0.0;
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / ratios.len() as f64;
    var.sqrt() / n
}

/// Inter-chunk smoothness: (1/n) · |Σ_i r_i(m) − Σ_i r_i(m−1)|. Zero for
/// the first chunk of a session.
pub fn inter_chunk_smoothness(p: &ChunkPlayback, prev: Option<&ChunkPlayback>) -> f64 {
    let Some(prev) = prev else { return 0.0 };
    let n = p.tile_count() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let sum: f64 = p.frame_ratios().iter().sum();
    let prev_sum: f64 = prev.frame_ratios().iter().sum();
    (sum - prev_sum).abs() / n
}

/// Combines the four components into the chunk's scalar QoE. `utilization`
/// is carried through into the report (pass 0 when no weight matrix
/// applies).
pub fn qoe(
    p: &ChunkPlayback,
    prev: Option<&ChunkPlayback>,
    w: &QoEWeights,
    utilization: f64,
) -> QoEReport {
    let qoe1 = viewport_quality(p);
    let qoe2 = rebuffer_time(p);
    let qoe3 = intra_chunk_smoothness(p);
    let qoe4 = inter_chunk_smoothness(p, prev);
    QoEReport {
        qoe1,
        qoe2,
        qoe3,
        qoe4,
        qoe: w.mu1 * qoe1 - w.mu2 * qoe2 - w.mu3 * qoe3 - w.mu4 * qoe4,
        utilization,
    }
}

/// Bitrate utilization of one frame: the share of spent bitrate that went
/// to the two user-facing classes,
/// (w_top·b_top + w_top_mid·b_top_mid) / Σ_i w_i·b_i.
/// Defined as 0 when nothing was spent. `class_mbps` holds the per-class
/// rates in Top, TopMid, MidLow, Low order.
pub fn frame_utilization(w: &WeightMatrix, class_mbps: [f64; 4]) -> f64 {
    let counts = w.as_array();
    let num = counts[0] as f64 * class_mbps[0] + counts[1] as f64 * class_mbps[1];
    let mut den = num;
    den += counts[2] as f64 * class_mbps[2];
    den += counts[3] as f64 * class_mbps[3];
    if den <= 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Session-level utilization: the flat mean of every frame's utilization
/// over the whole playback, (1/(m·f)) · Σ_chunks Σ_frames e.
pub fn session_utilization(per_chunk_frame_e: &[Vec<f64>]) -> Result<f64> {
    let total: usize = per_chunk_frame_e.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::InvalidInput("empty session".into()));
    }
    Ok(per_chunk_frame_e.iter().flatten().sum::<f64>() / total as f64)
}
