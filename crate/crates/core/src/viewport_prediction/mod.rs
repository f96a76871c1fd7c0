//! Viewport prediction: estimate the gaze for an upcoming chunk from the
//! user's history (average, linear, or recurrent predictor), map it to a
//! tile set, and widen that set with the tiles of object boxes that touch
//! it — objects at the edge of the predicted viewport tend to draw the
//! eye, and merging them hedges the prediction error.

mod recurrent;

pub use recurrent::{
    predict_recurrent, train_recurrent, PredictorInput, PredictorParameters, RecurrentTrainConfig,
};

use serde::{Deserialize, Serialize};

use crate::media_model::{box_tiles, wrap_angle, ChunkTimeline, GazePoint, TileGrid, TileSet};
use crate::trace_io::{GazeSample, ObjectTrackSet};
use crate::{Error, Result};

/// How object boxes are tested against the predicted viewport.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverlapMode {
    /// Each box is tested on its own: only boxes touching the viewport are
    /// merged, boxes elsewhere stay at object priority. The default.
    PerBox,
    /// One overlapping box promotes the union of all object tiles.
    Global,
}

/// The outcome of predicting and refining one chunk's viewport.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedViewport {
    /// The gaze estimate the tile sets were derived from.
    pub gaze_estimate: GazePoint,
    /// Tiles of the predicted viewport before refinement (T_v base).
    pub base_tiles: TileSet,
    /// Refined viewport: base tiles plus merged object tiles (T_v).
    pub refined_tiles: TileSet,
    /// Tiles of all object boxes in the chunk (T_obj).
    pub object_tiles: TileSet,
    /// Object tiles whose source box touches the base viewport.
    pub object_overlapping: TileSet,
    /// Object tiles from boxes that do not touch the base viewport.
    pub object_disjoint: TileSet,
}

/// Widens a predicted viewport with the chunk's object boxes.
///
/// Every box of the chunk's frames contributes its tiles to `object_tiles`.
/// In the per-box mode a box whose tiles meet the (growing) viewport gets
/// all of its tiles merged, and the merge iterates until no further box
/// touches the result, so refinement is a closure: it only ever adds tiles
/// and re-applying it to its own output changes nothing. Boxes left out
/// are recorded as disjoint.
pub fn refine_viewport(
    gaze_estimate: GazePoint,
    base: &TileSet,
    tracks: &ObjectTrackSet,
    chunk: usize,
    timeline: &ChunkTimeline,
    grid: &TileGrid,
    mode: OverlapMode,
) -> Result<PredictedViewport> {
    if base.is_empty() {
        return Err(Error::InvalidInput(
            "refinement needs a non-empty predicted viewport".into(),
        ));
    }
    let mut object_tiles = TileSet::new();
    let mut box_sets: Vec<TileSet> = Vec::new();
    for (_frame, b) in tracks.boxes_in_frames(timeline.chunk_frames(chunk)) {
        let tiles = box_tiles(&b.rect, grid);
        if tiles.is_empty() {
            continue;
        }
        object_tiles.union_with(&tiles);
        box_sets.push(tiles);
    }

    let mut overlapping = TileSet::new();
    let mut disjoint = TileSet::new();
    let mut refined_tiles = base.clone();
    match mode {
        OverlapMode::PerBox => {
            let mut merged = vec![false; box_sets.len()];
            loop {
                let mut changed = false;
                for (i, tiles) in box_sets.iter().enumerate() {
                    if !merged[i] && tiles.intersects(&refined_tiles) {
                        refined_tiles.union_with(tiles);
                        overlapping.union_with(tiles);
                        merged[i] = true;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            for (i, tiles) in box_sets.iter().enumerate() {
                if !merged[i] {
                    disjoint.union_with(tiles);
                }
            }
        }
        OverlapMode::Global => {
            if object_tiles.intersects(base) {
                overlapping = object_tiles.clone();
                refined_tiles.union_with(&object_tiles);
            } else {
                disjoint = object_tiles.clone();
            }
        }
    }

    Ok(PredictedViewport {
        gaze_estimate,
        base_tiles: base.clone(),
        refined_tiles,
        object_tiles,
        object_overlapping: overlapping,
        object_disjoint: disjoint,
    })
}

/// Gaze samples inside the trailing window [t_last − window_s, t_last].
fn window<'a>(history: &'a [GazeSample], window_s: f64) -> &'a [GazeSample] {
    let Some(last) = history.last() else {
        return history;
    };
    let cutoff = last.time_s - window_s;
    let start = history.partition_point(|s| s.time_s < cutoff);
    &history[start..]
}

/// Predicts the next gaze as the circular mean of yaw and the arithmetic
/// mean of pitch over the trailing window (2 s by default).
pub fn predict_average(history: &[GazeSample], window_s: f64) -> Result<GazePoint> {
    if history.is_empty() {
        return Err(Error::InvalidInput("gaze history is empty".into()));
    }
    let recent = window(history, window_s);
    let (mut sin_sum, mut cos_sum, mut pitch_sum) = (0.0, 0.0, 0.0);
    for s in recent {
        sin_sum += s.gaze.yaw.sin();
        cos_sum += s.gaze.yaw.cos();
        pitch_sum += s.gaze.pitch;
    }
    Ok(GazePoint::new(
        sin_sum.atan2(cos_sum),
        pitch_sum / recent.len() as f64,
    ))
}

/// A linear extrapolation result; `degenerate_fallback` marks inputs whose
/// timestamps carried no slope information, answered by the average
/// predictor instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPrediction {
    pub gaze: GazePoint,
    pub degenerate_fallback: bool,
}

/// Fits a least-squares line per angular component over the trailing
/// window (yaw unwrapped first) and extrapolates `horizon_s` past the last
/// sample. The yaw is re-wrapped and the pitch clamped to the poles.
pub fn predict_linear(
    history: &[GazeSample],
    window_s: f64,
    horizon_s: f64,
) -> Result<LinearPrediction> {
    let recent = window(history, window_s);
    if recent.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "linear prediction needs ≥ 2 samples in the window, got {}",
            recent.len()
        )));
    }
    let t_last = recent[recent.len() - 1].time_s;
    let t_mean = recent.iter().map(|s| s.time_s).sum::<f64>() / recent.len() as f64;
    let t_var: f64 = recent
        .iter()
        .map(|s| (s.time_s - t_mean) * (s.time_s - t_mean))
        .sum();
    if t_var <= 0.0 {
        return Ok(LinearPrediction {
            gaze: predict_average(history, window_s)?,
            degenerate_fallback: true,
        });
    }

    // Unwrap yaw so the fit never sees a seam jump.
    let mut unwrapped = Vec::with_capacity(recent.len());
    let mut acc = recent[0].gaze.yaw;
    unwrapped.push(acc);
    for pair in recent.windows(2) {
        acc += wrap_angle(pair[1].gaze.yaw - pair[0].gaze.yaw);
        unwrapped.push(acc);
    }

    let fit = |values: &dyn Fn(usize) -> f64| -> f64 {
        let y_mean = (0..recent.len()).map(values).sum::<f64>() / recent.len() as f64;
        let cov: f64 = recent
            .iter()
            .enumerate()
            .map(|(i, s)| (s.time_s - t_mean) * (values(i) - y_mean))
            .sum();
        let slope = cov / t_var;
        let intercept = y_mean - slope * t_mean;
        slope * (t_last + horizon_s) + intercept
    };

    let yaw = fit(&|i| unwrapped[i]);
    let pitch = fit(&|i| recent[i].gaze.pitch);
    Ok(LinearPrediction {
        gaze: GazePoint::new(yaw, pitch), // wraps yaw, clamps pitch
        degenerate_fallback: false,
    })
}

/// Share of the actual viewport the prediction covered:
/// |predicted ∩ actual| / |actual|.
pub fn prediction_accuracy(predicted: &TileSet, actual: &TileSet) -> Result<f64> {
    if actual.is_empty() {
        return Err(Error::InvalidInput(
            "accuracy is undefined against an empty actual viewport".into(),
        ));
    }
    Ok(predicted.intersection_len(actual) as f64 / actual.len() as f64)
}
