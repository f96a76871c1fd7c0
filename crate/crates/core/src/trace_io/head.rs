//! Head-orientation traces: timestamped unit quaternions, normalized at
//! load, resampled to frame times by nearest-neighbor selection.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::media_model::{gaze_from_quaternion, ChunkTimeline, GazePoint, Quaternion};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadSample {
    pub time_s: f64,
    pub q: Quaternion,
}

/// A gaze angle with the time it was observed; the unit predictors consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub time_s: f64,
    pub gaze: GazePoint,
}

/// Component order of the quaternion columns in a source log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuatOrder {
    /// Scalar first: w, x, y, z (the crate's native order).
    Wxyz,
    /// Scalar last: x, y, z, w.
    Xyzw,
}

pub const HEAD_HEADER: &str = "time_s,qw,qx,qy,qz";

/// A user head-movement log. Samples are strictly increasing in time and
/// hold unit quaternions (normalized on load). When the log is shorter
/// than the session it loops the same way bandwidth traces do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadTrace {
    samples: Vec<HeadSample>,
}

impl HeadTrace {
    pub fn new(samples: Vec<HeadSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("head trace is empty".into()));
        }
        for (i, pair) in samples.windows(2).enumerate() {
            if !(pair[1].time_s > pair[0].time_s) {
                return Err(Error::Validation(format!(
                    "head trace time_s must be strictly increasing (sample {})",
                    i + 2
                )));
            }
        }
        let samples = samples
            .iter()
            .map(|s| {
                Ok(HeadSample {
                    time_s: s.time_s,
                    q: s.q.normalized()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HeadTrace { samples })
    }

    /// A trace holding one orientation for the whole session.
    pub fn constant(q: Quaternion, duration_s: f64, rate_hz: f64) -> Result<Self> {
        let n = (duration_s * rate_hz).ceil() as usize + 1;
        HeadTrace::new(
            (0..n)
                .map(|i| HeadSample {
                    time_s: i as f64 / rate_hz,
                    q,
                })
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_order(path, QuatOrder::Wxyz)
    }

    /// Loads a `time_s,qw,qx,qy,qz` CSV, reinterpreting the four quaternion
    /// columns per `order` for logs that store the scalar last.
    pub fn load_with_order(path: &Path, order: QuatOrder) -> Result<Self> {
        let text = super::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == HEAD_HEADER => {}
            _ => {
                return Err(Error::parse(
                    path,
                    1,
                    format!("expected header `{HEAD_HEADER}`"),
                ))
            }
        }
        let mut samples = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::parse(path, line_no, "expected exactly 5 fields"));
            }
            let mut vals = [0.0f64; 5];
            for (k, f) in fields.iter().enumerate() {
                vals[k] = f.trim().parse::<f64>().map_err(|_| {
                    Error::parse(path, line_no, format!("not a number: `{}`", f.trim()))
                })?;
            }
            let q = match order {
                QuatOrder::Wxyz => Quaternion::new(vals[1], vals[2], vals[3], vals[4]),
                QuatOrder::Xyzw => Quaternion::new(vals[4], vals[1], vals[2], vals[3]),
            };
            if q.norm() < 1e-12 {
                return Err(Error::parse(path, line_no, "zero quaternion"));
            }
            samples.push(HeadSample {
                time_s: vals[0],
                q,
            });
        }
        HeadTrace::new(samples)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from(HEAD_HEADER);
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.time_s, s.q.w, s.q.x, s.q.y, s.q.z
            ));
        }
        super::write_file(path, out.as_bytes())
    }

    pub fn samples(&self) -> &[HeadSample] {
        &self.samples
    }

    pub fn first_time_s(&self) -> f64 {
        self.samples[0].time_s
    }

    pub fn last_time_s(&self) -> f64 {
        self.samples[self.samples.len() - 1].time_s
    }

    /// Maps an absolute time onto the trace, looping when the log is
    /// shorter than the session. A single-sample trace pins every query
    /// to that sample's time.
    fn loop_time(&self, time_s: f64) -> f64 {
        let first = self.first_time_s();
        let span = self.last_time_s() - first;
        if span == 0.0 || time_s <= self.last_time_s() {
            return time_s.max(first).min(self.last_time_s());
        }
        let mut rel = (time_s - first) % span;
        if rel < 0.0 {
            rel += span;
        }
        first + rel
    }

    /// Sample temporally nearest to a time (earlier sample wins ties).
    pub fn nearest(&self, time_s: f64) -> &HeadSample {
        let t = self.loop_time(time_s);
        let idx = self.samples.partition_point(|s| s.time_s <= t);
        if idx == 0 {
            return &self.samples[0];
        }
        if idx >= self.samples.len() {
            return &self.samples[self.samples.len() - 1];
        }
        let before = &self.samples[idx - 1];
        let after = &self.samples[idx];
        if (t - before.time_s) <= (after.time_s - t) {
            before
        } else {
            after
        }
    }

    /// One gaze point per frame of the timeline, by nearest-sample
    /// selection on the frame's presentation time.
    pub fn gaze_track(&self, timeline: &ChunkTimeline) -> Result<Vec<GazePoint>> {
        (0..timeline.total_frames())
            .map(|f| gaze_from_quaternion(self.nearest(timeline.frame_time_s(f)).q))
            .collect()
    }

    /// The per-frame gaze track paired with frame times, for predictors.
    pub fn gaze_samples(&self, timeline: &ChunkTimeline) -> Result<Vec<GazeSample>> {
        Ok(self
            .gaze_track(timeline)?
            .into_iter()
            .enumerate()
            .map(|(f, gaze)| GazeSample {
                time_s: timeline.frame_time_s(f),
                gaze,
            })
            .collect())
    }
}
