//! Shared fixtures: synthetic traces and run configs over a temp dir.
//!
//! Each test binary uses a subset of these helpers.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tilestream::experiment::{
    EnvSettings, EvaluateSettings, FovConfig, GridConfig, PolicyConfig, PredictorConfig,
    RunConfig, TimelineConfig, TrainingSettings,
};
use tilestream::media_model::{quaternion_from_gaze, GazePoint};
use tilestream::trace_io::{BandwidthSample, BandwidthTrace, HeadSample, HeadTrace};

pub fn write_constant_bandwidth(dir: &Path, name: &str, mbps: f64, duration_s: f64) -> PathBuf {
    let path = dir.join(name);
    BandwidthTrace::constant(mbps, duration_s).save(&path).unwrap();
    path
}

pub fn write_step_bandwidth(dir: &Path, name: &str, steps: &[(f64, f64)]) -> PathBuf {
    let path = dir.join(name);
    BandwidthTrace::new(
        steps
            .iter()
            .map(|&(time_s, throughput_mbps)| BandwidthSample {
                time_s,
                throughput_mbps,
            })
            .collect(),
    )
    .unwrap()
    .save(&path)
    .unwrap();
    path
}

pub fn write_static_head(
    dir: &Path,
    name: &str,
    gaze: GazePoint,
    duration_s: f64,
    rate_hz: f64,
) -> PathBuf {
    let path = dir.join(name);
    HeadTrace::constant(quaternion_from_gaze(gaze), duration_s, rate_hz)
        .unwrap()
        .save(&path)
        .unwrap();
    path
}

/// A head trace panning at a constant yaw rate.
pub fn write_panning_head(
    dir: &Path,
    name: &str,
    yaw_rate: f64,
    duration_s: f64,
    rate_hz: f64,
) -> PathBuf {
    let path = dir.join(name);
    let n = (duration_s * rate_hz).ceil() as usize + 1;
    let samples: Vec<HeadSample> = (0..n)
        .map(|i| {
            let t = i as f64 / rate_hz;
            HeadSample {
                time_s: t,
                q: quaternion_from_gaze(GazePoint::new(yaw_rate * t, 0.0)),
            }
        })
        .collect();
    HeadTrace::new(samples).unwrap().save(&path).unwrap();
    path
}

/// A small static-gaze session config: 8×8 grid, `chunks` 1-second chunks
/// of `frames_per_chunk` frames, one constant 16 Mbps trace.
pub fn base_config(dir: &Path, chunks: usize, frames_per_chunk: usize) -> RunConfig {
    let bandwidth = write_constant_bandwidth(dir, "bw.csv", 16.0, 120.0);
    let head = write_static_head(
        dir,
        "head.csv",
        GazePoint::new(0.0, 0.0),
        chunks as f64,
        frames_per_chunk as f64,
    );
    RunConfig {
        bandwidth_traces: vec![bandwidth],
        head_trace: head,
        object_tracks: None,
        saliency: None,
        grid: GridConfig::default(),
        ladder_mbps: vec![0.0, 1.0, 5.0, 8.0, 16.0, 35.0],
        timeline: TimelineConfig {
            chunk_duration_s: 1.0,
            chunks,
            frames_per_chunk,
        },
        fov: FovConfig::default(),
        env: EnvSettings::default(),
        qoe_weights: [1.0, 1.0, 1.0, 1.0],
        predictor: PredictorConfig::Average { window_s: 2.0 },
        policy: PolicyConfig::FixedLevel { level: 1 },
        training: TrainingSettings::default(),
        evaluate: EvaluateSettings::default(),
        seed: 0,
        out_dir: dir.join("out"),
    }
}
