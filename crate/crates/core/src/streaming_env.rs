//! The discrete-event streaming environment.
//!
//! A session walks the chunk timeline. For every chunk the prediction
//! pipeline (gaze predictor → object refinement → priority classification)
//! is precomputed from the input traces, so replaying a session is fully
//! deterministic given the traces and the action sequence. The agent then
//! takes four actions per chunk — one ladder level for each priority class,
//! Top first — and each action downloads that class's tiles in index order
//! against the bandwidth trace. Wall time advances by download time plus
//! any wait while the playback buffer is full; the buffer drains in real
//! time once playback has started, and stall time accrued while a tile is
//! in flight is charged to that tile. The reward for the four-decision
//! group is the chunk's QoE, delivered on the Low decision.
//!
//! Startup wait (before the buffer first reaches the startup threshold) is
//! not charged as rebuffering.

use serde::{Deserialize, Serialize};

use crate::media_model::{
    viewport_tiles, BitrateLadder, ChunkTimeline, GazePoint, TileGrid, TileSet, ViewportRect,
    DEFAULT_FOV_PITCH, DEFAULT_FOV_YAW,
};
use crate::qoe_metrics::{frame_utilization, qoe, ChunkPlayback, QoEReport, QoEWeights};
use crate::tile_priority::{classify_tiles, Priority, PriorityMap, WeightMatrix};
use crate::trace_io::{BandwidthTrace, GazeSample, HeadTrace, ObjectTrackSet, SaliencyGrid};
use crate::viewport_prediction::{
    predict_average, predict_linear, predict_recurrent, prediction_accuracy, refine_viewport,
    OverlapMode, PredictedViewport, PredictorInput, PredictorParameters,
};
use crate::{Error, Result};

/// Which viewport indicator O the QoE computation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewportIndicator {
    /// Ground truth from the head trace (the default: delivered experience).
    Actual,
    /// The refined predicted viewport, identical for all frames of a chunk.
    Predicted,
}

/// The gaze predictor driving the pipeline.
#[derive(Debug, Clone)]
pub enum GazePredictor {
    /// Circular/arithmetic mean over the trailing window (2 s default).
    Average { window_s: f64 },
    /// Least-squares extrapolation over the trailing window.
    Linear { window_s: f64 },
    /// The trained recurrent predictor.
    Recurrent { params: PredictorParameters },
}

impl GazePredictor {
    pub fn default_average() -> Self {
        GazePredictor::Average { window_s: 2.0 }
    }
}

/// Static configuration of a streaming session.
#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub grid: TileGrid,
    pub ladder: BitrateLadder,
    pub timeline: ChunkTimeline,
    pub fov_yaw: f64,
    pub fov_pitch: f64,
    /// Playback buffer capacity in seconds (≥ chunk duration).
    pub buffer_capacity_s: f64,
    /// Buffer level at which playback starts.
    pub startup_threshold_s: f64,
    /// History length x of the throughput / download-time vectors.
    pub history_len: usize,
    /// Geometric decay λ of the view probability per priority class.
    pub view_prob_decay: f64,
    pub qoe_weights: QoEWeights,
    pub predictor: GazePredictor,
    pub overlap_mode: OverlapMode,
    pub o_indicator: ViewportIndicator,
    /// Algorithm-1 object merge on/off (off = base viewport only).
    pub refine_enabled: bool,
    /// Priority classification on/off (off = every tile is Top).
    pub priority_enabled: bool,
}

impl EnvConfig {
    pub fn new(grid: TileGrid, ladder: BitrateLadder, timeline: ChunkTimeline) -> Self {
        EnvConfig {
            grid,
            ladder,
            timeline,
            fov_yaw: DEFAULT_FOV_YAW,
            fov_pitch: DEFAULT_FOV_PITCH,
            buffer_capacity_s: 5.0,
            startup_threshold_s: 1.0,
            history_len: 8,
            view_prob_decay: 0.5,
            qoe_weights: QoEWeights::default(),
            predictor: GazePredictor::default_average(),
            overlap_mode: OverlapMode::PerBox,
            o_indicator: ViewportIndicator::Actual,
            refine_enabled: true,
            priority_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.timeline.chunk_duration_s();
        if self.buffer_capacity_s < d {
            return Err(Error::Config(
                "buffer capacity must be at least one chunk duration".into(),
            ));
        }
        if !(self.startup_threshold_s > 0.0) {
            return Err(Error::Config("startup threshold must be positive".into()));
        }
        if self.startup_threshold_s + d > self.buffer_capacity_s + 1e-12 {
            return Err(Error::Config(
                "startup threshold plus chunk duration must fit the buffer capacity".into(),
            ));
        }
        if self.history_len == 0 {
            return Err(Error::Config("history length must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.view_prob_decay) {
            return Err(Error::Config("view probability decay must be in [0, 1]".into()));
        }
        if !(self.fov_yaw > 0.0) || !(self.fov_pitch > 0.0) {
            return Err(Error::Config("fov extents must be positive".into()));
        }
        Ok(())
    }
}

/// The input traces of one session.
#[derive(Debug, Clone)]
pub struct SessionInputs {
    pub bandwidth: BandwidthTrace,
    pub head: HeadTrace,
    pub tracks: ObjectTrackSet,
    pub saliency: Option<SaliencyGrid>,
}

/// The observation handed to the bitrate allocator: throughput and
/// download-time histories (zero-padded, oldest first), per-tile view
/// probabilities, the selectable ladder, the last level per class, the
/// class counts, tiles still undownloaded per class, and the buffer level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub throughput_history: Vec<f64>,
    pub download_time_history: Vec<f64>,
    pub view_prob: Vec<f64>,
    pub ladder_mbps: Vec<f64>,
    pub last_levels: [usize; 4],
    pub class_counts: [usize; 4],
    pub remaining: [usize; 4],
    pub buffer_s: f64,
    pub deciding: Priority,
    pub chunk: usize,
}

/// What one chunk delivered, with its score.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkResult {
    pub chunk: usize,
    pub levels: [usize; 4],
    pub playback: ChunkPlayback,
    pub report: QoEReport,
    /// Buffer level right after the chunk entered the buffer.
    pub buffer_s: f64,
    /// Recall of the refined prediction against the midpoint viewport.
    pub accuracy: f64,
}

/// The outcome of one action.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: SessionState,
    pub reward: f64,
    /// Present on the Low decision, when the chunk completes.
    pub chunk_result: Option<ChunkResult>,
    pub done: bool,
}

/// One simulated transfer, kept for conservation audits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownloadRecord {
    pub start_s: f64,
    pub duration_s: f64,
    pub bits: f64,
}

/// Wall-clock bookkeeping of a session.
#[derive(Debug, Clone, Default)]
pub struct SessionAudit {
    pub downloads: Vec<DownloadRecord>,
    pub total_download_s: f64,
    pub total_wait_s: f64,
}

/// Per-tile view probability from the priority map: Top tiles are certain
/// (1), TopMid decays to λ, MidLow to λ², Low tiles to 0.
pub fn view_probability(pm: &PriorityMap, decay: f64) -> Vec<f64> {
    pm.tiles()
        .iter()
        .map(|p| match p {
            Priority::Top => 1.0,
            Priority::TopMid => decay,
            Priority::MidLow => decay * decay,
            Priority::Low => 0.0,
        })
        .collect()
}

/// Everything precomputed for one chunk before any action is taken.
#[derive(Debug, Clone)]
struct ChunkPlan {
    weights: WeightMatrix,
    class_tiles: [Vec<usize>; 4],
    view_prob: Vec<f64>,
    o_matrix: Vec<Vec<bool>>,
    accuracy: f64,
    predicted: PredictedViewport,
    priority_map: PriorityMap,
}

/// A deterministic, replayable streaming session.
#[derive(Debug, Clone)]
pub struct Session {
    cfg: EnvConfig,
    bandwidth: BandwidthTrace,
    plans: Vec<ChunkPlan>,
    state: SessionState,
    wall_s: f64,
    playing: bool,
    done: bool,
    prev_playback: Option<ChunkPlayback>,
    quality: Vec<f64>,
    rebuffer: Vec<f64>,
    levels: [usize; 4],
    audit: SessionAudit,
}

impl Session {
    pub fn new(cfg: EnvConfig, inputs: &SessionInputs) -> Result<Self> {
        cfg.validate()?;
        if let Some(sal) = &inputs.saliency {
            if !sal.matches_grid(&cfg.grid) {
                return Err(Error::Config(format!(
                    "saliency grid is {}×{}, tile grid is {}×{}",
                    sal.rows(),
                    sal.cols(),
                    cfg.grid.rows(),
                    cfg.grid.cols()
                )));
            }
        }
        if let Some(max_frame) = inputs.tracks.max_frame() {
            if max_frame >= cfg.timeline.total_frames() {
                return Err(Error::Config(format!(
                    "object tracks reference frame {max_frame}, session has {}",
                    cfg.timeline.total_frames()
                )));
            }
        }
        if let GazePredictor::Recurrent { params } = &cfg.predictor {
            let want = 2 + cfg.grid.tile_count();
            if params.input_dim() != want {
                return Err(Error::Config(format!(
                    "recurrent predictor expects input dim {}, the grid wants {want}",
                    params.input_dim()
                )));
            }
        }

        let plans = build_plans(&cfg, inputs)?;
        let n = cfg.grid.tile_count();
        let state = SessionState {
            throughput_history: vec![0.0; cfg.history_len],
            download_time_history: vec![0.0; cfg.history_len],
            view_prob: vec![0.0; n],
            ladder_mbps: cfg.ladder.levels_mbps().to_vec(),
            last_levels: [0; 4],
            class_counts: [0; 4],
            remaining: [0; 4],
            buffer_s: 0.0,
            deciding: Priority::Top,
            chunk: 0,
        };
        let mut session = Session {
            bandwidth: inputs.bandwidth.clone(),
            plans,
            state,
            wall_s: 0.0,
            playing: false,
            done: false,
            prev_playback: None,
            quality: vec![0.0; n],
            rebuffer: vec![0.0; n],
            levels: [0; 4],
            audit: SessionAudit::default(),
            cfg,
        };
        session.reset();
        Ok(session)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn audit(&self) -> &SessionAudit {
        &self.audit
    }

    pub fn wall_clock_s(&self) -> f64 {
        self.wall_s
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn chunk_count(&self) -> usize {
        self.cfg.timeline.chunk_count()
    }

    pub fn action_count(&self) -> usize {
        self.cfg.ladder.level_count()
    }

    /// Mean prediction accuracy over the session's chunks.
    pub fn mean_accuracy(&self) -> f64 {
        self.plans.iter().map(|p| p.accuracy).sum::<f64>() / self.plans.len() as f64
    }

    /// Recall of one chunk's refined prediction against the midpoint
    /// viewport.
    pub fn chunk_accuracy(&self, chunk: usize) -> f64 {
        self.plans[chunk].accuracy
    }

    /// Per-chunk priority map, for debug dumps.
    pub fn priority_map(&self, chunk: usize) -> &PriorityMap {
        &self.plans[chunk].priority_map
    }

    pub fn predicted_viewport(&self, chunk: usize) -> &PredictedViewport {
        &self.plans[chunk].predicted
    }

    pub fn chunk_weights(&self, chunk: usize) -> WeightMatrix {
        self.plans[chunk].weights
    }

    /// Returns the session to its initial state. The prediction pipeline is
    /// kept: it depends only on traces and configuration.
    pub fn reset(&mut self) -> &SessionState {
        let n = self.cfg.grid.tile_count();
        self.state.throughput_history = vec![0.0; self.cfg.history_len];
        self.state.download_time_history = vec![0.0; self.cfg.history_len];
        self.state.last_levels = [0; 4];
        self.state.buffer_s = 0.0;
        self.state.deciding = Priority::Top;
        self.state.chunk = 0;
        self.wall_s = self.bandwidth.first_time_s();
        self.playing = false;
        self.done = false;
        self.prev_playback = None;
        self.quality = vec![0.0; n];
        self.rebuffer = vec![0.0; n];
        self.levels = [0; 4];
        self.audit = SessionAudit::default();
        self.load_plan(0);
        &self.state
    }

    fn load_plan(&mut self, chunk: usize) {
        let plan = &self.plans[chunk];
        self.state.class_counts = [
            plan.weights.w_top,
            plan.weights.w_top_mid,
            plan.weights.w_mid_low,
            plan.weights.w_low,
        ];
        self.state.remaining = self.state.class_counts;
        self.state.view_prob = plan.view_prob.clone();
    }

    /// Applies one ladder level to the currently deciding priority class.
    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidInput("session is already done".into()));
        }
        if action >= self.cfg.ladder.level_count() {
            return Err(Error::InvalidInput(format!(
                "action {action} out of range (ladder has {} levels)",
                self.cfg.ladder.level_count()
            )));
        }
        let class = self.state.deciding;
        let ci = class.class_index();
        let chunk = self.state.chunk;
        let duration = self.cfg.timeline.chunk_duration_s();
        let n = self.cfg.grid.tile_count();
        let mbps = self.cfg.ladder.mbps(action);

        let tiles = self.plans[chunk].class_tiles[ci].clone();
        for tile in tiles {
            self.quality[tile] = mbps;
            if action == 0 {
                continue; // level 0: nothing transmitted, zero time
            }
            let bits = self.cfg.ladder.tile_bits(action, duration, n);
            let dt = self.bandwidth.transfer_duration(self.wall_s, bits)?;
            if self.playing {
                let drain = self.state.buffer_s.min(dt);
                self.state.buffer_s -= drain;
                self.rebuffer[tile] += dt - drain;
            }
            self.audit.downloads.push(DownloadRecord {
                start_s: self.wall_s,
                duration_s: dt,
                bits,
            });
            self.audit.total_download_s += dt;
            self.wall_s += dt;
            push_history(&mut self.state.throughput_history, bits / dt / 1e6);
            push_history(&mut self.state.download_time_history, dt);
        }
        self.levels[ci] = action;
        self.state.last_levels[ci] = action;
        self.state.remaining[ci] = 0;

        let mut reward = 0.0;
        let mut chunk_result = None;
        if class == Priority::Low {
            let plan = &self.plans[chunk];
            let playback = ChunkPlayback {
                quality_mbps: self.quality.clone(),
                viewport: plan.o_matrix.clone(),
                rebuffer_s: self.rebuffer.clone(),
            };
            let class_mbps = [
                self.cfg.ladder.mbps(self.levels[0]),
                self.cfg.ladder.mbps(self.levels[1]),
                self.cfg.ladder.mbps(self.levels[2]),
                self.cfg.ladder.mbps(self.levels[3]),
            ];
            let util = frame_utilization(&plan.weights, class_mbps);
            let report = qoe(
                &playback,
                self.prev_playback.as_ref(),
                &self.cfg.qoe_weights,
                util,
            );
            reward = report.qoe;

            // The finished chunk enters the buffer; wait out any overflow
            // first (playback keeps draining while we hold the download).
            let over = self.state.buffer_s + duration - self.cfg.buffer_capacity_s;
            if over > 0.0 {
                debug_assert!(self.playing, "cap overflow requires active playback");
                self.state.buffer_s -= over;
                self.wall_s += over;
                self.audit.total_wait_s += over;
            }
            self.state.buffer_s += duration;
            if !self.playing && self.state.buffer_s >= self.cfg.startup_threshold_s {
                self.playing = true;
            }

            chunk_result = Some(ChunkResult {
                chunk,
                levels: self.levels,
                playback: playback.clone(),
                report,
                buffer_s: self.state.buffer_s,
                accuracy: plan.accuracy,
            });
            self.prev_playback = Some(playback);

            self.quality = vec![0.0; n];
            self.rebuffer = vec![0.0; n];
            self.levels = [0; 4];
            self.state.deciding = Priority::Top;
            self.state.chunk += 1;
            if self.state.chunk == self.cfg.timeline.chunk_count() {
                self.done = true;
            } else {
                let next = self.state.chunk;
                self.load_plan(next);
            }
        } else {
            self.state.deciding = Priority::from_class_index(ci + 1).unwrap();
        }

        debug_assert!(
            self.state.buffer_s >= -1e-9
                && self.state.buffer_s <= self.cfg.buffer_capacity_s + 1e-9,
            "buffer out of bounds: {}",
            self.state.buffer_s
        );
        Ok(StepOutcome {
            state: self.state.clone(),
            reward,
            chunk_result,
            done: self.done,
        })
    }
}

fn push_history(h: &mut Vec<f64>, v: f64) {
    h.remove(0);
    h.push(v);
}

impl Session {
    /// The network shape matching this session's observation vectors.
    pub fn network_config(&self) -> crate::a3c_agent::NetworkConfig {
        crate::a3c_agent::NetworkConfig::for_env(
            self.cfg.history_len,
            self.cfg.grid.tile_count(),
            self.cfg.ladder.level_count(),
        )
    }

    /// The current state as normalized network inputs: rates relative to
    /// the ladder top, times on a 10-second scale, counts relative to the
    /// tile count, buffer relative to capacity.
    pub fn observation(&self) -> crate::a3c_agent::Observation {
        let s = &self.state;
        let max = self.cfg.ladder.max_mbps();
        let n = self.cfg.grid.tile_count() as f64;
        crate::a3c_agent::Observation {
            throughput: s.throughput_history.iter().map(|v| v / max).collect(),
            download_time: s.download_time_history.iter().map(|v| v / 10.0).collect(),
            view_prob: s.view_prob.clone(),
            ladder: s.ladder_mbps.iter().map(|v| v / max).collect(),
            last_levels: s
                .last_levels
                .iter()
                .map(|&l| self.cfg.ladder.mbps(l) / max)
                .collect(),
            class_counts: s.class_counts.iter().map(|&c| c as f64 / n).collect(),
            remaining: s.remaining.iter().map(|&c| c as f64 / n).collect(),
            buffer: vec![s.buffer_s / self.cfg.buffer_capacity_s],
        }
    }
}

impl crate::a3c_agent::Env for Session {
    fn reset(&mut self) -> Result<crate::a3c_agent::Observation> {
        Session::reset(self);
        Ok(self.observation())
    }

    fn step(&mut self, action: usize) -> Result<(crate::a3c_agent::Observation, f64, bool)> {
        let out = Session::step(self, action)?;
        Ok((self.observation(), out.reward, out.done))
    }
}

/// Runs the prediction pipeline for every chunk of the session.
fn build_plans(cfg: &EnvConfig, inputs: &SessionInputs) -> Result<Vec<ChunkPlan>> {
    let timeline = &cfg.timeline;
    let grid = &cfg.grid;
    let f_m = timeline.frames_per_chunk();
    let gaze_samples = inputs.head.gaze_samples(timeline)?;

    // Ground-truth viewport per frame.
    let actual_sets: Vec<TileSet> = gaze_samples
        .iter()
        .map(|s| {
            viewport_tiles(
                &ViewportRect {
                    center: s.gaze,
                    fov_yaw: cfg.fov_yaw,
                    fov_pitch: cfg.fov_pitch,
                },
                grid,
            )
        })
        .collect();

    let mut plans = Vec::with_capacity(timeline.chunk_count());
    for chunk in 0..timeline.chunk_count() {
        let history = &gaze_samples[..chunk * f_m];
        let target_time = timeline.chunk_midpoint_s(chunk);
        let gaze = predict_gaze(cfg, inputs, history, chunk, target_time)?;

        let base = viewport_tiles(
            &ViewportRect {
                center: gaze,
                fov_yaw: cfg.fov_yaw,
                fov_pitch: cfg.fov_pitch,
            },
            grid,
        );
        let mut predicted = refine_viewport(
            gaze,
            &base,
            &inputs.tracks,
            chunk,
            timeline,
            grid,
            cfg.overlap_mode,
        )?;
        if !cfg.refine_enabled {
            predicted.refined_tiles = predicted.base_tiles.clone();
        }

        let (priority_map, weights) = if cfg.priority_enabled {
            classify_tiles(
                &predicted.base_tiles,
                &predicted.object_overlapping,
                &predicted.object_disjoint,
                grid,
            )?
        } else {
            classify_tiles(&grid.all_tiles(), &TileSet::new(), &TileSet::new(), grid)?
        };

        let class_tiles = [
            priority_map.class_tiles(Priority::Top),
            priority_map.class_tiles(Priority::TopMid),
            priority_map.class_tiles(Priority::MidLow),
            priority_map.class_tiles(Priority::Low),
        ];
        let view_prob = view_probability(&priority_map, cfg.view_prob_decay);

        let frames = timeline.chunk_frames(chunk);
        let o_matrix: Vec<Vec<bool>> = match cfg.o_indicator {
            ViewportIndicator::Actual => frames
                .clone()
                .map(|f| {
                    (0..grid.tile_count())
                        .map(|t| actual_sets[f].contains(t))
                        .collect()
                })
                .collect(),
            ViewportIndicator::Predicted => {
                let row: Vec<bool> = (0..grid.tile_count())
                    .map(|t| predicted.refined_tiles.contains(t))
                    .collect();
                frames.clone().map(|_| row.clone()).collect()
            }
        };

        let midpoint_frame = chunk * f_m + f_m / 2;
        let accuracy = prediction_accuracy(&predicted.refined_tiles, &actual_sets[midpoint_frame])?;

        plans.push(ChunkPlan {
            weights,
            class_tiles,
            view_prob,
            o_matrix,
            accuracy,
            predicted,
            priority_map,
        });
    }
    Ok(plans)
}

/// Predicts the gaze for a chunk from the per-frame history before it.
/// The first chunk has no history and is seeded with the trace's first
/// orientation.
fn predict_gaze(
    cfg: &EnvConfig,
    inputs: &SessionInputs,
    history: &[GazeSample],
    chunk: usize,
    target_time: f64,
) -> Result<GazePoint> {
    if history.is_empty() {
        return crate::media_model::gaze_from_quaternion(inputs.head.samples()[0].q);
    }
    match &cfg.predictor {
        GazePredictor::Average { window_s } => predict_average(history, *window_s),
        GazePredictor::Linear { window_s } => {
            let horizon = target_time - history[history.len() - 1].time_s;
            match predict_linear(history, *window_s, horizon) {
                Ok(p) => Ok(p.gaze),
                // A window too sparse to fit falls back to the average.
                Err(Error::InvalidInput(_)) => predict_average(history, *window_s),
                Err(e) => Err(e),
            }
        }
        GazePredictor::Recurrent { params } => {
            let f_m = cfg.timeline.frames_per_chunk();
            // One gaze per completed chunk: its last frame's sample.
            let gaze_history: Vec<GazePoint> = (0..chunk)
                .map(|c| history[c * f_m + f_m - 1].gaze)
                .collect();
            let sal_dim = cfg.grid.tile_count();
            let saliency: Vec<Vec<f64>> = (0..chunk)
                .map(|c| match &inputs.saliency {
                    Some(s) => s.chunk_feature(&cfg.timeline, c + 1),
                    None => vec![0.0; sal_dim],
                })
                .collect();
            predict_recurrent(&PredictorInput::new(gaze_history, saliency), params)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media_model::quaternion_from_gaze;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn static_inputs(throughput_mbps: f64, chunks: usize, f_m: usize) -> SessionInputs {
        let duration = chunks as f64;
        SessionInputs {
            bandwidth: BandwidthTrace::constant(throughput_mbps, duration.max(60.0)),
            head: HeadTrace::constant(
                quaternion_from_gaze(GazePoint::new(0.0, 0.0)),
                duration,
                f_m as f64,
            )
            .unwrap(),
            tracks: ObjectTrackSet::new(),
            saliency: None,
        }
    }

    fn config(chunks: usize, f_m: usize) -> EnvConfig {
        EnvConfig::new(
            TileGrid::default_8x8(),
            BitrateLadder::default_six(),
            ChunkTimeline::new(1.0, chunks, f_m).unwrap(),
        )
    }

    #[test]
    fn reset_zeroes_everything() {
        let inputs = static_inputs(8.0, 2, 4);
        let mut s = Session::new(config(2, 4), &inputs).unwrap();
        let st = s.reset().clone();
        assert_eq!(st.throughput_history, vec![0.0; 8]);
        assert_eq!(st.download_time_history, vec![0.0; 8]);
        assert_eq!(st.remaining, st.class_counts);
        assert_eq!(st.buffer_s, 0.0);
        assert_eq!(st.deciding, Priority::Top);
        // Static gaze at (0, 0): the default-FOV viewport covers 20 tiles.
        assert_eq!(st.class_counts, [20, 0, 0, 44]);
        // Two resets give identical states.
        assert_eq!(s.reset(), &st);
    }

    #[test]
    fn all_zero_actions_transmit_nothing() {
        let inputs = static_inputs(8.0, 2, 4);
        let mut s = Session::new(config(2, 4), &inputs).unwrap();
        let mut last = None;
        while !s.is_done() {
            last = Some(s.step(0).unwrap());
        }
        let out = last.unwrap();
        assert!(out.done);
        let res = out.chunk_result.unwrap();
        assert_eq!(res.report.qoe1, 0.0);
        assert_eq!(res.report.qoe2, 0.0);
        assert_eq!(res.report.utilization, 0.0);
        assert_eq!(s.audit().downloads.len(), 0);
        assert_eq!(s.wall_clock_s(), 0.0);
    }

    #[test]
    fn download_time_matches_closed_form() {
        // Constant 8 Mbps, one chunk, Top class at level 1 (1 Mbps frame
        // rate): each tile is (1/64) Mbit, so the class downloads in
        // w_top · (1/64) / 8 seconds.
        let inputs = static_inputs(8.0, 1, 4);
        let mut s = Session::new(config(1, 4), &inputs).unwrap();
        let w_top = s.state().class_counts[0] as f64;
        s.step(1).unwrap(); // Top at 1 Mbps
        let expected = w_top * (1.0 / 64.0) / 8.0;
        assert!((s.audit().total_download_s - expected).abs() < 1e-12);
        s.step(0).unwrap();
        s.step(0).unwrap();
        let out = s.step(0).unwrap();
        assert!(out.done);
        assert!((s.audit().total_download_s - expected).abs() < 1e-12);
    }

    #[test]
    fn replay_is_deterministic() {
        let inputs = static_inputs(6.0, 3, 5);
        let cfg = config(3, 5);
        let mut rng = StdRng::seed_from_u64(4);
        let actions: Vec<usize> = (0..12).map(|_| rng.gen_range(0..6)).collect();
        let run = |cfg: &EnvConfig| {
            let mut s = Session::new(cfg.clone(), &inputs).unwrap();
            let mut outs = Vec::new();
            for &a in &actions {
                outs.push(s.step(a).unwrap());
            }
            outs
        };
        assert_eq!(run(&cfg), run(&cfg));
    }

    #[test]
    fn reward_decomposes_into_chunk_qoe() {
        let inputs = static_inputs(10.0, 4, 6);
        let mut s = Session::new(config(4, 6), &inputs).unwrap();
        let mut rng = StdRng::seed_from_u64(8);
        let mut total = 0.0;
        let mut reports = Vec::new();
        while !s.is_done() {
            let out = s.step(rng.gen_range(0..6)).unwrap();
            total += out.reward;
            if let Some(res) = out.chunk_result {
                reports.push(res);
            }
        }
        assert_eq!(reports.len(), 4);
        // Recompute each chunk's QoE independently from its playback.
        let mut prev: Option<ChunkPlayback> = None;
        let mut recomputed = 0.0;
        for r in &reports {
            let rep = qoe(&r.playback, prev.as_ref(), &QoEWeights::default(), 0.0);
            recomputed += rep.qoe;
            assert!((rep.qoe - r.report.qoe).abs() < 1e-12);
            prev = Some(r.playback.clone());
        }
        assert!((total - recomputed).abs() < 1e-12);
    }

    #[test]
    fn buffer_stays_within_bounds_and_time_is_conserved() {
        let inputs = static_inputs(4.0, 6, 4);
        let mut s = Session::new(config(6, 4), &inputs).unwrap();
        let mut rng = StdRng::seed_from_u64(21);
        while !s.is_done() {
            let out = s.step(rng.gen_range(0..6)).unwrap();
            assert!(out.state.buffer_s >= -1e-9);
            assert!(out.state.buffer_s <= 5.0 + 1e-9);
        }
        let audit = s.audit();
        let wall = s.wall_clock_s() - inputs.bandwidth.first_time_s();
        assert!(
            (audit.total_download_s + audit.total_wait_s - wall).abs() < 1e-9,
            "wall {wall} vs downloads {} + waits {}",
            audit.total_download_s,
            audit.total_wait_s
        );
    }

    #[test]
    fn raising_level_never_cuts_class_download_time() {
        let inputs = static_inputs(7.0, 1, 4);
        let mut prev_time = -1.0;
        for level in 0..6 {
            let mut s = Session::new(config(1, 4), &inputs).unwrap();
            s.step(level).unwrap();
            let t = s.audit().total_download_s;
            assert!(t >= prev_time, "level {level}: {t} < {prev_time}");
            prev_time = t;
        }
    }

    #[test]
    fn view_probability_tiers() {
        let g = TileGrid::default_8x8();
        let viewport: TileSet = (20..32).collect();
        let over: TileSet = [32, 33, 34].into_iter().collect();
        let dis: TileSet = [50, 51, 52, 53].into_iter().collect();
        let (pm, w) = classify_tiles(&viewport, &over, &dis, &g).unwrap();
        assert_eq!(w.as_array(), [12, 3, 4, 45]);
        let p = view_probability(&pm, 0.5);
        let count = |v: f64| p.iter().filter(|&&x| x == v).count();
        assert_eq!(count(1.0), 12);
        assert_eq!(count(0.5), 3);
        assert_eq!(count(0.25), 4);
        assert_eq!(count(0.0), 45);
    }

    #[test]
    fn out_of_range_action_and_done_session_are_rejected() {
        let inputs = static_inputs(8.0, 1, 2);
        let mut s = Session::new(config(1, 2), &inputs).unwrap();
        assert!(s.step(6).is_err());
        for _ in 0..4 {
            s.step(0).unwrap();
        }
        assert!(s.step(0).is_err());
    }

    #[test]
    fn rebuffering_accrues_when_rate_exceeds_bandwidth() {
        // 35 Mbps of tiles through a 16 Mbps pipe: each chunk needs
        // 2.1875 s of transfer against 1 s of playback.
        let inputs = static_inputs(16.0, 4, 4);
        let mut s = Session::new(config(4, 4), &inputs).unwrap();
        let mut rebuffer = 0.0;
        while !s.is_done() {
            let out = s.step(5).unwrap();
            if let Some(res) = out.chunk_result {
                rebuffer += res.report.qoe2;
            }
        }
        assert!(rebuffer > 1.0, "expected stalls, got {rebuffer}");
    }

    #[test]
    fn priority_off_forces_all_top() {
        let inputs = static_inputs(8.0, 1, 2);
        let mut cfg = config(1, 2);
        cfg.priority_enabled = false;
        let s = Session::new(cfg, &inputs).unwrap();
        assert_eq!(s.state().class_counts, [64, 0, 0, 0]);
        assert!(s.state().view_prob.iter().all(|&p| p == 1.0));
    }
}
