//! Core geometric and media types: the tile grid over the equirectangular
//! frame, the chunk timeline, the bitrate ladder, and gaze/viewport geometry.
//!
//! Angle conventions used throughout the crate:
//!
//! * yaw ∈ [−π, π), increasing counterclockwise about +z (to the viewer's
//!   left), wrapping modulo 2π across the ±π seam;
//! * pitch ∈ [−π/2, π/2], increasing upward (+z);
//! * the forward axis before any rotation is +x, so a gaze (yaw, pitch)
//!   corresponds to the unit direction
//!   (cos pitch · cos yaw, cos pitch · sin yaw, sin pitch).
//!
//! The equirectangular projection maps yaw to the horizontal axis (x-frac
//! = (yaw + π) / 2π) and pitch to the vertical axis (y-frac = (π/2 − pitch)
//! / π, top of the frame at pitch +π/2). Tile (r, c) of a rows×cols grid
//! covers the half-open fractional rectangle [c/cols, (c+1)/cols) ×
//! [r/rows, (r+1)/rows), so every point of the frame maps to exactly one
//! tile.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default horizontal field of view (radians): 110°, a typical HMD.
pub const DEFAULT_FOV_YAW: f64 = 110.0 * PI / 180.0;
/// Default vertical field of view (radians): 90°.
pub const DEFAULT_FOV_PITCH: f64 = 90.0 * PI / 180.0;

/// Wraps an angle into [−π, π).
pub fn wrap_angle(a: f64) -> f64 {
    let wrapped = a - 2.0 * PI * ((a + PI) / (2.0 * PI)).floor();
    // floor() rounding can land exactly on +π; fold it back.
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Smallest absolute difference between two angles on the circle.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// A gaze direction on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazePoint {
    /// Longitude, wrapped into [−π, π).
    pub yaw: f64,
    /// Latitude, clamped into [−π/2, π/2].
    pub pitch: f64,
}

impl GazePoint {
    /// Builds a gaze point, wrapping yaw and clamping pitch into range.
    pub fn new(yaw: f64, pitch: f64) -> Self {
        GazePoint {
            yaw: wrap_angle(yaw),
            pitch: pitch.clamp(-PI / 2.0, PI / 2.0),
        }
    }
}

/// A unit quaternion (w, x, y, z) describing a head orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Returns the normalized quaternion, or an error for a (near-)zero one.
    pub fn normalized(&self) -> Result<Quaternion> {
        let n = self.norm();
        if n < 1e-12 {
            return Err(Error::InvalidInput(
                "zero quaternion cannot describe an orientation".into(),
            ));
        }
        Ok(Quaternion::new(
            self.w / n,
            self.x / n,
            self.y / n,
            self.z / n,
        ))
    }

    /// Quaternion for a rotation of `angle` radians about the given axis.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (s, c) = ((angle / 2.0).sin(), (angle / 2.0).cos());
        Quaternion::new(
            c,
            axis[0] / len * s,
            axis[1] / len * s,
            axis[2] / len * s,
        )
    }

    /// Hamilton product `self * other`.
    pub fn mul(&self, o: &Quaternion) -> Quaternion {
        Quaternion::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    /// Rotates a vector by this (assumed unit) quaternion.
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        // v' = v + 2w(u×v) + 2u×(u×v), u = (x, y, z)
        let u = [self.x, self.y, self.z];
        let uv = cross(u, v);
        let uuv = cross(u, uv);
        [
            v[0] + 2.0 * (self.w * uv[0] + uuv[0]),
            v[1] + 2.0 * (self.w * uv[1] + uuv[1]),
            v[2] + 2.0 * (self.w * uv[2] + uuv[2]),
        ]
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Converts a head-orientation quaternion to the gaze angles of the rotated
/// forward axis (+x). Inputs further than 1e-6 from unit norm are
/// renormalized; a zero quaternion is an error.
pub fn gaze_from_quaternion(q: Quaternion) -> Result<GazePoint> {
    let q = if (q.norm() - 1.0).abs() <= 1e-6 {
        q
    } else {
        q.normalized()?
    };
    let f = q.rotate([1.0, 0.0, 0.0]);
    let yaw = f[1].atan2(f[0]);
    let pitch = f[2].clamp(-1.0, 1.0).asin();
    Ok(GazePoint::new(yaw, pitch))
}

/// Inverse of [`gaze_from_quaternion`] under the crate's axis convention:
/// yaw about +z composed with pitch about −y. Useful for synthesizing head
/// traces from gaze angles.
pub fn quaternion_from_gaze(g: GazePoint) -> Quaternion {
    let yaw_q = Quaternion::from_axis_angle([0.0, 0.0, 1.0], g.yaw);
    let pitch_q = Quaternion::from_axis_angle([0.0, 1.0, 0.0], -g.pitch);
    yaw_q.mul(&pitch_q)
}

/// Spatial partition of the equirectangular frame into rows×cols tiles,
/// indexed row-major from the top-left.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGrid {
    rows: usize,
    cols: usize,
    frame_width_px: u32,
    frame_height_px: u32,
}

impl TileGrid {
    pub fn new(rows: usize, cols: usize, frame_width_px: u32, frame_height_px: u32) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Validation("tile grid needs rows ≥ 1 and cols ≥ 1".into()));
        }
        if frame_width_px == 0 || frame_height_px == 0 {
            return Err(Error::Validation("frame dimensions must be positive".into()));
        }
        Ok(TileGrid {
            rows,
            cols,
            frame_width_px,
            frame_height_px,
        })
    }

    /// The paper-default 8×8 grid on a 4K ERP frame.
    pub fn default_8x8() -> Self {
        TileGrid::new(8, 8, 3840, 1920).unwrap()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn frame_width_px(&self) -> u32 {
        self.frame_width_px
    }

    pub fn frame_height_px(&self) -> u32 {
        self.frame_height_px
    }

    pub fn tile_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        debug_assert!(index < self.tile_count());
        (index / self.cols, index % self.cols)
    }

    pub fn contains_index(&self, index: usize) -> bool {
        index < self.tile_count()
    }

    /// Tile containing a gaze direction.
    pub fn tile_at(&self, g: GazePoint) -> usize {
        let xf = (g.yaw + PI) / (2.0 * PI);
        let yf = (PI / 2.0 - g.pitch) / PI;
        let col = ((xf * self.cols as f64).floor() as isize).clamp(0, self.cols as isize - 1);
        let row = ((yf * self.rows as f64).floor() as isize).clamp(0, self.rows as isize - 1);
        self.index(row as usize, col as usize)
    }

    /// Tile containing a pixel (px counted from the frame's top-left).
    pub fn tile_at_pixel(&self, px: u32, py: u32) -> usize {
        let col = (px as usize * self.cols / self.frame_width_px as usize).min(self.cols - 1);
        let row = (py as usize * self.rows / self.frame_height_px as usize).min(self.rows - 1);
        self.index(row, col)
    }

    pub fn all_tiles(&self) -> TileSet {
        (0..self.tile_count()).collect()
    }
}

/// A set of tile indices, ordered ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TileSet {
    tiles: BTreeSet<usize>,
}

impl TileSet {
    pub fn new() -> Self {
        TileSet::default()
    }

    pub fn insert(&mut self, tile: usize) {
        self.tiles.insert(tile);
    }

    pub fn contains(&self, tile: usize) -> bool {
        self.tiles.contains(&tile)
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.tiles.iter().copied()
    }

    pub fn union_with(&mut self, other: &TileSet) {
        self.tiles.extend(other.tiles.iter().copied());
    }

    pub fn union(&self, other: &TileSet) -> TileSet {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub fn intersection_len(&self, other: &TileSet) -> usize {
        self.tiles.intersection(&other.tiles).count()
    }

    pub fn intersects(&self, other: &TileSet) -> bool {
        self.tiles.intersection(&other.tiles).next().is_some()
    }

    pub fn is_subset_of(&self, other: &TileSet) -> bool {
        self.tiles.is_subset(&other.tiles)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.tiles.iter().next_back().copied()
    }
}

impl FromIterator<usize> for TileSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        TileSet {
            tiles: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a TileSet {
    type Item = usize;
    type IntoIter = std::iter::Copied<std::collections::btree_set::Iter<'a, usize>>;

    fn into_iter(self) -> Self::IntoIter {
        self.tiles.iter().copied()
    }
}

/// Temporal partition of the video into equal-duration chunks, each made of
/// a fixed number of frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkTimeline {
    chunk_duration_s: f64,
    chunk_count: usize,
    frames_per_chunk: usize,
}

impl ChunkTimeline {
    pub fn new(chunk_duration_s: f64, chunk_count: usize, frames_per_chunk: usize) -> Result<Self> {
        if !(chunk_duration_s > 0.0) {
            return Err(Error::Validation("chunk duration must be positive".into()));
        }
        if chunk_count == 0 || frames_per_chunk == 0 {
            return Err(Error::Validation(
                "timeline needs at least one chunk and one frame per chunk".into(),
            ));
        }
        Ok(ChunkTimeline {
            chunk_duration_s,
            chunk_count,
            frames_per_chunk,
        })
    }

    pub fn chunk_duration_s(&self) -> f64 {
        self.chunk_duration_s
    }

    pub fn chunk_count(&self) -> usize {
        self.chunk_count
    }

    pub fn frames_per_chunk(&self) -> usize {
        self.frames_per_chunk
    }

    pub fn total_frames(&self) -> usize {
        self.chunk_count * self.frames_per_chunk
    }

    pub fn session_duration_s(&self) -> f64 {
        self.chunk_duration_s * self.chunk_count as f64
    }

    /// Presentation time of a global frame index.
    pub fn frame_time_s(&self, frame: usize) -> f64 {
        frame as f64 * self.chunk_duration_s / self.frames_per_chunk as f64
    }

    /// Global frame range covered by a chunk.
    pub fn chunk_frames(&self, chunk: usize) -> std::ops::Range<usize> {
        let start = chunk * self.frames_per_chunk;
        start..start + self.frames_per_chunk
    }

    pub fn chunk_start_s(&self, chunk: usize) -> f64 {
        chunk as f64 * self.chunk_duration_s
    }

    /// Presentation time of the middle frame of a chunk — the instant
    /// predictions for that chunk are evaluated against.
    pub fn chunk_midpoint_s(&self, chunk: usize) -> f64 {
        self.frame_time_s(chunk * self.frames_per_chunk + self.frames_per_chunk / 2)
    }
}

/// The orderable set of selectable bitrates in Mbps. Level 0 always means
/// "do not download".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitrateLadder {
    mbps: Vec<f64>,
}

impl BitrateLadder {
    pub fn new(mbps: Vec<f64>) -> Result<Self> {
        if mbps.len() < 2 {
            return Err(Error::Validation("bitrate ladder needs at least two levels".into()));
        }
        if mbps[0] != 0.0 {
            return Err(Error::Validation("bitrate ladder must start at 0 Mbps".into()));
        }
        if mbps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("bitrate ladder must be strictly increasing".into()));
        }
        Ok(BitrateLadder { mbps })
    }

    /// The six-level default: skip, 360p, 720p, 1080p, 2K, 4K.
    pub fn default_six() -> Self {
        BitrateLadder::new(vec![0.0, 1.0, 5.0, 8.0, 16.0, 35.0]).unwrap()
    }

    pub fn level_count(&self) -> usize {
        self.mbps.len()
    }

    pub fn mbps(&self, level: usize) -> f64 {
        self.mbps[level]
    }

    pub fn levels_mbps(&self) -> &[f64] {
        &self.mbps
    }

    pub fn max_mbps(&self) -> f64 {
        *self.mbps.last().unwrap()
    }

    /// Size in bits of one tile of one chunk at the given level. A ladder
    /// level prices the whole frame, so a tile carries 1/n of it.
    pub fn tile_bits(&self, level: usize, chunk_duration_s: f64, tile_count: usize) -> f64 {
        self.mbps[level] * 1e6 * chunk_duration_s / tile_count as f64
    }
}

/// A rectangular viewport centered on a gaze direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewportRect {
    pub center: GazePoint,
    pub fov_yaw: f64,
    pub fov_pitch: f64,
}

impl ViewportRect {
    pub fn new(center: GazePoint, fov_yaw: f64, fov_pitch: f64) -> Result<Self> {
        if !(fov_yaw > 0.0 && fov_yaw <= 2.0 * PI) {
            return Err(Error::Validation("fov_yaw must be in (0, 2π]".into()));
        }
        if !(fov_pitch > 0.0 && fov_pitch <= PI) {
            return Err(Error::Validation("fov_pitch must be in (0, π]".into()));
        }
        Ok(ViewportRect {
            center,
            fov_yaw,
            fov_pitch,
        })
    }

    pub fn with_default_fov(center: GazePoint) -> Self {
        ViewportRect {
            center,
            fov_yaw: DEFAULT_FOV_YAW,
            fov_pitch: DEFAULT_FOV_PITCH,
        }
    }
}

/// Tiles whose angular rectangle meets the viewport rectangle. The viewport
/// is treated as a closed interval and tiles as half-open cells, matching
/// the tile a boundary sample falls into; yaw wraps across the ±π seam and
/// the pitch extent clamps at the poles. Never empty.
pub fn viewport_tiles(v: &ViewportRect, g: &TileGrid) -> TileSet {
    let rows = g.rows();
    let cols = g.cols();

    // Pitch interval, clamped, then mapped to y-fractions (top = 0).
    let pitch_lo = (v.center.pitch - v.fov_pitch / 2.0).max(-PI / 2.0);
    let pitch_hi = (v.center.pitch + v.fov_pitch / 2.0).min(PI / 2.0);
    let y_lo = (PI / 2.0 - pitch_hi) / PI;
    let y_hi = (PI / 2.0 - pitch_lo) / PI;

    let mut row_hit = vec![false; rows];
    for (r, hit) in row_hit.iter_mut().enumerate() {
        let t0 = r as f64 / rows as f64;
        let t1 = (r + 1) as f64 / rows as f64;
        *hit = t0 <= y_hi && t1 > y_lo;
    }

    // Yaw as a circular x-fraction interval of width fov/2π.
    let fov_frac = v.fov_yaw / (2.0 * PI);
    let mut col_hit = vec![false; cols];
    if fov_frac >= 1.0 {
        col_hit.iter_mut().for_each(|h| *h = true);
    } else {
        let x_start = (wrap_angle(v.center.yaw - v.fov_yaw / 2.0) + PI) / (2.0 * PI);
        let x_end = x_start + fov_frac;
        for (c, hit) in col_hit.iter_mut().enumerate() {
            let t0 = c as f64 / cols as f64;
            let t1 = (c + 1) as f64 / cols as f64;
            // Unroll the circle: the tile may meet the interval directly or
            // shifted one turn right.
            for shift in [0.0, 1.0] {
                if t0 + shift <= x_end && t1 + shift > x_start {
                    *hit = true;
                }
            }
        }
    }

    let mut set = TileSet::new();
    for r in 0..rows {
        if !row_hit[r] {
            continue;
        }
        for c in 0..cols {
            if col_hit[c] {
                set.insert(g.index(r, c));
            }
        }
    }
    debug_assert!(!set.is_empty());
    set
}

/// An axis-aligned rectangle in normalized ERP coordinates. `x` may wrap
/// past the right edge (x + w > 1); the vertical extent never wraps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErpRect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl ErpRect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        ErpRect { x, y, w, h }
    }

    /// Checks the constraints object-track loaders enforce.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.x) || self.y < 0.0 {
            return Err(Error::Validation(format!(
                "box origin ({}, {}) out of range",
                self.x, self.y
            )));
        }
        if self.w > 1.0 || self.y + self.h > 1.0 + 1e-9 {
            return Err(Error::Validation(format!(
                "box extent ({}, {}) out of range",
                self.w, self.h
            )));
        }
        if !self.x.is_finite() || !self.y.is_finite() || !self.w.is_finite() || !self.h.is_finite()
        {
            return Err(Error::Validation("box coordinates must be finite".into()));
        }
        Ok(())
    }
}

/// Tiles overlapping the rectangle with positive area. A degenerate box
/// (w ≤ 0 or h ≤ 0) yields the empty set.
pub fn box_tiles(rect: &ErpRect, g: &TileGrid) -> TileSet {
    let mut set = TileSet::new();
    if rect.w <= 0.0 || rect.h <= 0.0 {
        return set;
    }
    let rows = g.rows();
    let cols = g.cols();

    let y0 = rect.y.max(0.0);
    let y1 = (rect.y + rect.h).min(1.0);
    let mut row_hit = vec![false; rows];
    for (r, hit) in row_hit.iter_mut().enumerate() {
        let t0 = r as f64 / rows as f64;
        let t1 = (r + 1) as f64 / rows as f64;
        *hit = t0 < y1 && t1 > y0;
    }

    let x0 = rect.x;
    let x1 = rect.x + rect.w.min(1.0);
    let full_wrap = rect.w >= 1.0;
    let mut col_hit = vec![false; cols];
    for (c, hit) in col_hit.iter_mut().enumerate() {
        if full_wrap {
            *hit = true;
            continue;
        }
        let t0 = c as f64 / cols as f64;
        let t1 = (c + 1) as f64 / cols as f64;
        for shift in [0.0, 1.0] {
            if t0 + shift < x1 && t1 + shift > x0 {
                *hit = true;
            }
        }
    }

    for r in 0..rows {
        if !row_hit[r] {
            continue;
        }
        for c in 0..cols {
            if col_hit[c] {
                set.insert(g.index(r, c));
            }
        }
    }
    set
}
