//! Tile-resolution saliency grids, one rows×cols matrix of [0, 1] values
//! per frame. Two on-disk forms are supported and auto-detected on load:
//!
//! * text: one CSV block per frame (rows lines of cols comma-separated
//!   values), blank line between frames;
//! * binary: a 16-byte header — magic `SGRD`, version u32, rows u16,
//!   cols u16, frames u32, all little-endian — followed by frames × rows ×
//!   cols f64 values, row-major.
//!
//! Out-of-range values are rejected at load, never clamped.

use std::fs;
use std::path::Path;

use crate::media_model::{ChunkTimeline, TileGrid};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SGRD";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyGrid {
    rows: usize,
    cols: usize,
    frames: Vec<Vec<f64>>,
}

impl SaliencyGrid {
    pub fn new(rows: usize, cols: usize, frames: Vec<Vec<f64>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Validation("saliency grid needs rows, cols ≥ 1".into()));
        }
        for (i, frame) in frames.iter().enumerate() {
            if frame.len() != rows * cols {
                return Err(Error::Validation(format!(
                    "saliency frame {i} has {} values, expected {}",
                    frame.len(),
                    rows * cols
                )));
            }
            if let Some(v) = frame.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Validation(format!(
                    "saliency frame {i} holds out-of-range value {v}"
                )));
            }
        }
        Ok(SaliencyGrid { rows, cols, frames })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, idx: usize) -> &[f64] {
        &self.frames[idx]
    }

    pub fn matches_grid(&self, grid: &TileGrid) -> bool {
        self.rows == grid.rows() && self.cols == grid.cols()
    }

    /// Per-tile saliency averaged over a chunk's frames (frames beyond the
    /// stored range are ignored; a chunk entirely out of range is zeros).
    pub fn chunk_feature(&self, timeline: &ChunkTimeline, chunk: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.rows * self.cols];
        let mut n = 0usize;
        for f in timeline.chunk_frames(chunk) {
            if f >= self.frames.len() {
                break;
            }
            for (a, v) in acc.iter_mut().zip(&self.frames[f]) {
                *a += v;
            }
            n += 1;
        }
        if n > 0 {
            for a in &mut acc {
                *a /= n as f64;
            }
        }
        acc
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() >= 4 && &bytes[0..4] == MAGIC {
            Self::from_binary(&bytes, path)
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::parse(path, 1, "file is neither SGRD binary nor UTF-8 text"))?;
            Self::from_csv(&text, path)
        }
    }

    fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut frames: Vec<Vec<f64>> = Vec::new();
        let mut current: Vec<Vec<f64>> = Vec::new();
        let mut cols: Option<usize> = None;
        let mut rows: Option<usize> = None;

        let mut flush = |current: &mut Vec<Vec<f64>>, line_no: usize| -> Result<()> {
            if current.is_empty() {
                return Ok(());
            }
            match rows {
                None => rows = Some(current.len()),
                Some(r) if r != current.len() => {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("frame has {} rows, expected {r}", current.len()),
                    ))
                }
                _ => {}
            }
            frames.push(current.concat());
            current.clear();
            Ok(())
        };

        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                flush(&mut current, line_no)?;
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| {
                        Error::parse(path, line_no, format!("not a number: `{}`", f.trim()))
                    })
                })
                .collect::<Result<_>>()?;
            match cols {
                None => cols = Some(row.len()),
                Some(c) if c != row.len() => {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("row has {} values, expected {c}", row.len()),
                    ))
                }
                _ => {}
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Validation(format!(
                    "{}:{}: saliency value {v} outside [0, 1]",
                    path.display(),
                    line_no
                )));
            }
            current.push(row);
        }
        flush(&mut current, text.lines().count())?;
        let rows = rows.ok_or_else(|| Error::parse(path, 1, "no saliency frames found"))?;
        let cols = cols.unwrap();
        SaliencyGrid::new(rows, cols, frames)
    }

    fn from_binary(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::parse(path, 1, "truncated SGRD header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::parse(
                path,
                1,
                format!("unsupported SGRD version {version}"),
            ));
        }
        let rows = u16::from_le_bytes(bytes[8..10].try_into().unwrap()) as usize;
        let cols = u16::from_le_bytes(bytes[10..12].try_into().unwrap()) as usize;
        let frame_count = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let expected = 16 + frame_count * rows * cols * 8;
        if bytes.len() != expected {
            return Err(Error::parse(
                path,
                1,
                format!("SGRD payload is {} bytes, expected {expected}", bytes.len()),
            ));
        }
        let mut frames = Vec::with_capacity(frame_count);
        let mut off = 16;
        for _ in 0..frame_count {
            let mut frame = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                frame.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
                off += 8;
            }
            frames.push(frame);
        }
        SaliencyGrid::new(rows, cols, frames)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (i, frame) in self.frames.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for r in 0..self.rows {
                let row: Vec<String> = frame[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .map(|v| v.to_string())
                    .collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        super::write_file(path, out.as_bytes())
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(16 + self.frames.len() * self.rows * self.cols * 8);
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&(self.rows as u16).to_le_bytes());
        bytes.extend_from_slice(&(self.cols as u16).to_le_bytes());
        bytes.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        for frame in &self.frames {
            for v in frame {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        super::write_file(path, &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_grid(seed: u64, rows: usize, cols: usize, frames: usize) -> SaliencyGrid {
        let mut rng = StdRng::seed_from_u64(seed);
        SaliencyGrid::new(
            rows,
            cols,
            (0..frames)
                .map(|_| (0..rows * cols).map(|_| rng.gen_range(0.0..=1.0)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = random_grid(5, 4, 6, 9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sal.csv");
        g.save_csv(&path).unwrap();
        assert_eq!(SaliencyGrid::load(&path).unwrap(), g);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let g = random_grid(6, 8, 8, 30);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sal.sgrd");
        g.save_binary(&path).unwrap();
        assert_eq!(SaliencyGrid::load(&path).unwrap(), g);
    }

    #[test]
    fn out_of_range_values_are_rejected_not_clamped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sal.csv");
        std::fs::write(&path, "0.5,0.2\n0.1,1.5\n").unwrap();
        assert!(SaliencyGrid::load(&path).is_err());
        assert!(SaliencyGrid::new(1, 2, vec![vec![0.0, -0.1]]).is_err());
    }

    #[test]
    fn chunk_feature_averages_frames() {
        let tl = ChunkTimeline::new(1.0, 2, 2).unwrap();
        let g = SaliencyGrid::new(
            1,
            2,
            vec![
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![0.5, 0.5],
                vec![0.5, 0.1],
            ],
        )
        .unwrap();
        assert_eq!(g.chunk_feature(&tl, 0), vec![0.5, 0.5]);
        assert_eq!(g.chunk_feature(&tl, 1), vec![0.5, 0.3]);
    }
}
