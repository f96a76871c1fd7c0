//! Object tracks: per-frame detection boxes in normalized ERP coordinates,
//! stored as newline-delimited JSON records.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::media_model::ErpRect;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedBox {
    pub id: i64,
    #[serde(flatten)]
    pub rect: ErpRect,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    frame: usize,
    boxes: Vec<TrackedBox>,
}

/// Detection boxes per frame. Frames without a record have no boxes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjectTrackSet {
    frames: BTreeMap<usize, Vec<TrackedBox>>,
}

impl ObjectTrackSet {
    pub fn new() -> Self {
        ObjectTrackSet::default()
    }

    pub fn insert(&mut self, frame: usize, b: TrackedBox) {
        self.frames.entry(frame).or_default().push(b);
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = super::read_to_string(path)?;
        let mut set = ObjectTrackSet::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let rec: FrameRecord = serde_json::from_str(line)
                .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
            if set.frames.contains_key(&rec.frame) {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("duplicate record for frame {}", rec.frame),
                ));
            }
            for b in &rec.boxes {
                b.rect.validate().map_err(|e| {
                    Error::parse(path, line_no, format!("box id {}: {e}", b.id))
                })?;
            }
            set.frames.insert(rec.frame, rec.boxes);
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (&frame, boxes) in &self.frames {
            let rec = FrameRecord {
                frame,
                boxes: boxes.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("serializable record"));
            out.push('\n');
        }
        super::write_file(path, out.as_bytes())
    }

    pub fn is_empty(&self) -> bool {
        self.frames.values().all(|b| b.is_empty())
    }

    pub fn max_frame(&self) -> Option<usize> {
        self.frames.keys().next_back().copied()
    }

    pub fn boxes_in_frame(&self, frame: usize) -> &[TrackedBox] {
        self.frames.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All boxes whose frame lies in the given global-frame range.
    pub fn boxes_in_frames(
        &self,
        range: std::ops::Range<usize>,
    ) -> impl Iterator<Item = (usize, &TrackedBox)> {
        self.frames
            .range(range)
            .flat_map(|(&f, boxes)| boxes.iter().map(move |b| (f, b)))
    }
}
