//! Ingestion, validation, and persistence of the four input trace kinds
//! (bandwidth, head orientation, object tracks, saliency) and of per-chunk
//! results.
//!
//! All text formats round-trip bit-exactly: floats are written with Rust's
//! shortest round-trip formatting and parsed back to the identical value.

mod bandwidth;
mod head;
mod objects;
mod saliency;

pub mod results;

pub use bandwidth::{convert_hsdpa_log, BandwidthSample, BandwidthTrace, TimeUnit};
pub use head::{GazeSample, HeadSample, HeadTrace, QuatOrder};
pub use objects::{ObjectTrackSet, TrackedBox};
pub use saliency::SaliencyGrid;

use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(path, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
