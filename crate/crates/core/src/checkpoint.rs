//! Versioned container of named, shape-tagged parameter arrays — the
//! on-disk format shared by gaze-predictor and policy checkpoints.
//!
//! Serialized as JSON with arrays in name order, so identical parameters
//! always produce identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidInput(format!(
                "array shape {shape:?} wants {expected} values, got {}",
                data.len()
            )));
        }
        Ok(ParamArray { shape, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        ParamArray {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ParamArray::new(vec![rows, cols], data)
    }
}

/// A named collection of parameter arrays with a format version and a kind
/// tag identifying the producing model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamContainer {
    pub version: u32,
    pub kind: String,
    pub arrays: BTreeMap<String, ParamArray>,
}

impl ParamContainer {
    pub fn new(kind: &str) -> Self {
        ParamContainer {
            version: FORMAT_VERSION,
            kind: kind.to_string(),
            arrays: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, array: ParamArray) {
        self.arrays.insert(name.to_string(), array);
    }

    /// Fetches an array, validating its shape.
    pub fn take(&self, name: &str, shape: &[usize]) -> Result<&ParamArray> {
        let arr = self.arrays.get(name).ok_or_else(|| {
            Error::Config(format!("checkpoint is missing parameter array `{name}`"))
        })?;
        if arr.shape != shape {
            return Err(Error::Config(format!(
                "parameter array `{name}` has shape {:?}, expected {shape:?}",
                arr.shape
            )));
        }
        Ok(arr)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint format version {} is not supported (want {FORMAT_VERSION})",
                self.version
            )));
        }
        if self.kind != kind {
            return Err(Error::Config(format!(
                "checkpoint kind `{}` does not match expected `{kind}`",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if self
            .arrays
            .values()
            .any(|a| a.data.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidInput(
                "refusing to write checkpoint with non-finite values".into(),
            ));
        }
        let json = serde_json::to_string_pretty(self).expect("serializable container");
        crate::trace_io::write_file(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let mut c = ParamContainer::new("test-model");
        c.insert(
            "layer.w",
            ParamArray::matrix(2, 3, vec![0.1, -0.2, 1.0 / 3.0, 5e-324, 1e300, -0.0]).unwrap(),
        );
        c.insert("layer.b", ParamArray::vector(vec![0.25, -0.75]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        c.save(&path).unwrap();
        let back = ParamContainer::load(&path).unwrap();
        assert_eq!(c, back);
        back.expect_kind("test-model").unwrap();
        assert!(back.expect_kind("other").is_err());
        assert!(back.take("layer.w", &[2, 3]).is_ok());
        assert!(back.take("layer.w", &[3, 2]).is_err());
        assert!(back.take("missing", &[1]).is_err());
    }

    #[test]
    fn identical_content_is_byte_identical() {
        let mut c = ParamContainer::new("test-model");
        c.insert("b", ParamArray::vector(vec![1.0, 2.0]));
        c.insert("a", ParamArray::vector(vec![3.0]));
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("1.json"), dir.path().join("2.json"));
        c.save(&p1).unwrap();
        c.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn non_finite_values_are_refused() {
        let mut c = ParamContainer::new("test-model");
        c.insert("a", ParamArray::vector(vec![f64::NAN]));
        let dir = tempfile::tempdir().unwrap();
        assert!(c.save(&dir.path().join("bad.json")).is_err());
    }
}
