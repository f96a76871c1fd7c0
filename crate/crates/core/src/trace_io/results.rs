//! The per-chunk results CSV written by simulation runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const RESULTS_HEADER: &str =
    "chunk,level_top,level_topmid,level_midlow,level_low,qoe1,qoe2,qoe3,qoe4,qoe,rebuffer_s,buffer_s,util_e";

/// One row of the results CSV: the levels chosen for the chunk's four
/// priority classes, its QoE breakdown, and its bitrate utilization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub chunk: usize,
    /// Ladder level indices chosen for Top, TopMid, MidLow, Low.
    pub levels: [usize; 4],
    pub qoe1: f64,
    pub qoe2: f64,
    pub qoe3: f64,
    pub qoe4: f64,
    pub qoe: f64,
    pub rebuffer_s: f64,
    pub buffer_s: f64,
    pub util_e: f64,
}

pub fn write_results_csv(path: &Path, rows: &[ResultsRow]) -> Result<()> {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.chunk,
            r.levels[0],
            r.levels[1],
            r.levels[2],
            r.levels[3],
            r.qoe1,
            r.qoe2,
            r.qoe3,
            r.qoe4,
            r.qoe,
            r.rebuffer_s,
            r.buffer_s,
            r.util_e
        ));
    }
    super::write_file(path, out.as_bytes())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultsRow>> {
    let text = super::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == RESULTS_HEADER => {}
        _ => return Err(Error::parse(path, 1, "unexpected results header")),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(Error::parse(path, line_no, "expected 13 fields"));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, format!("not a number: `{}`", fields[i])))
        };
        let int = |i: usize| -> Result<usize> {
            fields[i]
                .parse::<usize>()
                .map_err(|_| Error::parse(path, line_no, format!("not an index: `{}`", fields[i])))
        };
        rows.push(ResultsRow {
            chunk: int(0)?,
            levels: [int(1)?, int(2)?, int(3)?, int(4)?],
            qoe1: num(5)?,
            qoe2: num(6)?,
            qoe3: num(7)?,
            qoe4: num(8)?,
            qoe: num(9)?,
            rebuffer_s: num(10)?,
            buffer_s: num(11)?,
            util_e: num(12)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rows = vec![
            ResultsRow {
                chunk: 0,
                levels: [5, 2, 1, 0],
                qoe1: 0.46875,
                qoe2: 0.0,
                qoe3: 0.0125,
                qoe4: 0.0,
                qoe: 0.45625,
                rebuffer_s: 0.0,
                buffer_s: 1.0,
                util_e: 216.0 / 281.0,
            },
            ResultsRow {
                chunk: 1,
                levels: [3, 3, 0, 0],
                qoe1: 0.3,
                qoe2: 0.25,
                qoe3: 0.0,
                qoe4: 0.16875,
                qoe: -0.11875,
                rebuffer_s: 0.25,
                buffer_s: 0.75,
                util_e: 1.0,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        write_results_csv(&path, &rows).unwrap();
        assert_eq!(read_results_csv(&path).unwrap(), rows);
    }
}
