//! Bandwidth traces: CSV ingestion, proportional scaling, left-hold lookup,
//! and the looped-trace integrator the download simulator runs on.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSample {
    pub time_s: f64,
    pub throughput_mbps: f64,
}

/// A throughput-over-time log. Between samples the earlier sample's value
/// holds (piecewise constant); past the last sample the trace loops from
/// its start, so the last sample only marks the end of the loop period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthTrace {
    samples: Vec<BandwidthSample>,
}

pub const BANDWIDTH_HEADER: &str = "time_s,throughput_mbps";

impl BandwidthTrace {
    pub fn new(samples: Vec<BandwidthSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Validation(
                "bandwidth trace needs at least 2 samples".into(),
            ));
        }
        for (i, pair) in samples.windows(2).enumerate() {
            if !(pair[1].time_s > pair[0].time_s) {
                return Err(Error::Validation(format!(
                    "bandwidth trace time_s must be strictly increasing (sample {})",
                    i + 2
                )));
            }
        }
        if let Some(s) = samples
            .iter()
            .find(|s| !(s.throughput_mbps >= 0.0) || !s.throughput_mbps.is_finite())
        {
            return Err(Error::Validation(format!(
                "throughput must be finite and ≥ 0, got {}",
                s.throughput_mbps
            )));
        }
        Ok(BandwidthTrace { samples })
    }

    /// Convenience constructor for a constant-rate trace.
    pub fn constant(throughput_mbps: f64, duration_s: f64) -> Self {
        BandwidthTrace::new(vec![
            BandwidthSample {
                time_s: 0.0,
                throughput_mbps,
            },
            BandwidthSample {
                time_s: duration_s,
                throughput_mbps,
            },
        ])
        .unwrap()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = super::read_to_string(path)?;
        Self::parse(&text, path)
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == BANDWIDTH_HEADER => {}
            _ => {
                return Err(Error::parse(
                    path,
                    1,
                    format!("expected header `{BANDWIDTH_HEADER}`"),
                ))
            }
        }
        let mut samples = Vec::new();
        let mut prev_time: Option<f64> = None;
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let time_s = parse_f64(fields.next(), path, line_no, "time_s")?;
            let throughput_mbps = parse_f64(fields.next(), path, line_no, "throughput_mbps")?;
            if fields.next().is_some() {
                return Err(Error::parse(path, line_no, "expected exactly 2 fields"));
            }
            if let Some(prev) = prev_time {
                if !(time_s > prev) {
                    return Err(Error::Validation(format!(
                        "{}:{}: time_s must be strictly increasing",
                        path.display(),
                        line_no
                    )));
                }
            }
            if !(throughput_mbps >= 0.0) || !throughput_mbps.is_finite() {
                return Err(Error::Validation(format!(
                    "{}:{}: throughput must be finite and ≥ 0",
                    path.display(),
                    line_no
                )));
            }
            prev_time = Some(time_s);
            samples.push(BandwidthSample {
                time_s,
                throughput_mbps,
            });
        }
        BandwidthTrace::new(samples)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from(BANDWIDTH_HEADER);
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!("{},{}\n", s.time_s, s.throughput_mbps));
        }
        super::write_file(path, out.as_bytes())
    }

    pub fn samples(&self) -> &[BandwidthSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first_time_s(&self) -> f64 {
        self.samples[0].time_s
    }

    /// Loop period: last sample time minus first.
    pub fn span_s(&self) -> f64 {
        self.samples[self.samples.len() - 1].time_s - self.samples[0].time_s
    }

    /// Multiplies every throughput by `factor`, keeping times unchanged.
    pub fn scaled(&self, factor: f64) -> Result<BandwidthTrace> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidInput(format!(
                "scale factor must be positive and finite, got {factor}"
            )));
        }
        let samples = self
            .samples
            .iter()
            .map(|s| BandwidthSample {
                time_s: s.time_s,
                throughput_mbps: s.throughput_mbps * factor,
            })
            .collect();
        BandwidthTrace::new(samples)
    }

    /// Maps an absolute query time onto the loop: times past the last
    /// sample wrap back to the start, offset by whole loop periods.
    fn loop_time(&self, time_s: f64) -> f64 {
        let first = self.first_time_s();
        let span = self.span_s();
        let mut rel = (time_s - first) % span;
        if rel < 0.0 {
            // Guard against -0.0 or rounding just below a loop boundary.
            rel += span;
        }
        first + rel
    }

    /// Throughput at a time: the most recent sample at or before it holds.
    pub fn throughput_at(&self, time_s: f64) -> Result<f64> {
        if time_s < self.first_time_s() {
            return Err(Error::InvalidInput(format!(
                "query time {time_s} precedes trace start {}",
                self.first_time_s()
            )));
        }
        let t = self.loop_time(time_s);
        let idx = match self
            .samples
            .binary_search_by(|s| s.time_s.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1, // t ≥ first, so i ≥ 1
        };
        Ok(self.samples[idx].throughput_mbps)
    }

    /// Simulates downloading `bits` starting at `start_s` (absolute time,
    /// ≥ trace start) and returns the transfer duration in seconds,
    /// integrating the piecewise-constant rate over the looped trace.
    pub fn transfer_duration(&self, start_s: f64, bits: f64) -> Result<f64> {
        if bits <= 0.0 {
            return Ok(0.0);
        }
        if start_s < self.first_time_s() {
            return Err(Error::InvalidInput(format!(
                "download start {start_s} precedes trace start"
            )));
        }
        let span = self.span_s();
        let mut pos = self.loop_time(start_s);
        let mut remaining = bits;
        let mut duration = 0.0;
        let mut since_progress = 0.0;
        loop {
            let rate_bps = self.throughput_at(pos)? * 1e6;
            let seg_end = self.next_boundary(pos);
            let dt = seg_end - pos;
            if rate_bps > 0.0 && remaining <= rate_bps * dt {
                return Ok(duration + remaining / rate_bps);
            }
            duration += dt;
            if rate_bps > 0.0 {
                remaining -= rate_bps * dt;
                since_progress = 0.0;
            } else {
                since_progress += dt;
                if since_progress > span {
                    return Err(Error::Validation(
                        "bandwidth trace delivers no data over a full loop; download cannot finish"
                            .into(),
                    ));
                }
            }
            pos = if seg_end >= self.samples[self.samples.len() - 1].time_s {
                self.first_time_s()
            } else {
                seg_end
            };
        }
    }

    /// Next sample time strictly after `t` (within one loop period).
    fn next_boundary(&self, t: f64) -> f64 {
        let idx = self
            .samples
            .partition_point(|s| s.time_s <= t);
        if idx >= self.samples.len() {
            self.samples[self.samples.len() - 1].time_s
        } else {
            self.samples[idx].time_s
        }
    }

    pub fn mean_throughput_mbps(&self) -> f64 {
        self.samples.iter().map(|s| s.throughput_mbps).sum::<f64>() / self.samples.len() as f64
    }
}

fn parse_f64(field: Option<&str>, path: &Path, line: usize, name: &str) -> Result<f64> {
    let raw = field
        .ok_or_else(|| Error::parse(path, line, format!("missing field `{name}`")))?
        .trim();
    raw.parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("field `{name}`: not a number: `{raw}`")))
}

/// Time unit of the source log's timestamp column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    Seconds,
    Milliseconds,
}

impl TimeUnit {
    fn to_seconds(self, value: f64) -> f64 {
        match self {
            TimeUnit::Seconds => value,
            TimeUnit::Milliseconds => value / 1000.0,
        }
    }
}

/// Converts a cellular throughput log of `timestamp bytes` lines
/// (whitespace-separated, one measurement interval per line) into a
/// [`BandwidthTrace`] with one sample per input line. Sample i carries the
/// rate observed over the interval to sample i+1; the final sample repeats
/// the previous rate and only marks the end of the loop period. `scale`
/// multiplies every rate, e.g. 4.0 to extend a 3G log to 4G conditions.
pub fn convert_hsdpa_log(path: &Path, unit: TimeUnit, scale: f64) -> Result<BandwidthTrace> {
    if !(scale > 0.0) {
        return Err(Error::InvalidInput(format!(
            "scale factor must be positive, got {scale}"
        )));
    }
    let text = super::read_to_string(path)?;
    let mut rows: Vec<(f64, f64)> = Vec::new(); // (time_s, bytes)
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let ts = parse_ws_f64(fields.next(), path, line_no, "timestamp")?;
        let bytes = parse_ws_f64(fields.next(), path, line_no, "bytes")?;
        if bytes < 0.0 {
            return Err(Error::Validation(format!(
                "{}:{}: negative byte count",
                path.display(),
                line_no
            )));
        }
        rows.push((unit.to_seconds(ts), bytes));
    }
    if rows.len() < 2 {
        return Err(Error::Validation(format!(
            "{}: need at least 2 measurements",
            path.display()
        )));
    }
    let t0 = rows[0].0;
    let mut samples = Vec::with_capacity(rows.len());
    for i in 0..rows.len() {
        let time_s = rows[i].0 - t0;
        let rate = if i + 1 < rows.len() {
            let dt = rows[i + 1].0 - rows[i].0;
            if !(dt > 0.0) {
                return Err(Error::Validation(format!(
                    "{}: timestamps must be strictly increasing (row {})",
                    path.display(),
                    i + 2
                )));
            }
            rows[i + 1].1 * 8.0 / dt / 1e6
        } else {
            0.0 // placeholder, replaced below
        };
        samples.push(BandwidthSample {
            time_s,
            throughput_mbps: rate * scale,
        });
    }
    // Final sample repeats the previous rate.
    let n = samples.len();
    samples[n - 1].throughput_mbps = samples[n - 2].throughput_mbps;
    BandwidthTrace::new(samples)
}

fn parse_ws_f64(field: Option<&str>, path: &Path, line: usize, name: &str) -> Result<f64> {
    let raw = field
        .ok_or_else(|| Error::parse(path, line, format!("missing field `{name}`")))?;
    raw.parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("field `{name}`: not a number: `{raw}`")))
}
