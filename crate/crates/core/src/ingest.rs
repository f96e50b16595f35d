//! Parsing of data-logger CSV exports and grayscale images into validated
//! in-memory objects.
//!
//! The CSV contract: UTF-8, comma-separated, one header row; the first
//! column (or the one named in the schema) is time — either seconds or an
//! ISO timestamp, auto-detected — and every other column is one channel in
//! mV (a `(uV)`/`(V)` suffix in the header rescales). Timestamps may jitter
//! by up to ±10% of the sample period and are re-indexed to a uniform grid
//! by nearest neighbour; larger gaps are errors.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};

/// Acquisition range of the logger; values beyond it are flagged.
pub const VOLTAGE_RANGE_MV: f64 = 156.0;

/// Multi-channel voltage time series on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    channel_names: Vec<String>,
    sampling_rate_hz: f64,
    /// One inner vector per channel, all the same length, in mV.
    samples: Vec<Vec<f64>>,
    start_time_s: f64,
    trigger_time_s: Option<f64>,
}

impl Recording {
    pub fn new(
        channel_names: Vec<String>,
        sampling_rate_hz: f64,
        samples: Vec<Vec<f64>>,
        start_time_s: f64,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Size("a recording needs at least one channel".into()));
        }
        if channel_names.len() != samples.len() {
            return Err(Error::Size("one name per channel".into()));
        }
        let len = samples[0].len();
        if len == 0 {
            return Err(Error::Size("a recording needs at least one sample".into()));
        }
        if samples.iter().any(|ch| ch.len() != len) {
            return Err(Error::Size("all channels must have equal sample counts".into()));
        }
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::Config(format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("recording contains non-finite samples".into()));
        }
        Ok(Self {
            channel_names,
            sampling_rate_hz,
            samples,
            start_time_s,
            trigger_time_s: None,
        })
    }

    /// Attach the trigger timestamp (seconds from the recording start).
    pub fn with_trigger(mut self, trigger_time_s: f64) -> Result<Self> {
        if !trigger_time_s.is_finite() || trigger_time_s < 0.0 || trigger_time_s > self.duration_s()
        {
            return Err(Error::Config(format!(
                "trigger at {trigger_time_s} s outside recording of {} s",
                self.duration_s()
            )));
        }
        self.trigger_time_s = Some(trigger_time_s);
        Ok(self)
    }

    pub fn channel_count(&self) -> usize {
        self.samples.len()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn sample_count(&self) -> usize {
        self.samples[0].len()
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.sample_count() as f64 / self.sampling_rate_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn trigger_time_s(&self) -> Option<f64> {
        self.trigger_time_s
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.samples[index]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.samples
    }
}

/// Which CSV columns to read and how.
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    /// Name of the time column; default is the first column.
    pub time_column: Option<String>,
    /// Channel columns in order; default is every non-time column.
    pub channel_columns: Option<Vec<String>>,
    /// Fixed sampling rate; default is inferred from the median timestamp
    /// step.
    pub sampling_rate_hz: Option<f64>,
}

/// A non-fatal issue noticed during ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestWarning {
    pub line: u64,
    pub message: String,
}

fn parse_time(field: &str, line: u64) -> Result<f64> {
    if let Ok(v) = field.trim().parse::<f64>() {
        if !v.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite time value {field:?}"),
            });
        }
        return Ok(v);
    }
    let t = field.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(t) {
        return Ok(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(t, fmt) {
            return Ok(dt.and_utc().timestamp() as f64
                + f64::from(dt.and_utc().timestamp_subsec_nanos()) * 1e-9);
        }
    }
    Err(Error::Parse {
        line,
        message: format!("cannot parse time value {field:?}"),
    })
}

/// Per-channel scale factor to mV from a `(unit)` suffix in the header.
fn unit_scale(header: &str) -> f64 {
    let lower = header.to_ascii_lowercase();
    if lower.contains("(uv)") || lower.contains("(µv)") {
        1e-3
    } else if lower.contains("(v)") {
        1e3
    } else {
        1.0
    }
}

/// Load a logger CSV export into a [`Recording`].
///
/// Returns the recording and any warnings (out-of-range voltages, timestamp
/// jitter beyond 10% of the period). Hard failures: malformed cells, columns
/// missing from the schema, non-monotone timestamps, gaps above 1.5 sample
/// periods.
pub fn load_recording(path: &Path, schema: &CsvSchema) -> Result<(Recording, Vec<IngestWarning>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header row: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 2 {
        return Err(Error::Schema(format!(
            "need a time column and at least one channel, found {} columns",
            headers.len()
        )));
    }

    let time_idx = match &schema.time_column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("time column {name:?} not found")))?,
        None => 0,
    };
    let channel_idx: Vec<usize> = match &schema.channel_columns {
        Some(names) => names
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Schema(format!("channel column {name:?} not found")))
            })
            .collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&i| i != time_idx).collect(),
    };
    if channel_idx.is_empty() {
        return Err(Error::Schema("schema selects no channel columns".into()));
    }
    let scales: Vec<f64> = channel_idx.iter().map(|&i| unit_scale(&headers[i])).collect();
    let channel_names: Vec<String> = channel_idx
        .iter()
        .map(|&i| {
            headers[i]
                .split('(')
                .next()
                .unwrap_or(&headers[i])
                .trim()
                .to_string()
        })
        .collect();

    let mut warnings = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(csv::Position::line)
                .unwrap_or_default();
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record
            .position()
            .map(csv::Position::line)
            .unwrap_or_default();
        let get = |idx: usize| -> Result<&str> {
            record.get(idx).ok_or(Error::Parse {
                line,
                message: format!("row has {} fields, expected {}", record.len(), headers.len()),
            })
        };
        let t = parse_time(get(time_idx)?, line)?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::Ordering {
                    line,
                    message: format!("time {t} does not increase past {prev}"),
                });
            }
        }
        let mut row = Vec::with_capacity(channel_idx.len());
        for (&ci, &scale) in channel_idx.iter().zip(scales.iter()) {
            let field = get(ci)?;
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse sample value {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite sample value {field:?}"),
                });
            }
            let mv = v * scale;
            if mv.abs() > VOLTAGE_RANGE_MV {
                warnings.push(IngestWarning {
                    line,
                    message: format!("sample {mv} mV outside the ±{VOLTAGE_RANGE_MV} mV range"),
                });
            }
            row.push(mv);
        }
        times.push(t);
        rows.push(row);
    }
    if times.is_empty() {
        return Err(Error::Size("no data rows".into()));
    }

    let fs = match schema.sampling_rate_hz {
        Some(fs) => fs,
        None => {
            if times.len() < 2 {
                1.0
            } else {
                // lower-middle median: with few rows this leans toward the
                // shorter period, so oversized steps surface as gap errors
                let mut deltas: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
                deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
                1.0 / deltas[(deltas.len() - 1) / 2]
            }
        }
    };
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::Config(format!("invalid sampling rate {fs}")));
    }
    let period = 1.0 / fs;

    // gap check (line numbers: header is line 1, data starts at line 2)
    for (i, w) in times.windows(2).enumerate() {
        let dt = w[1] - w[0];
        if dt > 1.5 * period {
            return Err(Error::Gap {
                line: i as u64 + 3,
                message: format!("gap of {dt} s exceeds 1.5 sample periods ({} s)", 1.5 * period),
            });
        }
    }

    // re-index onto the uniform grid by nearest neighbour
    let t0 = times[0];
    let grid_len = ((times[times.len() - 1] - t0) * fs).round() as usize + 1;
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(grid_len); channel_idx.len()];
    let mut cursor = 0usize;
    for k in 0..grid_len {
        let target = t0 + k as f64 * period;
        while cursor + 1 < times.len()
            && (times[cursor + 1] - target).abs() <= (times[cursor] - target).abs()
        {
            cursor += 1;
        }
        let jitter = (times[cursor] - target).abs();
        if jitter > 0.1 * period {
            warnings.push(IngestWarning {
                line: cursor as u64 + 2,
                message: format!(
                    "timestamp deviates {jitter} s from the uniform grid (> 10% of the period)"
                ),
            });
        }
        for (ch, row) in samples.iter_mut().zip(rows[cursor].iter()) {
            ch.push(*row);
        }
    }

    let rec = Recording::new(channel_names, fs, samples, t0)?;
    Ok((rec, warnings))
}

/// Write a recording as canonical CSV: time with three decimals, samples
/// with six. Loading the output and writing it again is byte-identical.
pub fn write_recording(rec: &Recording, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("time_s");
    for name in rec.channel_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let period = 1.0 / rec.sampling_rate_hz();
    for i in 0..rec.sample_count() {
        let t = rec.start_time_s() + i as f64 * period;
        let _ = write!(out, "{t:.3}");
        for ch in rec.channels() {
            let _ = write!(out, ",{:.6}", ch[i]);
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::Size(format!(
                "image must be at least 2x2, got {rows}x{cols}"
            )));
        }
        if pixels.len() != rows * cols {
            return Err(Error::Size(format!(
                "{rows}x{cols} image needs {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        if pixels
            .iter()
            .any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0)
        {
            return Err(Error::Domain("pixels must be finite and in [0, 1]".into()));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixel(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.cols + c]
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }
}

/// Load an 8- or 16-bit grayscale PNG/PGM, rescaled linearly to [0, 1].
///
/// Colour inputs are rejected unless `convert_color` asks for a luma
/// conversion.
pub fn load_image(path: &Path, convert_color: bool) -> Result<GrayImage> {
    let dynimg = image::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    use image::DynamicImage;
    let (rows, cols, pixels) = match &dynimg {
        DynamicImage::ImageLuma8(img) => (
            img.height() as usize,
            img.width() as usize,
            img.pixels().map(|p| f64::from(p.0[0]) / 255.0).collect(),
        ),
        DynamicImage::ImageLuma16(img) => (
            img.height() as usize,
            img.width() as usize,
            img.pixels().map(|p| f64::from(p.0[0]) / 65535.0).collect(),
        ),
        _ if convert_color => {
            let img = dynimg.to_luma16();
            (
                img.height() as usize,
                img.width() as usize,
                img.pixels().map(|p| f64::from(p.0[0]) / 65535.0).collect(),
            )
        }
        _ => {
            return Err(Error::Format(format!(
                "{}: not grayscale; pass the grayscale-conversion flag to convert",
                path.display()
            )))
        }
    };
    GrayImage::new(rows, cols, pixels)
}

/// Write 8-bit grayscale data as binary PGM (P5). Deterministic bytes.
pub fn write_pgm(path: &Path, rows: usize, cols: usize, bytes: &[u8]) -> Result<()> {
    if bytes.len() != rows * cols {
        return Err(Error::Size(format!(
            "{rows}x{cols} raster needs {} bytes, got {}",
            rows * cols,
            bytes.len()
        )));
    }
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend_from_slice(bytes);
    std::fs::write(path, out)?;
    Ok(())
}
