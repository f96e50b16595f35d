//! Trigger-anchored segmentation of a recording into variable-size windows.
//!
//! The recording splits into a pre-trigger and a post-trigger segment; each
//! side is then tiled with contiguous m-hour windows anchored at the
//! trigger, so the window adjacent to the trigger always has full length. A
//! trailing partial window survives only if it covers at least three
//! quarters of m.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::Recording;

/// Window sizes used throughout the analysis, in hours.
pub const CHUNK_HOURS: [u32; 5] = [1, 2, 4, 8, 16];

/// Fraction of a full window a trailing partial window must reach to be
/// kept.
pub const PARTIAL_KEEP_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Pre,
    Post,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Pre => write!(f, "pre"),
            Side::Post => write!(f, "post"),
        }
    }
}

/// One side of the recording relative to the trigger.
#[derive(Debug, Clone)]
pub struct Segment {
    pub side: Side,
    /// Offset of the first sample, seconds from the recording start.
    pub start_s: f64,
    pub fs: f64,
    /// One inner vector per channel.
    pub channels: Vec<Vec<f64>>,
}

impl Segment {
    pub fn sample_count(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.sample_count() as f64 / self.fs
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_count() == 0
    }
}

/// One channel's samples over one window.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub channel_index: usize,
    pub window_start_s: f64,
    pub window_end_s: f64,
    pub side: Side,
    pub m_hours: u32,
    pub samples: Vec<f64>,
}

/// Split a recording into the activity before and at-or-after the trigger.
///
/// The pre segment covers [0, trigger), the post segment [trigger,
/// duration]; together they partition the samples.
pub fn split_at_trigger(rec: &Recording) -> Result<(Segment, Segment)> {
    let trigger = rec
        .trigger_time_s()
        .ok_or_else(|| Error::Config("recording has no trigger time".into()))?;
    let fs = rec.sampling_rate_hz();
    // sample i (at time i/fs) is pre iff i < trigger * fs
    let cut = ((trigger * fs).ceil() as usize).min(rec.sample_count());
    let pre = Segment {
        side: Side::Pre,
        start_s: 0.0,
        fs,
        channels: rec.channels().iter().map(|ch| ch[..cut].to_vec()).collect(),
    };
    let post = Segment {
        side: Side::Post,
        start_s: cut as f64 / fs,
        fs,
        channels: rec.channels().iter().map(|ch| ch[cut..].to_vec()).collect(),
    };
    Ok((pre, post))
}

/// Tile one segment with m-hour windows anchored at the trigger.
///
/// Pre-side windows extend backwards from the trigger, post-side windows
/// forwards; the window next to the trigger is always full (when the
/// segment allows). The trailing partial window is kept iff its length is
/// at least `PARTIAL_KEEP_FRACTION * m` hours. Chunks are returned ordered
/// by channel, then by window start. An empty segment yields no chunks.
pub fn chunk_segment(segment: &Segment, m_hours: u32) -> Result<Vec<Chunk>> {
    if !CHUNK_HOURS.contains(&m_hours) {
        return Err(Error::Config(format!(
            "window size must be one of {CHUNK_HOURS:?} hours, got {m_hours}"
        )));
    }
    let n = segment.sample_count();
    let mut chunks = Vec::new();
    if n == 0 {
        return Ok(chunks);
    }
    let window = (m_hours as f64 * 3600.0 * segment.fs).round() as usize;
    let keep_min = PARTIAL_KEEP_FRACTION * window as f64;

    // window boundaries in segment-local sample indices, anchored at the
    // trigger end of the segment
    let mut bounds: Vec<(usize, usize)> = Vec::new();
    match segment.side {
        Side::Pre => {
            // anchor at the segment end (the trigger)
            let mut end = n;
            while end >= window {
                bounds.push((end - window, end));
                end -= window;
            }
            if end > 0 && end as f64 >= keep_min {
                bounds.push((0, end));
            }
            bounds.reverse();
        }
        Side::Post => {
            let mut start = 0usize;
            while start + window <= n {
                bounds.push((start, start + window));
                start += window;
            }
            let rest = n - start;
            if rest > 0 && rest as f64 >= keep_min {
                bounds.push((start, n));
            }
        }
    }

    for (ch_idx, ch) in segment.channels.iter().enumerate() {
        for &(lo, hi) in &bounds {
            chunks.push(Chunk {
                channel_index: ch_idx,
                window_start_s: segment.start_s + lo as f64 / segment.fs,
                window_end_s: segment.start_s + hi as f64 / segment.fs,
                side: segment.side,
                m_hours,
                samples: ch[lo..hi].to_vec(),
            });
        }
    }
    Ok(chunks)
}
