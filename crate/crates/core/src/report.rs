//! End-to-end trial analysis and deterministic report emission.
//!
//! [`run_pipeline`] validates the configuration, splits the recording at the
//! trigger, tiles both sides with every requested window size, runs the
//! spike detector and the metric suite per (channel, window), computes
//! per-segment shuffle-normalized complexities, and writes the whole report
//! under one directory: `metrics.csv`, per-channel `spikes_chN.csv`,
//! `pcipk_bands.json`, `multicurve.csv`/`.svg`, and `summary.json`. Every
//! file carries the same provenance line, and a rerun with the same inputs
//! is byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::Recording;
use crate::metrics::{compute_metrics_row, pcipk, MetricsConfig, MetricsRow, SpikeTrain};
use crate::plot::{render_multicurve_svg, Curve, Panel};
use crate::segment::{chunk_segment, split_at_trigger, Segment, Side};
use crate::spike::{detect_spikes, DetectorConfig, SpikeEvent};

/// Color band of a complexity value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PcipkBand {
    #[serde(rename = "light-blue")]
    LightBlue,
    #[serde(rename = "green")]
    Green,
    #[serde(rename = "orange")]
    Orange,
    #[serde(rename = "red")]
    Red,
}

/// Assign a complexity value to its color band. Boundaries belong to the
/// upper band.
pub fn classify_pcipk(v: f64) -> Result<PcipkBand> {
    if !v.is_finite() {
        return Err(Error::Classification(format!(
            "cannot classify non-finite value {v}"
        )));
    }
    Ok(if v < -0.5 {
        PcipkBand::LightBlue
    } else if v < 0.0 {
        PcipkBand::Green
    } else if v < 0.5 {
        PcipkBand::Orange
    } else {
        PcipkBand::Red
    })
}

/// Full-pipeline parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Trigger time, seconds from the recording start.
    pub trigger_s: f64,
    /// Window sizes to analyse, hours.
    pub chunk_hours: Vec<u32>,
    pub detector: DetectorConfig,
    pub metrics: MetricsConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            trigger_s: 0.0,
            chunk_hours: crate::segment::CHUNK_HOURS.to_vec(),
            detector: DetectorConfig::default(),
            metrics: MetricsConfig::default(),
            seed: 0,
        }
    }
}

/// Identifies what produced a report.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool_version: String,
    pub input_sha256: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    fn header_line(&self) -> String {
        format!(
            "# tool={} input_sha256={} config_sha256={} seed={}",
            self.tool_version, self.input_sha256, self.config_sha256, self.seed
        )
    }
}

/// Key of one metric row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowKey {
    pub m_hours: u32,
    pub side: Side,
    pub window_start_s: f64,
    pub window_end_s: f64,
    pub channel: usize,
}

/// Spike list of one channel over one full segment.
#[derive(Debug, Clone)]
pub struct SegmentSpikes {
    pub side: Side,
    pub channel: usize,
    pub gamma: f64,
    pub events: Vec<SpikeEvent>,
}

/// Complexity value with its band.
#[derive(Debug, Clone, Serialize)]
pub struct BandedValue {
    pub channel: Option<usize>,
    pub pcipk: f64,
    pub band: PcipkBand,
}

/// Per-segment complexity summary.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentPcipk {
    pub side: Side,
    pub multi_channel: BandedValue,
    pub channels: Vec<BandedValue>,
}

/// Everything one trial produces.
#[derive(Debug, Clone)]
pub struct TrialReport {
    pub provenance: Provenance,
    pub rows: Vec<(RowKey, MetricsRow)>,
    pub segment_spikes: Vec<SegmentSpikes>,
    pub pcipk_segments: Vec<SegmentPcipk>,
    /// (panel label, per-channel rows) triples backing the multicurve
    /// figure.
    pub multicurve: Vec<(String, Vec<(usize, MetricsRow)>)>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut acc = splitmix64(base);
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

fn recording_digest(rec: &Recording) -> String {
    let mut hasher = Sha256::new();
    hasher.update(rec.sampling_rate_hz().to_le_bytes());
    for name in rec.channel_names() {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
    }
    for ch in rec.channels() {
        for v in ch {
            hasher.update(v.to_le_bytes());
        }
    }
    hex_digest(hasher)
}

fn config_digest(config: &PipelineConfig) -> String {
    let mut hasher = Sha256::new();
    let canon = format!(
        "trigger_s={:?};chunk_hours={:?};window={};second_difference={};z_star={:?};mode={:?};min_distance={};onset_fraction={:?};signal_bins={};isi_bins={};q={:?};tsallis_k={:?};shuffles={};seed={}",
        config.trigger_s,
        config.chunk_hours,
        config.detector.envelope.window,
        config.detector.envelope.second_difference,
        config.detector.z_star,
        config.detector.threshold_mode,
        config.detector.min_distance,
        config.detector.onset_fraction,
        config.metrics.signal_bins,
        config.metrics.isi_bins,
        config.metrics.q,
        config.metrics.tsallis_k,
        config.metrics.shuffles,
        config.seed,
    );
    hasher.update(canon.as_bytes());
    hex_digest(hasher)
}

fn hex_digest(hasher: Sha256) -> String {
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(io),
        other => Error::Config(format!("{name}: {other}")),
    })
}

/// Metric columns in table order: (name, value). Absent values come through
/// as NaN.
pub fn metric_columns(row: &MetricsRow) -> [(&'static str, f64); 12] {
    [
        ("spike_count", row.spike_count as f64),
        ("mean_length_s", row.mean_length_s),
        ("mean_amplitude_mv", row.mean_amplitude_mv),
        ("h_signal", row.h_signal),
        ("h_spike", row.h_spike),
        ("simpson", row.simpson),
        ("space_filling", row.space_filling),
        ("expressiveness", row.expressiveness.unwrap_or(f64::NAN)),
        ("kolmogorov", row.kolmogorov),
        ("pcipk", row.pcipk),
        ("tsallis", row.tsallis),
        ("renyi", row.renyi),
    ]
}

fn analyse_chunks(
    segment: &Segment,
    config: &PipelineConfig,
) -> Result<Vec<(RowKey, MetricsRow)>> {
    let mut work = Vec::new();
    for &m in &config.chunk_hours {
        for chunk in chunk_segment(segment, m)? {
            work.push(chunk);
        }
    }
    work.par_iter()
        .map(|chunk| {
            let det = stage(
                &format!(
                    "detect {mh} h window at {ws} s, channel {ch}",
                    mh = chunk.m_hours,
                    ws = chunk.window_start_s,
                    ch = chunk.channel_index
                ),
                detect_spikes(&chunk.samples, segment.fs, &config.detector),
            )?;
            let seed = derive_seed(
                config.seed,
                &[
                    chunk.channel_index as u64,
                    chunk.m_hours as u64,
                    (chunk.window_start_s * segment.fs) as u64,
                    match chunk.side {
                        Side::Pre => 0,
                        Side::Post => 1,
                    },
                ],
            );
            // event times are chunk-local; lift to absolute seconds
            let mut events = det.events;
            for ev in &mut events {
                ev.peak_time_s += chunk.window_start_s;
            }
            let row = stage(
                "metrics",
                compute_metrics_row(
                    chunk.channel_index,
                    &chunk.samples,
                    &events,
                    chunk.window_start_s,
                    segment.fs,
                    &config.metrics,
                    seed,
                ),
            )?;
            Ok((
                RowKey {
                    m_hours: chunk.m_hours,
                    side: chunk.side,
                    window_start_s: chunk.window_start_s,
                    window_end_s: chunk.window_end_s,
                    channel: chunk.channel_index,
                },
                row,
            ))
        })
        .collect()
}

fn analyse_segment_spikes(
    segment: &Segment,
    config: &PipelineConfig,
) -> Result<Vec<SegmentSpikes>> {
    if segment.sample_count() < config.detector.envelope.window.max(8) {
        return Ok(Vec::new());
    }
    segment
        .channels
        .par_iter()
        .enumerate()
        .map(|(ch, samples)| {
            let det = stage(
                &format!("segment detection, channel {ch}"),
                detect_spikes(samples, segment.fs, &config.detector),
            )?;
            let mut events = det.events;
            for ev in &mut events {
                ev.peak_time_s += segment.start_s;
            }
            Ok(SegmentSpikes {
                side: segment.side,
                channel: ch,
                gamma: det.gamma,
                events,
            })
        })
        .collect()
}

fn segment_pcipk(
    segment: &Segment,
    spikes: &[SegmentSpikes],
    config: &PipelineConfig,
) -> Result<Option<SegmentPcipk>> {
    if spikes.is_empty() || segment.sample_count() == 0 {
        return Ok(None);
    }
    let len = segment.sample_count();
    let trains: Vec<SpikeTrain> = spikes
        .iter()
        .map(|s| SpikeTrain::from_events(&s.events, segment.start_s, len, segment.fs))
        .collect::<Result<_>>()?;

    let side_tag = match segment.side {
        Side::Pre => 0,
        Side::Post => 1,
    };
    let multi_seed = derive_seed(config.seed, &[side_tag, u64::MAX]);
    let multi = pcipk(&trains, config.metrics.shuffles, multi_seed)?;
    let mut channels = Vec::with_capacity(trains.len());
    for (ch, train) in trains.iter().enumerate() {
        let seed = derive_seed(config.seed, &[side_tag, ch as u64]);
        let v = pcipk(std::slice::from_ref(train), config.metrics.shuffles, seed)?;
        channels.push(BandedValue {
            channel: Some(ch),
            pcipk: v,
            band: classify_pcipk(v)?,
        });
    }
    Ok(Some(SegmentPcipk {
        side: segment.side,
        multi_channel: BandedValue {
            channel: None,
            pcipk: multi,
            band: classify_pcipk(multi)?,
        },
        channels,
    }))
}

/// Rows for one ad-hoc window (used for the trigger panel of the figure).
fn window_rows(
    rec: &Recording,
    start: usize,
    end: usize,
    window_start_s: f64,
    config: &PipelineConfig,
) -> Result<Vec<(usize, MetricsRow)>> {
    (0..rec.channel_count())
        .into_par_iter()
        .map(|ch| {
            let samples = &rec.channel(ch)[start..end];
            let det = stage(
                "trigger-window detection",
                detect_spikes(samples, rec.sampling_rate_hz(), &config.detector),
            )?;
            let mut events = det.events;
            for ev in &mut events {
                ev.peak_time_s += window_start_s;
            }
            let seed = derive_seed(config.seed, &[ch as u64, 2, start as u64]);
            let row = stage(
                "trigger-window metrics",
                compute_metrics_row(
                    ch,
                    samples,
                    &events,
                    window_start_s,
                    rec.sampling_rate_hz(),
                    &config.metrics,
                    seed,
                ),
            )?;
            Ok((ch, row))
        })
        .collect()
}

/// Provenance for a (recording, configuration) pair.
pub fn provenance(rec: &Recording, config: &PipelineConfig) -> Provenance {
    Provenance {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_sha256: recording_digest(rec),
        config_sha256: config_digest(config),
        seed: config.seed,
    }
}

/// Window the recording on both sides of the trigger and compute the metric
/// row of every (channel, window), sorted by (m, window start, channel).
pub fn compute_chunk_rows(
    rec: &Recording,
    config: &PipelineConfig,
) -> Result<Vec<(RowKey, MetricsRow)>> {
    if config.chunk_hours.is_empty() {
        return Err(Error::Config("no window sizes requested".into()));
    }
    let rec = rec.clone().with_trigger(config.trigger_s)?;
    let (pre, post) = split_at_trigger(&rec)?;
    let mut rows = analyse_chunks(&pre, config)?;
    rows.extend(analyse_chunks(&post, config)?);
    rows.sort_by(|(a, _), (b, _)| {
        a.m_hours
            .cmp(&b.m_hours)
            .then(a.window_start_s.partial_cmp(&b.window_start_s).unwrap())
            .then(a.channel.cmp(&b.channel))
    });
    Ok(rows)
}

/// Detect spikes per channel over the full pre/post segments (or over the
/// whole recording when no trigger is configured).
pub fn detect_recording_spikes(
    rec: &Recording,
    config: &PipelineConfig,
    use_trigger: bool,
) -> Result<Vec<SegmentSpikes>> {
    if use_trigger {
        let rec = rec.clone().with_trigger(config.trigger_s)?;
        let (pre, post) = split_at_trigger(&rec)?;
        let mut spikes = analyse_segment_spikes(&pre, config)?;
        spikes.extend(analyse_segment_spikes(&post, config)?);
        Ok(spikes)
    } else {
        let whole = Segment {
            side: Side::Post,
            start_s: 0.0,
            fs: rec.sampling_rate_hz(),
            channels: rec.channels().to_vec(),
        };
        analyse_segment_spikes(&whole, config)
    }
}

/// Run the whole analysis and write the report under `out_dir`.
///
/// Validates before any computation: the trigger must lie inside the
/// recording and at least one window size must be requested.
pub fn run_pipeline(rec: &Recording, config: &PipelineConfig, out_dir: &Path) -> Result<TrialReport> {
    if config.chunk_hours.is_empty() {
        return Err(Error::Config("no window sizes requested".into()));
    }
    let rec = rec.clone().with_trigger(config.trigger_s)?;
    let provenance = self::provenance(&rec, config);

    let (pre, post) = split_at_trigger(&rec)?;

    let mut rows = analyse_chunks(&pre, config)?;
    rows.extend(analyse_chunks(&post, config)?);
    rows.sort_by(|(a, _), (b, _)| {
        a.m_hours
            .cmp(&b.m_hours)
            .then(a.window_start_s.partial_cmp(&b.window_start_s).unwrap())
            .then(a.channel.cmp(&b.channel))
    });

    let mut segment_spikes = analyse_segment_spikes(&pre, config)?;
    segment_spikes.extend(analyse_segment_spikes(&post, config)?);

    let mut pcipk_segments = Vec::new();
    for (segment, side) in [(&pre, Side::Pre), (&post, Side::Post)] {
        let spikes: Vec<SegmentSpikes> = segment_spikes
            .iter()
            .filter(|s| s.side == side)
            .cloned()
            .collect();
        if let Some(p) = segment_pcipk(segment, &spikes, config)? {
            pcipk_segments.push(p);
        }
    }

    // multicurve panels: the largest pre window adjacent to the trigger, a
    // one-hour window centered on the trigger, and the first post hour
    let mut multicurve = Vec::new();
    {
        let anchor = rows
            .iter()
            .filter(|(k, _)| k.side == Side::Pre)
            .max_by(|(a, _), (b, _)| {
                a.window_end_s
                    .partial_cmp(&b.window_end_s)
                    .unwrap()
                    .then(a.m_hours.cmp(&b.m_hours))
            })
            .map(|(k, _)| (k.m_hours, k.window_start_s));
        if let Some((m, start)) = anchor {
            let panel: Vec<(usize, MetricsRow)> = rows
                .iter()
                .filter(|(k, _)| {
                    k.side == Side::Pre && k.m_hours == m && k.window_start_s == start
                })
                .map(|(k, r)| (k.channel, r.clone()))
                .collect();
            multicurve.push((format!("{m} h before trigger"), panel));
        }
    }
    {
        let fs = rec.sampling_rate_hz();
        let half = (1800.0 * fs) as usize;
        let cut = (config.trigger_s * fs).ceil() as usize;
        let start = cut.saturating_sub(half);
        let end = (cut + half).min(rec.sample_count());
        if end - start >= config.detector.envelope.window.max(8) {
            let panel = window_rows(&rec, start, end, start as f64 / fs, config)?;
            multicurve.push(("trigger event".to_string(), panel));
        }
    }
    {
        let panel: Vec<(usize, MetricsRow)> = rows
            .iter()
            .filter(|(k, _)| k.side == Side::Post && k.m_hours == config.chunk_hours[0])
            .filter(|(k, _)| {
                let first_start = rows
                    .iter()
                    .filter(|(kk, _)| kk.side == Side::Post && kk.m_hours == config.chunk_hours[0])
                    .map(|(kk, _)| kk.window_start_s)
                    .fold(f64::INFINITY, f64::min);
                k.window_start_s == first_start
            })
            .map(|(k, r)| (k.channel, r.clone()))
            .collect();
        if !panel.is_empty() {
            multicurve.push((
                format!("{} h after trigger", config.chunk_hours[0]),
                panel,
            ));
        }
    }

    let report = TrialReport {
        provenance,
        rows,
        segment_spikes,
        pcipk_segments,
        multicurve,
    };
    write_report(&report, &rec, out_dir)?;
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Write the metric table as CSV with the provenance header.
pub fn write_metrics_csv(
    rows: &[(RowKey, MetricsRow)],
    provenance: &Provenance,
    path: &Path,
) -> Result<()> {
    let mut csv = String::new();
    let _ = writeln!(csv, "{}", provenance.header_line());
    let _ = writeln!(
        csv,
        "m_hours,side,window_start_s,window_end_s,channel,spike_count,mean_length_s,mean_amplitude_mv,h_signal,h_spike,simpson,space_filling,expressiveness,kolmogorov,pcipk,tsallis,renyi"
    );
    for (key, row) in rows {
        let _ = writeln!(
            csv,
            "{},{},{:.3},{:.3},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.8},{},{:.6},{:.6},{:.8},{:.6}",
            key.m_hours,
            key.side,
            key.window_start_s,
            key.window_end_s,
            key.channel + 1,
            row.spike_count,
            row.mean_length_s,
            row.mean_amplitude_mv,
            row.h_signal,
            row.h_spike,
            row.simpson,
            row.space_filling,
            fmt_opt(row.expressiveness),
            row.kolmogorov,
            row.pcipk,
            row.tsallis,
            row.renyi,
        );
    }
    std::fs::write(path, csv)?;
    Ok(())
}

/// Write one `spikes_chN.csv` per channel.
pub fn write_spike_csvs(
    spikes: &[SegmentSpikes],
    channel_count: usize,
    provenance: &Provenance,
    out_dir: &Path,
) -> Result<()> {
    for ch in 0..channel_count {
        let mut out = String::new();
        let _ = writeln!(out, "{}", provenance.header_line());
        let _ = writeln!(
            out,
            "channel,peak_time_s,amplitude_mV,duration_s,depol_uVs,repol_uVs,refractory_s,truncated_flag"
        );
        for segment in spikes.iter().filter(|s| s.channel == ch) {
            for ev in &segment.events {
                let _ = writeln!(
                    out,
                    "{},{:.3},{:.6},{:.3},{:.6},{:.6},{},{}",
                    ch + 1,
                    ev.peak_time_s,
                    ev.amplitude_mv,
                    ev.duration_s,
                    ev.depol_rate_uv_per_s,
                    ev.repol_rate_uv_per_s,
                    fmt_opt(ev.refractory_s),
                    u8::from(ev.truncated),
                );
            }
        }
        std::fs::write(out_dir.join(format!("spikes_ch{}.csv", ch + 1)), out)?;
    }
    Ok(())
}

fn write_report(report: &TrialReport, rec: &Recording, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;

    write_metrics_csv(
        &report.rows,
        &report.provenance,
        &out_dir.join("metrics.csv"),
    )?;
    write_spike_csvs(
        &report.segment_spikes,
        rec.channel_count(),
        &report.provenance,
        out_dir,
    )?;

    // pcipk_bands.json
    #[derive(Serialize)]
    struct PcipkDoc<'a> {
        provenance: &'a Provenance,
        segments: &'a [SegmentPcipk],
    }
    let json = serde_json::to_string_pretty(&PcipkDoc {
        provenance: &report.provenance,
        segments: &report.pcipk_segments,
    })
    .map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(out_dir.join("pcipk_bands.json"), json + "\n")?;

    emit_multicurve(
        &report.multicurve,
        rec.channel_count(),
        &report.provenance,
        &out_dir.join("multicurve.svg"),
        &out_dir.join("multicurve.csv"),
    )?;

    // summary.json — everything tabular in one machine-readable file
    #[derive(Serialize)]
    struct SummaryRow<'a> {
        #[serde(flatten)]
        key: &'a RowKey,
        #[serde(flatten)]
        row: &'a MetricsRow,
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        provenance: &'a Provenance,
        rows: Vec<SummaryRow<'a>>,
    }
    let summary = Summary {
        provenance: &report.provenance,
        rows: report
            .rows
            .iter()
            .map(|(key, row)| SummaryRow { key, row })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(out_dir.join("summary.json"), json + "\n")?;

    Ok(())
}

/// Emit the multi-curve figure and its exact CSV mirror.
///
/// One panel per segment, one curve per metric, channels along the x axis.
/// Curves are normalized per metric across all panels so panels stay
/// comparable; the CSV carries both raw and normalized values.
pub fn emit_multicurve(
    groups: &[(String, Vec<(usize, MetricsRow)>)],
    channel_count: usize,
    provenance: &Provenance,
    svg_path: &Path,
    csv_path: &Path,
) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::Size("no segments to plot".into()));
    }
    let metric_names: Vec<&'static str> =
        metric_columns(&groups[0].1.first().map(|(_, r)| r.clone()).unwrap_or_else(|| {
            // an empty panel still needs the column set; synthesize a blank
            MetricsRow {
                channel: 0,
                spike_count: 0,
                mean_length_s: 0.0,
                mean_amplitude_mv: 0.0,
                h_signal: 0.0,
                h_spike: 0.0,
                simpson: 0.0,
                space_filling: 0.0,
                expressiveness: None,
                kolmogorov: 0.0,
                pcipk: 0.0,
                tsallis: 0.0,
                renyi: 0.0,
            }
        }))
        .iter()
        .map(|(n, _)| *n)
        .collect();

    // per-metric range across every panel and channel
    let mut ranges: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NEG_INFINITY); metric_names.len()];
    for (_, rows) in groups {
        for (_, row) in rows {
            for (mi, (_, v)) in metric_columns(row).iter().enumerate() {
                let v = if v.is_nan() { 0.0 } else { *v };
                ranges[mi].0 = ranges[mi].0.min(v);
                ranges[mi].1 = ranges[mi].1.max(v);
            }
        }
    }
    let normalize = |mi: usize, v: f64| -> f64 {
        let v = if v.is_nan() { 0.0 } else { v };
        let (lo, hi) = ranges[mi];
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.5
        }
    };

    let mut csv = String::new();
    let _ = writeln!(csv, "{}", provenance.header_line());
    let _ = writeln!(csv, "segment,channel,metric,value,normalized");
    let mut panels = Vec::with_capacity(groups.len());
    for (label, rows) in groups {
        let mut sorted = rows.clone();
        sorted.sort_by_key(|(ch, _)| *ch);
        let mut curves = Vec::with_capacity(metric_names.len());
        for (mi, name) in metric_names.iter().enumerate() {
            let mut points = Vec::with_capacity(sorted.len());
            for (ch, row) in &sorted {
                let raw = metric_columns(row)[mi].1;
                let y = normalize(mi, raw);
                points.push((*ch as f64, y));
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{:.6}",
                    label,
                    ch + 1,
                    name,
                    if raw.is_nan() {
                        String::new()
                    } else {
                        format!("{raw:.6}")
                    },
                    y
                );
            }
            curves.push(Curve {
                label: (*name).to_string(),
                points,
            });
        }
        panels.push(Panel {
            title: label.clone(),
            curves,
        });
    }

    let svg = render_multicurve_svg(&panels, channel_count, &provenance.header_line());
    std::fs::write(svg_path, svg)?;
    std::fs::write(csv_path, csv)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_boundaries_go_to_the_upper_band() {
        assert_eq!(classify_pcipk(-0.6).unwrap(), PcipkBand::LightBlue);
        assert_eq!(classify_pcipk(-0.5).unwrap(), PcipkBand::Green);
        assert_eq!(classify_pcipk(-0.1).unwrap(), PcipkBand::Green);
        assert_eq!(classify_pcipk(0.0).unwrap(), PcipkBand::Orange);
        assert_eq!(classify_pcipk(0.49).unwrap(), PcipkBand::Orange);
        assert_eq!(classify_pcipk(0.5).unwrap(), PcipkBand::Red);
        assert_eq!(classify_pcipk(0.7).unwrap(), PcipkBand::Red);
    }

    #[test]
    fn nan_is_a_classification_error() {
        assert!(matches!(
            classify_pcipk(f64::NAN),
            Err(Error::Classification(_))
        ));
        assert!(classify_pcipk(f64::INFINITY).is_err());
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(1, &[0, 16, 0, 0]);
        let b = derive_seed(1, &[0, 16, 0, 0]);
        let c = derive_seed(1, &[1, 16, 0, 0]);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn config_digest_tracks_every_field() {
        let base = PipelineConfig::default();
        let d0 = config_digest(&base);
        let mut changed = base.clone();
        changed.seed = 1;
        assert_ne!(d0, config_digest(&changed));
        let mut changed = base.clone();
        changed.detector.min_distance = 121;
        assert_ne!(d0, config_digest(&changed));
        let mut changed = base;
        changed.metrics.shuffles = 19;
        assert_ne!(d0, config_digest(&changed));
    }
}
