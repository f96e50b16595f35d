//! Spike-event detection on the envelope residual.
//!
//! The input signal is clamped to the band between the lower and upper
//! envelopes; the absolute difference between the signal and that clamped
//! version is the residual. Local maxima of the residual with sufficient
//! topographic prominence, thinned by a minimum peak distance, are the spike
//! events. Each event is then delimited by the 10%-of-excursion crossings on
//! both sides of the peak and characterized by amplitude, duration,
//! depolarisation/repolarisation rates, and the refractory time to the next
//! event.

use crate::envelope::{compute_envelopes, EnvelopeConfig, EnvelopePair};
use crate::error::{Error, Result};

/// How the prominence floor is derived from the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// `mean + z* . sigma / sqrt(N)` — the 99% confidence bound on the mean.
    ConfidenceInterval,
    /// `mean + z* . sigma` — a stricter floor that ignores the sample count.
    StdDev,
}

/// Detector parameters. Defaults: 601-sample centerline window, second
/// difference on, z* = 2.576, confidence-interval threshold, 120-sample
/// minimum peak distance, 10% onset/offset crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub envelope: EnvelopeConfig,
    pub z_star: f64,
    pub threshold_mode: ThresholdMode,
    pub min_distance: usize,
    pub onset_fraction: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            envelope: EnvelopeConfig::default(),
            z_star: 2.576,
            threshold_mode: ThresholdMode::ConfidenceInterval,
            min_distance: 120,
            onset_fraction: 0.10,
        }
    }
}

/// One detected spike event.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeEvent {
    pub peak_index: usize,
    pub peak_time_s: f64,
    pub prominence: f64,
    /// Signed excursion of the raw signal above/below the centerline at the
    /// peak, in mV.
    pub amplitude_mv: f64,
    pub onset_index: usize,
    pub offset_index: usize,
    pub duration_s: f64,
    pub depol_rate_uv_per_s: f64,
    pub repol_rate_uv_per_s: f64,
    /// Time from this event's offset to the next event's onset. Absent for
    /// the last event of a chunk.
    pub refractory_s: Option<f64>,
    /// Set when the onset/offset search ran into the chunk boundary; rates
    /// are then computed on the available extent.
    pub truncated: bool,
}

/// Detection outcome for one chunk of one channel.
#[derive(Debug, Clone)]
pub struct SpikeDetection {
    pub events: Vec<SpikeEvent>,
    /// The prominence floor that was applied.
    pub gamma: f64,
}

/// Clamp a signal into the envelope band (the intermediate representation).
pub fn clamp_to_envelope(x: &[f64], env: &EnvelopePair) -> Result<Vec<f64>> {
    if x.len() != env.len() {
        return Err(Error::Size(format!(
            "signal has {} samples but envelopes have {}",
            x.len(),
            env.len()
        )));
    }
    Ok(x.iter()
        .zip(env.lower.iter().zip(env.upper.iter()))
        .map(|(&v, (&lo, &hi))| {
            if v <= lo {
                lo
            } else if v >= hi {
                hi
            } else {
                v
            }
        })
        .collect())
}

/// Absolute difference between the signal and its clamped representation.
pub fn residual(x: &[f64], clamped: &[f64]) -> Result<Vec<f64>> {
    if x.len() != clamped.len() {
        return Err(Error::Size(format!(
            "signal has {} samples but clamped form has {}",
            x.len(),
            clamped.len()
        )));
    }
    Ok(x.iter()
        .zip(clamped.iter())
        .map(|(a, b)| (a - b).abs())
        .collect())
}

fn mean_and_population_stddev(phi: &[f64]) -> (f64, f64) {
    let n = phi.len() as f64;
    let mean = phi.iter().sum::<f64>() / n;
    let var = phi.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Prominence floor `mean + z* . sigma / sqrt(N)` with the population
/// standard deviation.
pub fn prominence_threshold(phi: &[f64], z_star: f64) -> Result<f64> {
    if phi.is_empty() {
        return Err(Error::Size("empty residual".into()));
    }
    let (mean, sd) = mean_and_population_stddev(phi);
    Ok(mean + z_star * sd / (phi.len() as f64).sqrt())
}

/// Alternate prominence floor `mean + z* . sigma` without the 1/sqrt(N)
/// shrinkage.
pub fn prominence_threshold_sigma(phi: &[f64], z_star: f64) -> Result<f64> {
    if phi.is_empty() {
        return Err(Error::Size("empty residual".into()));
    }
    let (mean, sd) = mean_and_population_stddev(phi);
    Ok(mean + z_star * sd)
}

/// A local maximum candidate: plateaus are represented by their midpoint.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    index: usize,
    height: f64,
}

fn local_maxima(x: &[f64]) -> Vec<Candidate> {
    let n = x.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            // find the right edge of a possible plateau
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                out.push(Candidate {
                    index: (i + j) / 2,
                    height: x[i],
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Topographic prominence of a local maximum: its height above the higher of
/// the two flanking key saddles. The search on each side stops at the first
/// strictly higher sample or at the signal edge.
pub fn peak_prominence(x: &[f64], peak_index: usize) -> f64 {
    let h = x[peak_index];
    let mut left_min = h;
    for &v in x[..peak_index].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak_index + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Keep only the highest candidate within any `min_distance` neighbourhood.
/// Candidates are visited from highest to lowest (ties go to the earlier
/// index); a kept candidate suppresses everything closer than
/// `min_distance`.
fn select_by_distance(candidates: &[Candidate], min_distance: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .height
            .partial_cmp(&candidates[a].height)
            .unwrap()
            .then(candidates[a].index.cmp(&candidates[b].index))
    });
    let mut suppressed = vec![false; candidates.len()];
    let mut kept = Vec::new();
    for &ci in &order {
        if suppressed[ci] {
            continue;
        }
        kept.push(ci);
        let idx = candidates[ci].index;
        // candidates are index-sorted, walk outwards
        let mut j = ci;
        while j > 0 {
            j -= 1;
            if idx - candidates[j].index >= min_distance {
                break;
            }
            suppressed[j] = true;
        }
        let mut j = ci + 1;
        while j < candidates.len() {
            if candidates[j].index - idx >= min_distance {
                break;
            }
            suppressed[j] = true;
            j += 1;
        }
    }
    kept.sort_unstable();
    kept
}

fn find_peaks_impl(phi: &[f64], gamma: f64, min_distance: usize) -> Result<Vec<(usize, f64)>> {
    if min_distance == 0 {
        return Err(Error::Config("minimum peak distance must be >= 1".into()));
    }
    let candidates = local_maxima(phi);
    // Distance thinning runs before the prominence test so that raising
    // gamma can only shrink the detected set.
    let kept = select_by_distance(&candidates, min_distance);
    let mut out = Vec::new();
    for ci in kept {
        let idx = candidates[ci].index;
        let prom = peak_prominence(phi, idx);
        if prom >= gamma {
            out.push((idx, prom));
        }
    }
    Ok(out)
}

/// Locate spike peaks in the residual: local maxima thinned to the minimum
/// peak distance (keeping the higher peak, ties to the earlier index) and
/// filtered to topographic prominence >= `gamma`. Returned indices are
/// strictly increasing.
pub fn find_spikes(phi: &[f64], gamma: f64, min_distance: usize) -> Result<Vec<usize>> {
    Ok(find_peaks_impl(phi, gamma, min_distance)?
        .into_iter()
        .map(|(i, _)| i)
        .collect())
}

/// Delimit and characterize one detected peak.
///
/// Onset is the last sample before the peak where the excursion from the
/// centerline falls below `onset_fraction` of the peak excursion; offset is
/// the first such sample after it. Rates are in µV/s on the raw signal.
pub fn characterize_spike(
    x: &[f64],
    env: &EnvelopePair,
    fs: f64,
    peak_index: usize,
    prominence: f64,
    onset_fraction: f64,
    next_onset: Option<usize>,
) -> SpikeEvent {
    let excursion = x[peak_index] - env.centerline[peak_index];
    let threshold = onset_fraction * excursion.abs();

    let mut truncated = false;
    let mut onset = 0usize;
    let mut found = false;
    for j in (0..peak_index).rev() {
        if (x[j] - env.centerline[j]).abs() < threshold {
            onset = j;
            found = true;
            break;
        }
    }
    if !found {
        truncated = true;
    }

    let n = x.len();
    let mut offset = n - 1;
    found = false;
    for (j, (&v, &c)) in x
        .iter()
        .zip(env.centerline.iter())
        .enumerate()
        .skip(peak_index + 1)
    {
        if (v - c).abs() < threshold {
            offset = j;
            found = true;
            break;
        }
    }
    if !found {
        truncated = true;
    }

    let rise_s = (peak_index - onset) as f64 / fs;
    let fall_s = (offset - peak_index) as f64 / fs;
    SpikeEvent {
        peak_index,
        peak_time_s: peak_index as f64 / fs,
        prominence,
        amplitude_mv: excursion,
        onset_index: onset,
        offset_index: offset,
        duration_s: (offset - onset) as f64 / fs,
        depol_rate_uv_per_s: (x[peak_index] - x[onset]).abs() * 1000.0 / rise_s,
        repol_rate_uv_per_s: (x[peak_index] - x[offset]).abs() * 1000.0 / fall_s,
        refractory_s: next_onset.map(|no| (no as f64 - offset as f64) / fs),
        truncated,
    }
}

/// Run the whole per-chunk detection pipeline: envelopes, clamp, residual,
/// threshold, peak search, characterization.
pub fn detect_spikes(x: &[f64], fs: f64, config: &DetectorConfig) -> Result<SpikeDetection> {
    if fs <= 0.0 {
        return Err(Error::Config(format!("sampling rate must be positive, got {fs}")));
    }
    let env = compute_envelopes(x, &config.envelope)?;
    let clamped = clamp_to_envelope(x, &env)?;
    let phi = residual(x, &clamped)?;
    let gamma = match config.threshold_mode {
        ThresholdMode::ConfidenceInterval => prominence_threshold(&phi, config.z_star)?,
        ThresholdMode::StdDev => prominence_threshold_sigma(&phi, config.z_star)?,
    };
    let peaks = find_peaks_impl(&phi, gamma, config.min_distance)?;

    // Characterize right to left so each event can see the onset of its
    // successor for the refractory time.
    let mut events: Vec<SpikeEvent> = Vec::with_capacity(peaks.len());
    let mut next_onset: Option<usize> = None;
    for &(idx, prom) in peaks.iter().rev() {
        let ev = characterize_spike(x, &env, fs, idx, prom, config.onset_fraction, next_onset);
        next_onset = Some(ev.onset_index);
        events.push(ev);
    }
    events.reverse();
    Ok(SpikeDetection { events, gamma })
}
