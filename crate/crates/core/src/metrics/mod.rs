//! Complexity metrics for signals and spike trains: Shannon/Tsallis/Rényi
//! entropies, Simpson's diversity, space-filling, expressiveness, LZ76
//! complexity, and its shuffle-normalized form.
//!
//! Spike activity over a window is interpreted as a binary sequence, one bit
//! per sample, with 1 marking a detected spike event; all logarithms are
//! base 2.

mod lz76;

pub use lz76::{lz76_complexity, lz76_normalized, pcipk_bits};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spike::SpikeEvent;

/// A discrete probability distribution with named outcomes.
#[derive(Debug, Clone)]
pub struct Distribution {
    probs: Vec<f64>,
    labels: Vec<String>,
}

impl Distribution {
    /// Build from probabilities; they must be non-negative, finite, and sum
    /// to 1 within 1e-12.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Size("empty distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain("probabilities must be finite and >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let labels = (0..probs.len()).map(|i| i.to_string()).collect();
        Ok(Self { probs, labels })
    }

    /// Normalize counts into a distribution.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(Error::Size("empty or all-zero counts".into()));
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        let labels = (0..counts.len()).map(|i| i.to_string()).collect();
        Ok(Self { probs, labels })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.probs.len() {
            return Err(Error::Size("one label per outcome".into()));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }
}

/// Shannon entropy in bits. Zero-probability outcomes contribute nothing.
pub fn shannon(d: &Distribution) -> f64 {
    -d.probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Tsallis entropy `k/(q-1) * (1 - sum p_i^q)`.
pub fn tsallis(d: &Distribution, q: f64, k: f64) -> Result<f64> {
    if q == 1.0 {
        return Err(Error::Domain("tsallis entropy is undefined at q = 1".into()));
    }
    let sum: f64 = d.probs.iter().filter(|&&p| p > 0.0).map(|&p| p.powf(q)).sum();
    Ok(k / (q - 1.0) * (1.0 - sum))
}

/// Rényi entropy `log2(sum p_i^q) / (1 - q)` in bits, for q >= 0, q != 1.
pub fn renyi(d: &Distribution, q: f64) -> Result<f64> {
    if q == 1.0 {
        return Err(Error::Domain("renyi entropy is undefined at q = 1".into()));
    }
    if q < 0.0 {
        return Err(Error::Domain(format!("renyi order must be >= 0, got {q}")));
    }
    let sum: f64 = d.probs.iter().filter(|&&p| p > 0.0).map(|&p| p.powf(q)).sum();
    Ok(sum.log2() / (1.0 - q))
}

/// Simpson's diversity `sum p_i^2`.
pub fn simpson(d: &Distribution) -> f64 {
    d.probs.iter().map(|&p| p * p).sum()
}

/// Binary spike-occupancy sequence for one channel over one window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    bits: Vec<u8>,
}

impl SpikeTrain {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Domain("spike train bits must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    /// Mark the peak sample of each event within a window of `len` samples
    /// starting at `window_start_s`.
    pub fn from_events(
        events: &[SpikeEvent],
        window_start_s: f64,
        len: usize,
        fs: f64,
    ) -> Result<Self> {
        let mut bits = vec![0u8; len];
        for ev in events {
            let idx = ((ev.peak_time_s - window_start_s) * fs).round() as i64;
            if idx < 0 || idx as usize >= len {
                return Err(Error::Range(format!(
                    "event at {} s falls outside the window",
                    ev.peak_time_s
                )));
            }
            bits[idx as usize] = 1;
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of marked samples.
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Distribution over the two symbols of the train.
    pub fn symbol_distribution(&self) -> Result<Distribution> {
        let ones = self.ones() as u64;
        let zeros = self.len() as u64 - ones;
        Distribution::from_counts(&[zeros, ones])
            .and_then(|d| d.with_labels(vec!["0".into(), "1".into()]))
    }
}

/// Fraction of samples carrying a spike.
pub fn space_filling(train: &SpikeTrain) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::Size("empty spike train".into()));
    }
    Ok(train.ones() as f64 / train.len() as f64)
}

/// Spike entropy per unit of occupancy (the economy of diversity). Undefined
/// when the train is empty of spikes.
pub fn expressiveness(h_spike: f64, delta: f64) -> Option<f64> {
    if delta > 0.0 {
        Some(h_spike / delta)
    } else {
        None
    }
}

/// Shuffle-normalized LZ76 complexity of the channel-major concatenation of
/// the given trains. Deterministic for a fixed seed.
pub fn pcipk(trains: &[SpikeTrain], shuffles: usize, seed: u64) -> Result<f64> {
    let mut bits = Vec::with_capacity(trains.iter().map(SpikeTrain::len).sum());
    for t in trains {
        bits.extend_from_slice(t.bits());
    }
    pcipk_bits(&bits, shuffles, seed)
}

/// Shannon entropy of an equal-width amplitude histogram of the signal.
/// A constant signal has zero entropy.
pub fn signal_entropy(x: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
    }
    if x.is_empty() {
        return Err(Error::Size("empty signal".into()));
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain("non-finite samples".into()));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &v in x {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(shannon(&Distribution::from_counts(&counts)?))
}

/// Extensive spike entropy: Shannon entropy of the inter-spike-interval
/// histogram multiplied by the event count, so the value grows with
/// activity. Fewer than two events give zero.
pub fn spike_entropy(events: &[SpikeEvent], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
    }
    if events.len() < 2 {
        return Ok(0.0);
    }
    let isis: Vec<f64> = events
        .windows(2)
        .map(|w| w[1].peak_time_s - w[0].peak_time_s)
        .collect();
    let lo = isis.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = isis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let h = if lo == hi {
        0.0
    } else {
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for &v in &isis {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        shannon(&Distribution::from_counts(&counts)?)
    };
    Ok(events.len() as f64 * h)
}

/// Parameters shared by the whole metric suite.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig {
    /// Bins of the signal-amplitude histogram.
    pub signal_bins: usize,
    /// Bins of the inter-spike-interval histogram.
    pub isi_bins: usize,
    /// Entropic index for the generalized entropies.
    pub q: f64,
    /// Tsallis constant k.
    pub tsallis_k: f64,
    /// Shuffles used for the normalized complexity.
    pub shuffles: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            signal_bins: 256,
            isi_bins: 256,
            q: 2.0,
            tsallis_k: 1.0,
            shuffles: 20,
        }
    }
}

/// One row of the per-window metric table.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub channel: usize,
    pub spike_count: usize,
    pub mean_length_s: f64,
    pub mean_amplitude_mv: f64,
    pub h_signal: f64,
    pub h_spike: f64,
    pub simpson: f64,
    pub space_filling: f64,
    pub expressiveness: Option<f64>,
    pub kolmogorov: f64,
    pub pcipk: f64,
    pub tsallis: f64,
    pub renyi: f64,
}

/// Compute the full metric row for one channel over one window.
///
/// Simpson, Tsallis, and Rényi are evaluated on the two-symbol distribution
/// of the spike train; the Kolmogorov column is the normalized LZ76
/// complexity of the train; pcipk is the shuffle-normalized complexity of
/// this single channel.
pub fn compute_metrics_row(
    channel: usize,
    samples: &[f64],
    events: &[SpikeEvent],
    window_start_s: f64,
    fs: f64,
    config: &MetricsConfig,
    seed: u64,
) -> Result<MetricsRow> {
    let train = SpikeTrain::from_events(events, window_start_s, samples.len(), fs)?;
    debug_assert_eq!(train.ones(), events.len());

    let delta = space_filling(&train)?;
    let h_spike = spike_entropy(events, config.isi_bins)?;
    let dist = train.symbol_distribution()?;

    let (mean_length_s, mean_amplitude_mv) = if events.is_empty() {
        (0.0, 0.0)
    } else {
        let n = events.len() as f64;
        (
            events.iter().map(|e| e.duration_s).sum::<f64>() / n,
            events.iter().map(|e| e.amplitude_mv).sum::<f64>() / n,
        )
    };

    Ok(MetricsRow {
        channel,
        spike_count: events.len(),
        mean_length_s,
        mean_amplitude_mv,
        h_signal: signal_entropy(samples, config.signal_bins)?,
        h_spike,
        simpson: simpson(&dist),
        space_filling: delta,
        expressiveness: expressiveness(h_spike, delta),
        kolmogorov: lz76_normalized(train.bits()),
        pcipk: pcipk_bits(train.bits(), config.shuffles, seed)?,
        tsallis: tsallis(&dist, config.q, config.tsallis_k)?,
        renyi: renyi(&dist, config.q)?,
    })
}
