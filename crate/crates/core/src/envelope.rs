//! Analytic-signal construction and instantaneous-amplitude envelopes.
//!
//! A real oscillation only shows its amplitude at the extrema; the analytic
//! signal extends it to an instantaneous amplitude at every sample. It is
//! built here from a one-sided spectrum: forward DFT, keep the DC and Nyquist
//! bins, double the interior positive-frequency bins, zero the negative
//! half, inverse DFT. The magnitude of the complex result is the envelope.
//!
//! [`compute_envelopes`] wraps that into the form the spike detector needs:
//! a slow centerline (moving mean), upper and lower envelopes at
//! centerline ± instantaneous amplitude of the detrended signal, with an
//! optional scaled second difference applied first to flatten slow
//! interference patterns before the transform.

use std::cell::RefCell;

use rustfft::FftPlanner;

pub use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

fn fft_inverse(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Discrete analytic signal with a one-sided spectrum.
///
/// For even-length input the real part equals the input and the spectrum
/// vanishes on every strictly negative-frequency bin. Odd-length inputs are
/// zero-padded by one sample for the transform and truncated afterwards;
/// `padded_len` is always even.
#[derive(Debug, Clone)]
pub struct AnalyticSignal {
    padded: Vec<Complex64>,
    source_len: usize,
}

impl AnalyticSignal {
    /// Complex values truncated to the original input length.
    pub fn values(&self) -> &[Complex64] {
        &self.padded[..self.source_len]
    }

    /// Full even-length values including the padding sample, if any.
    pub fn padded_values(&self) -> &[Complex64] {
        &self.padded
    }

    pub fn padded_len(&self) -> usize {
        self.padded.len()
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    /// Instantaneous amplitude `|z[n]|`, one value per input sample.
    pub fn magnitude(&self) -> Vec<f64> {
        self.values().iter().map(|z| z.norm()).collect()
    }
}

/// Upper/lower envelopes around a slow centerline.
///
/// `upper[n] >= centerline[n] >= lower[n]` holds for every sample. No claim
/// is made about the raw signal staying inside the band; the spike detector
/// clamps crossings instead.
#[derive(Debug, Clone)]
pub struct EnvelopePair {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub centerline: Vec<f64>,
}

impl EnvelopePair {
    pub fn len(&self) -> usize {
        self.centerline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centerline.is_empty()
    }
}

/// Parameters for [`compute_envelopes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeConfig {
    /// Moving-mean window in samples. Must be odd and no longer than the
    /// signal. 601 samples puts the centerline well below spike timescales.
    pub window: usize,
    /// Apply the scaled second difference to the detrended signal before the
    /// analytic transform.
    pub second_difference: bool,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            window: 601,
            second_difference: true,
        }
    }
}

impl EnvelopeConfig {
    /// Same configuration with a different moving-mean window.
    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }
}

/// Scaled second difference `(x[n+1] - 2x[n] + x[n-1]) / 4`.
///
/// Interior samples use the exact formula; the two endpoints replicate the
/// nearest interior value so the output has the same length as the input.
pub fn second_difference(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 3 {
        return Err(Error::Size(format!(
            "second difference needs at least 3 samples, got {n}"
        )));
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (x[i + 1] - 2.0 * x[i] + x[i - 1]) / 4.0;
    }
    out[0] = out[1];
    out[n - 1] = out[n - 2];
    Ok(out)
}

/// Build the one-sided-spectrum analytic signal of a real input.
///
/// Forward DFT, then keep bin 0 and bin N/2, double bins 1..N/2-1, zero bins
/// N/2+1..N-1, then inverse DFT. Odd lengths are zero-padded by one sample
/// and truncated after inversion.
pub fn analytic_signal(x: &[f64]) -> Result<AnalyticSignal> {
    let source_len = x.len();
    if source_len < 2 {
        return Err(Error::Size(format!(
            "analytic signal needs at least 2 samples, got {source_len}"
        )));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::Size(format!("non-finite input sample {bad}")));
    }

    let n = if source_len.is_multiple_of(2) {
        source_len
    } else {
        source_len + 1
    };
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));

    fft_forward(&mut buf);
    let half = n / 2;
    for v in buf.iter_mut().take(half).skip(1) {
        *v *= 2.0;
    }
    for v in buf.iter_mut().skip(half + 1) {
        *v = Complex64::new(0.0, 0.0);
    }
    fft_inverse(&mut buf);

    Ok(AnalyticSignal {
        padded: buf,
        source_len,
    })
}

/// Centered moving mean. Samples closer than half a window to an edge
/// replicate the nearest full-window value, the same endpoint rule the
/// second difference uses; a truncated mean there would leak a large edge
/// artifact into the analytic transform.
///
/// The global mean is removed before the prefix sums and added back, which
/// keeps the running totals near zero and the result accurate even on long
/// recordings.
pub fn moving_mean(x: &[f64], window: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "moving-mean window must be odd and positive, got {window}"
        )));
    }
    if window > n {
        return Err(Error::Size(format!(
            "moving-mean window {window} longer than signal of {n} samples"
        )));
    }

    let mu = x.iter().sum::<f64>() / n as f64;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    let mut comp = 0.0;
    for &v in x {
        // Neumaier-compensated running sum of the centered samples.
        let term = v - mu;
        let t = acc + term;
        if acc.abs() >= term.abs() {
            comp += (acc - t) + term;
        } else {
            comp += (term - t) + acc;
        }
        acc = t;
        prefix.push(acc + comp);
    }

    let half = window / 2;
    let count = window as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let center = i.clamp(half, n - 1 - half);
        let lo = center - half;
        out.push((prefix[lo + window] - prefix[lo]) / count + mu);
    }
    Ok(out)
}

/// Compute the centerline and the upper/lower envelopes of a signal.
///
/// The centerline is a moving mean over `config.window` samples. The
/// instantaneous amplitude is the magnitude of the analytic signal of the
/// detrended input (optionally second-differenced first), and the envelopes
/// are centerline ± amplitude.
pub fn compute_envelopes(x: &[f64], config: &EnvelopeConfig) -> Result<EnvelopePair> {
    let n = x.len();
    if n < 8 {
        return Err(Error::Size(format!(
            "envelope computation needs at least 8 samples, got {n}"
        )));
    }
    let centerline = moving_mean(x, config.window)?;
    let detrended: Vec<f64> = x
        .iter()
        .zip(centerline.iter())
        .map(|(v, c)| v - c)
        .collect();
    let core = if config.second_difference {
        second_difference(&detrended)?
    } else {
        detrended
    };
    let xi = analytic_signal(&core)?.magnitude();

    let upper: Vec<f64> = centerline.iter().zip(xi.iter()).map(|(c, a)| c + a).collect();
    let lower: Vec<f64> = centerline.iter().zip(xi.iter()).map(|(c, a)| c - a).collect();
    Ok(EnvelopePair {
        upper,
        lower,
        centerline,
    })
}
