//! 2D discrete cosine transform of grayscale images and comparison of their
//! energy-band distributions.
//!
//! The transform is the orthonormal DCT-II, applied separably along rows and
//! columns, so Parseval holds exactly and the inverse is the transpose.
//! Coefficients are then split by magnitude rank into high/medium/low energy
//! bands whose histograms can be compared between image regions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::GrayImage;

/// 2D DCT coefficient grid of an R x C image.
#[derive(Debug, Clone)]
pub struct DctSpectrum {
    rows: usize,
    cols: usize,
    coeffs: Vec<f64>,
}

impl DctSpectrum {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major coefficients; index `p * cols + q`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficient(&self, p: usize, q: usize) -> f64 {
        self.coeffs[p * self.cols + q]
    }

    /// Total squared-coefficient energy.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

/// Orthonormal DCT-II basis matrix for size n, row-major `[p][r]`.
fn dct_basis(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    let norm0 = 1.0 / (n as f64).sqrt();
    let norm = (2.0 / n as f64).sqrt();
    for p in 0..n {
        let alpha = if p == 0 { norm0 } else { norm };
        for r in 0..n {
            let ang = std::f64::consts::PI * (2 * r + 1) as f64 * p as f64 / (2 * n) as f64;
            m[p * n + r] = alpha * ang.cos();
        }
    }
    m
}

/// Forward orthonormal 2D DCT-II.
pub fn dct2(img: &GrayImage) -> Result<DctSpectrum> {
    let (rows, cols) = (img.rows(), img.cols());
    if rows < 2 || cols < 2 {
        return Err(Error::Size(format!(
            "need at least a 2x2 image, got {rows}x{cols}"
        )));
    }
    let row_basis = dct_basis(rows);
    let col_basis = dct_basis(cols);

    // temp = I * Dc^T : transform each image row
    let mut temp = vec![0.0; rows * cols];
    for r in 0..rows {
        for q in 0..cols {
            let mut acc = 0.0;
            for c in 0..cols {
                acc += img.pixel(r, c) * col_basis[q * cols + c];
            }
            temp[r * cols + q] = acc;
        }
    }
    // out = Dr * temp : transform each column
    let mut coeffs = vec![0.0; rows * cols];
    for p in 0..rows {
        for q in 0..cols {
            let mut acc = 0.0;
            for r in 0..rows {
                acc += row_basis[p * rows + r] * temp[r * cols + q];
            }
            coeffs[p * cols + q] = acc;
        }
    }
    Ok(DctSpectrum { rows, cols, coeffs })
}

/// Inverse of [`dct2`]; returns raw reconstructed intensities (they may fall
/// slightly outside [0, 1] through rounding).
pub fn idct2(spectrum: &DctSpectrum) -> Vec<f64> {
    let (rows, cols) = (spectrum.rows, spectrum.cols);
    let row_basis = dct_basis(rows);
    let col_basis = dct_basis(cols);

    // temp = Dr^T * Y
    let mut temp = vec![0.0; rows * cols];
    for r in 0..rows {
        for q in 0..cols {
            let mut acc = 0.0;
            for p in 0..rows {
                acc += row_basis[p * rows + r] * spectrum.coeffs[p * cols + q];
            }
            temp[r * cols + q] = acc;
        }
    }
    // out = temp * Dc
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for q in 0..cols {
                acc += temp[r * cols + q] * col_basis[q * cols + c];
            }
            out[r * cols + c] = acc;
        }
    }
    out
}

/// Exact sub-image copy.
pub fn crop_roi(img: &GrayImage, row: usize, col: usize, height: usize, width: usize) -> Result<GrayImage> {
    if row + height > img.rows() || col + width > img.cols() {
        return Err(Error::Range(format!(
            "roi {row},{col} {height}x{width} exceeds image {}x{}",
            img.rows(),
            img.cols()
        )));
    }
    let mut pixels = Vec::with_capacity(height * width);
    for r in row..row + height {
        for c in col..col + width {
            pixels.push(img.pixel(r, c));
        }
    }
    GrayImage::new(height, width, pixels)
}

/// Energy band of a coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    High,
    Medium,
    Low,
}

/// Band-partition parameters: magnitude-rank quantiles and histogram size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandConfig {
    /// Coefficients above this rank quantile are the high band.
    pub hi_q: f64,
    /// Coefficients below this rank quantile are the low band.
    pub lo_q: f64,
    /// Log-spaced magnitude histogram bins per band.
    pub hist_bins: usize,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            hi_q: 0.90,
            lo_q: 0.50,
            hist_bins: 64,
        }
    }
}

/// Histogram of |coefficient| over log-spaced bins.
#[derive(Debug, Clone, Serialize)]
pub struct BandHistogram {
    /// Lower edge of the log range.
    pub min_edge: f64,
    /// Upper edge (the largest |coefficient| of the spectrum).
    pub max_edge: f64,
    pub counts: Vec<u64>,
}

/// Per-coefficient band labels plus per-band magnitude histograms.
#[derive(Debug, Clone)]
pub struct EnergyBands {
    pub config: BandConfig,
    /// Row-major, aligned with the spectrum's coefficients.
    pub labels: Vec<Band>,
    /// Indexed by [`Band::High`], [`Band::Medium`], [`Band::Low`].
    pub histograms: [BandHistogram; 3],
}

const HIST_FLOOR: f64 = 1e-8;

fn band_index(b: Band) -> usize {
    match b {
        Band::High => 0,
        Band::Medium => 1,
        Band::Low => 2,
    }
}

fn histogram_bin(value: f64, max_edge: f64, bins: usize) -> usize {
    if value <= HIST_FLOOR || max_edge <= HIST_FLOOR {
        return 0;
    }
    if value >= max_edge {
        return bins - 1;
    }
    let frac = (value / HIST_FLOOR).ln() / (max_edge / HIST_FLOOR).ln();
    ((frac * bins as f64) as usize).min(bins - 1)
}

/// Partition the coefficients into high/medium/low bands by magnitude rank.
///
/// With n coefficients, the highest `n - floor(hi_q * n)` go to the high
/// band and the lowest `floor(lo_q * n)` to the low band; the remainder is
/// medium. Ties in magnitude are broken by row-major position (the earlier
/// coefficient ranks higher).
pub fn energy_bands(spectrum: &DctSpectrum, config: &BandConfig) -> Result<EnergyBands> {
    if !(0.0 < config.lo_q && config.lo_q < config.hi_q && config.hi_q < 1.0) {
        return Err(Error::Config(format!(
            "need 0 < lo_q < hi_q < 1, got lo_q={} hi_q={}",
            config.lo_q, config.hi_q
        )));
    }
    if config.hist_bins < 1 {
        return Err(Error::Config("need at least one histogram bin".into()));
    }
    let n = spectrum.coeffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        spectrum.coeffs[b]
            .abs()
            .partial_cmp(&spectrum.coeffs[a].abs())
            .unwrap()
            .then(a.cmp(&b))
    });

    let n_high = n - (config.hi_q * n as f64).floor() as usize;
    let n_low = (config.lo_q * n as f64).floor() as usize;
    let mut labels = vec![Band::Medium; n];
    for (rank, &idx) in order.iter().enumerate() {
        labels[idx] = if rank < n_high {
            Band::High
        } else if rank >= n - n_low {
            Band::Low
        } else {
            Band::Medium
        };
    }

    let max_edge = spectrum
        .coeffs
        .iter()
        .map(|c| c.abs())
        .fold(0.0f64, f64::max);
    let mut histograms = [(); 3].map(|_| BandHistogram {
        min_edge: HIST_FLOOR,
        max_edge,
        counts: vec![0u64; config.hist_bins],
    });
    for (idx, &label) in labels.iter().enumerate() {
        let bin = histogram_bin(spectrum.coeffs[idx].abs(), max_edge, config.hist_bins);
        histograms[band_index(label)].counts[bin] += 1;
    }

    Ok(EnergyBands {
        config: *config,
        labels,
        histograms,
    })
}

/// Summary of one band within one region.
#[derive(Debug, Clone, Serialize)]
pub struct BandSummary {
    pub count: usize,
    pub mean_abs: f64,
    pub energy: f64,
    pub energy_share: f64,
}

/// Pairwise comparison of one band across two regions.
#[derive(Debug, Clone, Serialize)]
pub struct BandComparison {
    pub band: Band,
    pub a: BandSummary,
    pub b: BandSummary,
    pub count_ratio: f64,
    pub mean_abs_ratio: f64,
    pub energy_ratio: f64,
    /// Wasserstein-1 distance between the normalized band histograms, in
    /// units of histogram bins. Absent when exactly one side is empty.
    pub wasserstein: Option<f64>,
}

/// Region comparison report, one entry per band.
#[derive(Debug, Clone, Serialize)]
pub struct RegionComparison {
    pub bands: Vec<BandComparison>,
}

fn band_summary(spectrum: &DctSpectrum, bands: &EnergyBands, which: Band) -> BandSummary {
    let mut count = 0usize;
    let mut abs_sum = 0.0;
    let mut energy = 0.0;
    for (idx, &label) in bands.labels.iter().enumerate() {
        if label == which {
            let v = spectrum.coeffs[idx];
            count += 1;
            abs_sum += v.abs();
            energy += v * v;
        }
    }
    let total = spectrum.energy();
    BandSummary {
        count,
        mean_abs: if count > 0 { abs_sum / count as f64 } else { 0.0 },
        energy,
        energy_share: if total > 0.0 { energy / total } else { 0.0 },
    }
}

fn wasserstein1(a: &BandHistogram, b: &BandHistogram) -> Option<f64> {
    let ta: u64 = a.counts.iter().sum();
    let tb: u64 = b.counts.iter().sum();
    match (ta, tb) {
        (0, 0) => Some(0.0),
        (0, _) | (_, 0) => None,
        _ => {
            let mut ca = 0.0;
            let mut cb = 0.0;
            let mut dist = 0.0;
            for (&xa, &xb) in a.counts.iter().zip(b.counts.iter()) {
                ca += xa as f64 / ta as f64;
                cb += xb as f64 / tb as f64;
                dist += (ca - cb).abs();
            }
            Some(dist)
        }
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

/// Compare the band structure of two regions analysed with the same band
/// configuration.
pub fn compare_regions(
    spectrum_a: &DctSpectrum,
    bands_a: &EnergyBands,
    spectrum_b: &DctSpectrum,
    bands_b: &EnergyBands,
) -> Result<RegionComparison> {
    if bands_a.config != bands_b.config {
        return Err(Error::Config(
            "regions were analysed with different band configurations".into(),
        ));
    }
    let mut out = Vec::with_capacity(3);
    for band in [Band::High, Band::Medium, Band::Low] {
        let sa = band_summary(spectrum_a, bands_a, band);
        let sb = band_summary(spectrum_b, bands_b, band);
        let w = wasserstein1(
            &bands_a.histograms[band_index(band)],
            &bands_b.histograms[band_index(band)],
        );
        out.push(BandComparison {
            band,
            count_ratio: ratio(sa.count as f64, sb.count as f64),
            mean_abs_ratio: ratio(sa.mean_abs, sb.mean_abs),
            energy_ratio: ratio(sa.energy, sb.energy),
            wasserstein: w,
            a: sa,
            b: sb,
        });
    }
    Ok(RegionComparison { bands: out })
}

/// Grayscale rendering of the band labels (high 255, medium 128, low 0),
/// row-major, for raster export.
pub fn band_heatmap(bands: &EnergyBands) -> Vec<u8> {
    bands
        .labels
        .iter()
        .map(|b| match b {
            Band::High => 255u8,
            Band::Medium => 128,
            Band::Low => 0,
        })
        .collect()
}
