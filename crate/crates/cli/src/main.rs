//! Command-line front end: spike detection, windowed metrics, CT image
//! analysis, synthetic-recording generation, and the full trial report.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mycosig::dct::{compare_regions, crop_roi, dct2, energy_bands, band_heatmap, BandConfig};
use mycosig::envelope::EnvelopeConfig;
use mycosig::ingest::{load_image, load_recording, write_pgm, write_recording, CsvSchema};
use mycosig::metrics::MetricsConfig;
use mycosig::report::{
    compute_chunk_rows, detect_recording_spikes, provenance, run_pipeline, write_metrics_csv,
    write_spike_csvs, PipelineConfig,
};
use mycosig::spike::{DetectorConfig, ThresholdMode};
use mycosig::synth::{parse_spec, synthesize};

#[derive(Parser)]
#[command(name = "mycosig", version, about = "Spike detection and complexity analysis for multi-channel electrophysiology recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Detector and metric knobs shared by the analysis subcommands. Every flag
/// overrides the same-named key of `--config`.
#[derive(Args, Debug, Clone)]
struct AnalysisFlags {
    /// Plain-text key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trigger time in seconds from the recording start.
    #[arg(long)]
    trigger_s: Option<f64>,
    /// Comma-separated window sizes in hours.
    #[arg(long, value_delimiter = ',')]
    chunks: Option<Vec<u32>>,
    /// Threshold multiplier z*.
    #[arg(long)]
    zstar: Option<f64>,
    /// Use gamma = mean + z*.sigma instead of the confidence-interval form.
    #[arg(long)]
    sigma_threshold: bool,
    /// Minimum distance between peaks, samples.
    #[arg(long)]
    min_dist: Option<usize>,
    /// Histogram bins for the signal and interval entropies.
    #[arg(long)]
    bins: Option<usize>,
    /// Shuffles for the normalized complexity.
    #[arg(long)]
    shuffles: Option<usize>,
    /// Seed for every randomized step.
    #[arg(long)]
    seed: Option<u64>,
    /// Centerline moving-mean window, samples (odd).
    #[arg(long)]
    window: Option<usize>,
    /// Skip the second-difference preprocessing.
    #[arg(long)]
    no_second_diff: bool,
    /// Onset/offset excursion fraction.
    #[arg(long)]
    onset_fraction: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect spike events and write per-channel spike CSVs.
    Spikes {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: AnalysisFlags,
    },
    /// Compute the windowed metric table (metrics.csv).
    Metrics {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: AnalysisFlags,
    },
    /// 2D-DCT energy-band analysis of grayscale images.
    Dct {
        /// Image to analyse (PNG or PGM).
        #[arg(long)]
        image: PathBuf,
        /// Optional second image to compare against.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Region of interest as row,col,height,width.
        #[arg(long, value_delimiter = ',')]
        roi: Option<Vec<usize>>,
        /// Region of interest of the comparison image.
        #[arg(long, value_delimiter = ',')]
        compare_roi: Option<Vec<usize>>,
        /// Convert colour inputs to grayscale instead of rejecting them.
        #[arg(long)]
        grayscale: bool,
        /// High-band rank quantile.
        #[arg(long, default_value_t = 0.90)]
        hi_q: f64,
        /// Low-band rank quantile.
        #[arg(long, default_value_t = 0.50)]
        lo_q: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic recording from a key=value description.
    Synth {
        /// Synthesis description file.
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the injected ground-truth events.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run the full pipeline and write every report artifact.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: AnalysisFlags,
    },
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => bail!("expected a boolean, got {v:?}"),
    }
}

/// Merge defaults, config file, and command-line flags (highest precedence
/// last) into the pipeline configuration.
fn build_config(flags: &AnalysisFlags) -> Result<PipelineConfig> {
    let mut file: HashMap<String, String> = HashMap::new();
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key=value", path.display(), lineno + 1))?;
            file.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let lookup = |key: &str| file.get(key).map(String::as_str);

    let mut cfg = PipelineConfig::default();
    let mut envelope = EnvelopeConfig::default();
    let mut detector = DetectorConfig::default();
    let mut metrics = MetricsConfig::default();

    if let Some(v) = lookup("trigger_s") {
        cfg.trigger_s = v.parse().context("config trigger_s")?;
    }
    if let Some(v) = lookup("chunks") {
        cfg.chunk_hours = v
            .split(',')
            .map(|s| s.trim().parse().context("config chunks"))
            .collect::<Result<_>>()?;
    }
    if let Some(v) = lookup("zstar") {
        detector.z_star = v.parse().context("config zstar")?;
    }
    if let Some(v) = lookup("sigma_threshold") {
        if parse_bool(v)? {
            detector.threshold_mode = ThresholdMode::StdDev;
        }
    }
    if let Some(v) = lookup("min_dist") {
        detector.min_distance = v.parse().context("config min_dist")?;
    }
    if let Some(v) = lookup("bins") {
        let bins: usize = v.parse().context("config bins")?;
        metrics.signal_bins = bins;
        metrics.isi_bins = bins;
    }
    if let Some(v) = lookup("shuffles") {
        metrics.shuffles = v.parse().context("config shuffles")?;
    }
    if let Some(v) = lookup("seed") {
        cfg.seed = v.parse().context("config seed")?;
    }
    if let Some(v) = lookup("window") {
        envelope.window = v.parse().context("config window")?;
    }
    if let Some(v) = lookup("second_difference") {
        envelope.second_difference = parse_bool(v)?;
    }
    if let Some(v) = lookup("onset_fraction") {
        detector.onset_fraction = v.parse().context("config onset_fraction")?;
    }

    // flags override the file
    if let Some(t) = flags.trigger_s {
        cfg.trigger_s = t;
    }
    if let Some(chunks) = &flags.chunks {
        cfg.chunk_hours = chunks.clone();
    }
    if let Some(z) = flags.zstar {
        detector.z_star = z;
    }
    if flags.sigma_threshold {
        detector.threshold_mode = ThresholdMode::StdDev;
    }
    if let Some(d) = flags.min_dist {
        detector.min_distance = d;
    }
    if let Some(b) = flags.bins {
        metrics.signal_bins = b;
        metrics.isi_bins = b;
    }
    if let Some(s) = flags.shuffles {
        metrics.shuffles = s;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(w) = flags.window {
        envelope.window = w;
    }
    if flags.no_second_diff {
        envelope.second_difference = false;
    }
    if let Some(f) = flags.onset_fraction {
        detector.onset_fraction = f;
    }

    detector.envelope = envelope;
    cfg.detector = detector;
    cfg.metrics = metrics;
    Ok(cfg)
}

fn load_input(path: &Path) -> Result<(mycosig::Recording, usize)> {
    let (rec, warnings) =
        load_recording(path, &CsvSchema::default()).with_context(|| format!("{}", path.display()))?;
    for w in &warnings {
        eprintln!("{}:{}: warning: {}", path.display(), w.line, w.message);
    }
    Ok((rec, warnings.len()))
}

fn parse_roi(roi: &[usize]) -> Result<(usize, usize, usize, usize)> {
    if roi.len() != 4 {
        bail!("--roi expects row,col,height,width");
    }
    Ok((roi[0], roi[1], roi[2], roi[3]))
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Spikes { input, out, flags } => {
            let cfg = build_config(&flags)?;
            let (rec, _) = load_input(&input)?;
            let spikes = detect_recording_spikes(&rec, &cfg, flags.trigger_s.is_some())?;
            std::fs::create_dir_all(&out)?;
            let prov = provenance(&rec, &cfg);
            write_spike_csvs(&spikes, rec.channel_count(), &prov, &out)?;
            let total: usize = spikes.iter().map(|s| s.events.len()).sum();
            println!(
                "{} events across {} channels -> {}",
                total,
                rec.channel_count(),
                out.display()
            );
        }
        Command::Metrics { input, out, flags } => {
            let cfg = build_config(&flags)?;
            let (rec, _) = load_input(&input)?;
            let rows = compute_chunk_rows(&rec, &cfg)?;
            std::fs::create_dir_all(&out)?;
            let prov = provenance(&rec, &cfg);
            let path = out.join("metrics.csv");
            write_metrics_csv(&rows, &prov, &path)?;
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Command::Dct {
            image,
            compare,
            roi,
            compare_roi,
            grayscale,
            hi_q,
            lo_q,
            out,
        } => {
            std::fs::create_dir_all(&out)?;
            let band_cfg = BandConfig {
                hi_q,
                lo_q,
                ..BandConfig::default()
            };
            let mut img_a =
                load_image(&image, grayscale).with_context(|| format!("{}", image.display()))?;
            if let Some(roi) = &roi {
                let (r, c, h, w) = parse_roi(roi)?;
                img_a = crop_roi(&img_a, r, c, h, w)?;
            }
            let spec_a = dct2(&img_a)?;
            let bands_a = energy_bands(&spec_a, &band_cfg)?;
            write_pgm(
                &out.join("bands_a.pgm"),
                spec_a.rows(),
                spec_a.cols(),
                &band_heatmap(&bands_a),
            )?;

            let mut doc = serde_json::json!({
                "band_config": band_cfg,
                "image_a": {
                    "path": image.display().to_string(),
                    "rows": spec_a.rows(),
                    "cols": spec_a.cols(),
                    "energy": spec_a.energy(),
                },
            });
            let mut csv = String::from(
                "band,count_a,mean_abs_a,energy_a,energy_share_a,count_b,mean_abs_b,energy_b,energy_share_b,count_ratio,mean_abs_ratio,energy_ratio,wasserstein\n",
            );
            if let Some(path_b) = compare {
                let mut img_b = load_image(&path_b, grayscale)
                    .with_context(|| format!("{}", path_b.display()))?;
                if let Some(roi) = &compare_roi {
                    let (r, c, h, w) = parse_roi(roi)?;
                    img_b = crop_roi(&img_b, r, c, h, w)?;
                }
                let spec_b = dct2(&img_b)?;
                let bands_b = energy_bands(&spec_b, &band_cfg)?;
                write_pgm(
                    &out.join("bands_b.pgm"),
                    spec_b.rows(),
                    spec_b.cols(),
                    &band_heatmap(&bands_b),
                )?;
                let cmp = compare_regions(&spec_a, &bands_a, &spec_b, &bands_b)?;
                for band in &cmp.bands {
                    csv.push_str(&format!(
                        "{:?},{},{:.9},{:.9},{:.9},{},{:.9},{:.9},{:.9},{:.6},{:.6},{:.6},{}\n",
                        band.band,
                        band.a.count,
                        band.a.mean_abs,
                        band.a.energy,
                        band.a.energy_share,
                        band.b.count,
                        band.b.mean_abs,
                        band.b.energy,
                        band.b.energy_share,
                        band.count_ratio,
                        band.mean_abs_ratio,
                        band.energy_ratio,
                        band.wasserstein
                            .map(|w| format!("{w:.6}"))
                            .unwrap_or_default(),
                    ));
                }
                doc["image_b"] = serde_json::json!({
                    "path": path_b.display().to_string(),
                    "rows": spec_b.rows(),
                    "cols": spec_b.cols(),
                    "energy": spec_b.energy(),
                });
                doc["comparison"] = serde_json::to_value(&cmp)?;
            } else {
                let cmp = compare_regions(&spec_a, &bands_a, &spec_a, &bands_a)?;
                for band in &cmp.bands {
                    csv.push_str(&format!(
                        "{:?},{},{:.9},{:.9},{:.9},,,,,,,,\n",
                        band.band, band.a.count, band.a.mean_abs, band.a.energy, band.a.energy_share,
                    ));
                }
            }
            std::fs::write(out.join("dct_report.csv"), csv)?;
            let path = out.join("dct_report.json");
            std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
            println!("-> {}", path.display());
        }
        Command::Synth { spec, out, truth } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let parsed = parse_spec(&text).with_context(|| format!("{}", spec.display()))?;
            let (rec, events) = synthesize(&parsed)?;
            write_recording(&rec, &out)?;
            if let Some(truth_path) = truth {
                let mut csv = String::from("channel,onset_s,peak_s,offset_s\n");
                for ch in &events {
                    for ev in ch {
                        csv.push_str(&format!(
                            "{},{:.3},{:.3},{:.3}\n",
                            ev.channel + 1,
                            ev.onset_s,
                            ev.peak_s,
                            ev.offset_s
                        ));
                    }
                }
                std::fs::write(&truth_path, csv)?;
            }
            let total: usize = events.iter().map(Vec::len).sum();
            println!(
                "{} channels, {} samples, {} events -> {}",
                rec.channel_count(),
                rec.sample_count(),
                total,
                out.display()
            );
        }
        Command::Report { input, out, flags } => {
            let cfg = build_config(&flags)?;
            let (rec, _) = load_input(&input)?;
            let report = run_pipeline(&rec, &cfg, &out)?;
            println!(
                "{} metric rows, {} spike lists, {} complexity segments -> {}",
                report.rows.len(),
                report.segment_spikes.len(),
                report.pcipk_segments.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
