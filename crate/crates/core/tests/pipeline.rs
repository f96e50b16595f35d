//! End-to-end pipeline tests on synthetic trials.

use std::collections::BTreeMap;
use std::path::Path;

use mycosig::envelope::EnvelopeConfig;
use mycosig::ingest::{load_recording, write_recording, CsvSchema};
use mycosig::metrics::MetricsConfig;
use mycosig::report::{emit_multicurve, provenance, run_pipeline, PipelineConfig};
use mycosig::spike::{detect_spikes, DetectorConfig};
use mycosig::synth::{synthesize, SpikeTemplate, SpikeTiming, SynthSpec};

/// Short two-sided trial: 3 h on each side of the trigger, clean spikes.
fn small_trial() -> (mycosig::Recording, Vec<Vec<mycosig::synth::GroundTruthEvent>>) {
    let spec = SynthSpec {
        channel_count: 2,
        duration_s: 6.0 * 3600.0,
        fs: 1.0,
        drift_amplitude_mv: 0.2,
        drift_period_s: 9000.0,
        noise_stddev_mv: 0.05,
        template: SpikeTemplate {
            rise_s: 100.0,
            fall_s: 125.0,
            amplitude_mv: 5.0,
        },
        timing: SpikeTiming::UniformCount { count: 12 },
        refractory_floor_s: 900.0,
        seed: 33,
    };
    synthesize(&spec).unwrap()
}

fn small_config() -> PipelineConfig {
    PipelineConfig {
        trigger_s: 3.0 * 3600.0,
        chunk_hours: vec![1, 2],
        detector: DetectorConfig {
            min_distance: 300,
            ..DetectorConfig::default()
        },
        metrics: MetricsConfig {
            shuffles: 5,
            ..MetricsConfig::default()
        },
        seed: 5,
    }
}

fn dir_snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(
            entry.file_name().to_string_lossy().into_owned(),
            std::fs::read(entry.path()).unwrap(),
        );
    }
    out
}

#[test]
fn report_spike_counts_match_ground_truth() {
    let (rec, truth) = small_trial();
    let out = tempfile::tempdir().unwrap();
    let report = run_pipeline(&rec, &small_config(), out.path()).unwrap();

    for (ch, truth_ch) in truth.iter().enumerate() {
        let mut detected: Vec<f64> = report
            .segment_spikes
            .iter()
            .filter(|s| s.channel == ch)
            .flat_map(|s| s.events.iter().map(|e| e.peak_time_s))
            .collect();
        detected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut matched = 0;
        for gt in truth_ch {
            if detected.iter().any(|&t| (t - gt.peak_s).abs() <= 100.0) {
                matched += 1;
            }
        }
        assert!(
            matched >= truth_ch.len() - 1,
            "channel {ch}: matched {matched} of {}",
            truth_ch.len()
        );
        // and not wildly more detections than injections
        assert!(detected.len() <= truth_ch.len() + 3);
    }
}

#[test]
fn report_outputs_are_complete_and_carry_provenance() {
    let (rec, _) = small_trial();
    let out = tempfile::tempdir().unwrap();
    let report = run_pipeline(&rec, &small_config(), out.path()).unwrap();

    for name in [
        "metrics.csv",
        "spikes_ch1.csv",
        "spikes_ch2.csv",
        "pcipk_bands.json",
        "multicurve.csv",
        "multicurve.svg",
        "summary.json",
    ] {
        let path = out.path().join(name);
        assert!(path.exists(), "{name} missing");
        let content = std::fs::read_to_string(&path).unwrap();
        assert!(
            content.contains(&report.provenance.config_sha256),
            "{name} lacks the config hash"
        );
    }

    // every metrics row traces to a window and channel of the input
    let metrics = std::fs::read_to_string(out.path().join("metrics.csv")).unwrap();
    let mut rows = 0;
    for line in metrics.lines().skip(2) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 17);
        let channel: usize = fields[4].parse().unwrap();
        assert!(channel >= 1 && channel <= rec.channel_count());
        let start: f64 = fields[2].parse().unwrap();
        let end: f64 = fields[3].parse().unwrap();
        assert!(start >= 0.0 && end <= rec.duration_s() + 1e-9 && end > start);
        rows += 1;
    }
    assert_eq!(rows, report.rows.len());
    // 3 h per side with m = 1, 2: (3 + 3) + (1 + 1) windows per channel
    assert_eq!(report.rows.len(), 2 * (6 + 2));
}

#[test]
fn rerun_is_byte_identical() {
    let (rec, _) = small_trial();
    let out1 = tempfile::tempdir().unwrap();
    let out2 = tempfile::tempdir().unwrap();
    run_pipeline(&rec, &small_config(), out1.path()).unwrap();
    run_pipeline(&rec, &small_config(), out2.path()).unwrap();
    let a = dir_snapshot(out1.path());
    let b = dir_snapshot(out2.path());
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        assert_eq!(bytes, &b[name], "{name} differs between reruns");
    }
}

#[test]
fn trigger_outside_recording_fails_before_any_output() {
    let (rec, _) = small_trial();
    let out = tempfile::tempdir().unwrap();
    let target = out.path().join("run");
    let cfg = PipelineConfig {
        trigger_s: rec.duration_s() + 10.0,
        ..small_config()
    };
    assert!(run_pipeline(&rec, &cfg, &target).is_err());
    assert!(!target.exists(), "output directory created despite the error");
}

#[test]
fn multicurve_csv_mirrors_the_figure() {
    let (rec, _) = small_trial();
    let out = tempfile::tempdir().unwrap();
    let report = run_pipeline(&rec, &small_config(), out.path()).unwrap();

    let csv = std::fs::read_to_string(out.path().join("multicurve.csv")).unwrap();
    let data_rows: Vec<&str> = csv.lines().skip(2).collect();
    let panels = report.multicurve.len();
    assert_eq!(data_rows.len(), panels * 12 * rec.channel_count());
    for line in &data_rows {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        let norm: f64 = fields[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&norm), "normalized value {norm}");
    }

    let svg = std::fs::read_to_string(out.path().join("multicurve.svg")).unwrap();
    let drawn = svg.matches("<polyline").count() + svg.matches("<circle").count();
    assert_eq!(drawn, panels * 12);
}

#[test]
fn multicurve_three_segments_times_twelve_curves() {
    // seven channels, three segments: the figure carries 12 curves per panel
    let spec = SynthSpec {
        channel_count: 7,
        duration_s: 3.0 * 3600.0,
        noise_stddev_mv: 0.05,
        drift_amplitude_mv: 0.1,
        template: SpikeTemplate {
            rise_s: 100.0,
            fall_s: 125.0,
            amplitude_mv: 5.0,
        },
        timing: SpikeTiming::UniformCount { count: 5 },
        refractory_floor_s: 500.0,
        seed: 9,
        ..SynthSpec::default()
    };
    let (rec, _) = synthesize(&spec).unwrap();
    let cfg = PipelineConfig {
        trigger_s: 1.5 * 3600.0,
        chunk_hours: vec![1],
        detector: DetectorConfig {
            min_distance: 300,
            ..DetectorConfig::default()
        },
        metrics: MetricsConfig {
            shuffles: 3,
            ..MetricsConfig::default()
        },
        seed: 1,
    };
    let out = tempfile::tempdir().unwrap();
    let report = run_pipeline(&rec, &cfg, out.path()).unwrap();
    assert_eq!(report.multicurve.len(), 3);
    for (_, rows) in &report.multicurve {
        assert_eq!(rows.len(), 7);
    }
    let svg = std::fs::read_to_string(out.path().join("multicurve.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 36);
}

#[test]
fn single_channel_trial_does_not_crash() {
    let spec = SynthSpec {
        channel_count: 1,
        duration_s: 2.0 * 3600.0,
        noise_stddev_mv: 0.05,
        template: SpikeTemplate {
            rise_s: 100.0,
            fall_s: 125.0,
            amplitude_mv: 5.0,
        },
        timing: SpikeTiming::UniformCount { count: 4 },
        refractory_floor_s: 600.0,
        seed: 2,
        ..SynthSpec::default()
    };
    let (rec, _) = synthesize(&spec).unwrap();
    let cfg = PipelineConfig {
        trigger_s: 3600.0,
        chunk_hours: vec![1],
        metrics: MetricsConfig {
            shuffles: 3,
            ..MetricsConfig::default()
        },
        ..small_config()
    };
    let out = tempfile::tempdir().unwrap();
    let report = run_pipeline(&rec, &cfg, out.path()).unwrap();
    // degenerate single-point curves render as markers
    let svg = std::fs::read_to_string(out.path().join("multicurve.svg")).unwrap();
    assert!(svg.contains("<circle"));
    assert!(!report.rows.is_empty());
}

#[test]
fn emit_multicurve_rejects_empty_groups() {
    let (rec, _) = small_trial();
    let prov = provenance(&rec, &small_config());
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_multicurve(
        &[],
        2,
        &prov,
        &dir.path().join("m.svg"),
        &dir.path().join("m.csv")
    )
    .is_err());
}

#[test]
fn synth_csv_roundtrips_through_ingest() {
    let (rec, _) = small_trial();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rec.csv");
    write_recording(&rec, &path).unwrap();
    let (loaded, warnings) = load_recording(&path, &CsvSchema::default()).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(loaded.channel_count(), rec.channel_count());
    assert_eq!(loaded.sample_count(), rec.sample_count());
    // written at 6 decimals; loading preserves that resolution
    for ch in 0..rec.channel_count() {
        for (a, b) in loaded.channel(ch).iter().zip(rec.channel(ch)) {
            assert!((a - b).abs() <= 5e-7);
        }
    }
}

#[test]
fn detector_recall_at_five_percent_noise_with_defaults() {
    // 50 spikes per channel over 16 h, noise at 5% of the spike amplitude,
    // default detector parameters: at least 95% of the injected events are
    // recovered (over 10 seeds)
    let mut found = 0usize;
    let mut injected = 0usize;
    for seed in 0..10 {
        let spec = SynthSpec {
            channel_count: 1,
            duration_s: 16.0 * 3600.0,
            fs: 1.0,
            drift_amplitude_mv: 0.3,
            drift_period_s: 20_000.0,
            noise_stddev_mv: 0.25,
            template: SpikeTemplate {
                rise_s: 100.0,
                fall_s: 125.0,
                amplitude_mv: 5.0,
            },
            timing: SpikeTiming::UniformCount { count: 50 },
            refractory_floor_s: 500.0,
            seed,
        };
        let (rec, truth) = synthesize(&spec).unwrap();
        let det = detect_spikes(rec.channel(0), 1.0, &DetectorConfig::default()).unwrap();
        injected += truth[0].len();
        for gt in &truth[0] {
            if det
                .events
                .iter()
                .any(|e| (e.peak_time_s - gt.peak_s).abs() <= 100.0)
            {
                found += 1;
            }
        }
    }
    let recall = found as f64 / injected as f64;
    assert!(recall >= 0.95, "recall {recall}");
}

#[test]
fn short_segments_are_skipped_not_fatal() {
    // trigger 10 minutes in: the pre segment is shorter than the default
    // envelope window, so it contributes no spike lists and no windows
    let (rec, _) = small_trial();
    let cfg = PipelineConfig {
        trigger_s: 600.0,
        ..small_config()
    };
    let out = tempfile::tempdir().unwrap();
    let report = run_pipeline(&rec, &cfg, out.path()).unwrap();
    assert!(report
        .segment_spikes
        .iter()
        .all(|s| s.side == mycosig::segment::Side::Post));
}

#[test]
fn custom_envelope_window_flows_through() {
    let (rec, _) = small_trial();
    let mut cfg = small_config();
    cfg.detector.envelope = EnvelopeConfig {
        window: 301,
        second_difference: false,
    };
    let out = tempfile::tempdir().unwrap();
    let report = run_pipeline(&rec, &cfg, out.path()).unwrap();
    assert!(!report.rows.is_empty());
}
