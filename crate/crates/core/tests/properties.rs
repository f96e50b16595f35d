//! Property tests for the structural invariants of the pipeline.

use proptest::prelude::*;

use mycosig::dct::{dct2, idct2};
use mycosig::envelope::{analytic_signal, compute_envelopes, EnvelopeConfig};
use mycosig::ingest::{load_recording, write_recording, CsvSchema, GrayImage, Recording};
use mycosig::metrics::{
    lz76_complexity, pcipk_bits, renyi, shannon, simpson, tsallis, Distribution,
};
use mycosig::segment::{chunk_segment, split_at_trigger, CHUNK_HOURS};
use mycosig::spike::{clamp_to_envelope, find_spikes, peak_prominence, residual};

fn finite_signal(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, 8..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analytic_signal_is_one_sided_and_real(x in finite_signal(256)) {
        let a = analytic_signal(&x).unwrap();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for (z, &v) in a.values().iter().zip(x.iter()) {
            prop_assert!((z.re - v).abs() <= 1e-9 * norm);
        }
        // brute-force spectrum of the padded output
        let n = a.padded_len();
        for k in n / 2 + 1..n {
            let mut acc = (0.0, 0.0);
            for (j, z) in a.padded_values().iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                let (c, s) = (ang.cos(), ang.sin());
                acc.0 += z.re * c - z.im * s;
                acc.1 += z.re * s + z.im * c;
            }
            prop_assert!((acc.0 * acc.0 + acc.1 * acc.1).sqrt() <= 1e-9 * norm);
        }
    }

    #[test]
    fn envelopes_bracket_the_centerline(x in finite_signal(512), second_diff in any::<bool>()) {
        let window = if x.len() >= 65 { 65 } else { (x.len() / 2) * 2 - 1 };
        let cfg = EnvelopeConfig { window, second_difference: second_diff };
        let env = compute_envelopes(&x, &cfg).unwrap();
        for i in 0..x.len() {
            prop_assert!(env.upper[i] >= env.centerline[i]);
            prop_assert!(env.centerline[i] >= env.lower[i]);
        }
    }

    #[test]
    fn clamped_signal_stays_in_band_and_residual_is_nonnegative(x in finite_signal(512)) {
        let window = if x.len() >= 65 { 65 } else { (x.len() / 2) * 2 - 1 };
        let cfg = EnvelopeConfig { window, second_difference: true };
        let env = compute_envelopes(&x, &cfg).unwrap();
        let clamped = clamp_to_envelope(&x, &env).unwrap();
        let phi = residual(&x, &clamped).unwrap();
        for i in 0..x.len() {
            prop_assert!(clamped[i] >= env.lower[i] && clamped[i] <= env.upper[i]);
            prop_assert!(phi[i] >= 0.0);
            // the residual is exactly the excursion beyond the band
            let excess = (x[i] - env.upper[i]).max(env.lower[i] - x[i]).max(0.0);
            prop_assert!((phi[i] - excess).abs() <= 1e-12 * excess.abs().max(1.0));
        }
    }

    #[test]
    fn detected_peaks_pass_an_independent_prominence_check(
        x in finite_signal(512),
        gamma in 0.0..20.0f64,
        dist in 1usize..40,
    ) {
        let peaks = find_spikes(&x, gamma, dist).unwrap();
        for w in peaks.windows(2) {
            prop_assert!(w[1] - w[0] >= dist);
        }
        for &p in &peaks {
            prop_assert!(peak_prominence(&x, p) >= gamma);
        }
    }

    #[test]
    fn entropy_identities_and_permutation_invariance(
        raw in prop::collection::vec(1e-6..1.0f64, 2..64),
        rotate in 0usize..64,
    ) {
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let d = Distribution::from_probs(probs.clone()).unwrap();
        let g = simpson(&d);
        prop_assert!((renyi(&d, 2.0).unwrap() + g.log2()).abs() <= 1e-12);
        prop_assert!((tsallis(&d, 2.0, 1.0).unwrap() - (1.0 - g)).abs() <= 1e-12);
        prop_assert!(shannon(&d) >= 0.0);
        prop_assert!(shannon(&d) <= (probs.len() as f64).log2() + 1e-12);

        let mut perm = probs.clone();
        let mid = rotate % perm.len();
        perm.rotate_left(mid);
        let dp = Distribution::from_probs(perm).unwrap();
        prop_assert!((shannon(&dp) - shannon(&d)).abs() <= 1e-9);
        prop_assert!((simpson(&dp) - simpson(&d)).abs() <= 1e-12);
    }

    #[test]
    fn lz76_bounds_and_complement_invariance(bits in prop::collection::vec(0u8..2, 1..400)) {
        let c = lz76_complexity(&bits);
        prop_assert!(c >= 1 && c <= bits.len());
        let flipped: Vec<u8> = bits.iter().map(|&b| 1 - b).collect();
        prop_assert_eq!(lz76_complexity(&flipped), c);
    }

    #[test]
    fn pcipk_is_seed_reproducible(bits in prop::collection::vec(0u8..2, 16..512), seed in any::<u64>()) {
        let a = pcipk_bits(&bits, 4, seed).unwrap();
        let b = pcipk_bits(&bits, 4, seed).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!(a > 0.0);
    }

    #[test]
    fn chunks_partition_their_segment(
        hours in 1.0..40.0f64,
        trigger_frac in 0.0..1.0f64,
    ) {
        let n = (hours * 3600.0) as usize;
        let rec = Recording::new(
            vec!["Ch1".into()],
            1.0,
            vec![vec![0.0; n]],
            0.0,
        )
        .unwrap()
        .with_trigger((hours * trigger_frac * 3600.0).floor())
        .unwrap();
        let (pre, post) = split_at_trigger(&rec).unwrap();
        prop_assert_eq!(pre.sample_count() + post.sample_count(), n);
        for segment in [&pre, &post] {
            for m in CHUNK_HOURS {
                let chunks = chunk_segment(segment, m).unwrap();
                let mut covered = 0.0;
                for w in chunks.windows(2) {
                    prop_assert!(w[0].window_end_s <= w[1].window_start_s);
                }
                for c in &chunks {
                    prop_assert!(c.window_start_s >= segment.start_s - 1e-9);
                    prop_assert!(c.window_end_s <= segment.end_s() + 1e-9);
                    covered += c.window_end_s - c.window_start_s;
                    // kept windows reach at least three quarters of m
                    prop_assert!(
                        c.samples.len() as f64 >= 0.75 * m as f64 * 3600.0,
                        "{} samples in an m={m} window", c.samples.len()
                    );
                }
                prop_assert!(covered <= segment.duration_s() + 1e-9);
                // the window adjacent to the trigger is full when possible
                if segment.duration_s() >= m as f64 * 3600.0 {
                    let adjacent = match segment.side {
                        mycosig::segment::Side::Pre => chunks.last(),
                        mycosig::segment::Side::Post => chunks.first(),
                    }
                    .unwrap();
                    prop_assert_eq!(adjacent.samples.len(), m as usize * 3600);
                }
            }
        }
    }

    #[test]
    fn dct_preserves_energy_and_inverts(
        rows in 2usize..12,
        cols in 2usize..12,
        seed in any::<u32>(),
    ) {
        // deterministic pixels from the seed
        let mut state = seed as u64 * 2 + 1;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 40) as f64 / (1u64 << 24) as f64
        };
        let pixels: Vec<f64> = (0..rows * cols).map(|_| next()).collect();
        let img = GrayImage::new(rows, cols, pixels).unwrap();
        let spec = dct2(&img).unwrap();
        let energy: f64 = img.pixels().iter().map(|p| p * p).sum();
        prop_assert!((spec.energy() - energy).abs() <= 1e-9 * energy.max(1e-12));
        let back = idct2(&spec);
        for (a, b) in back.iter().zip(img.pixels().iter()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn recording_roundtrip_is_canonical(
        n in 3usize..40,
        channels in 1usize..4,
        seed in any::<u32>(),
    ) {
        let mut state = seed as u64 | 1;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 40) as f64 / (1u64 << 24) as f64 - 0.5) * 100.0
        };
        let samples: Vec<Vec<f64>> = (0..channels)
            .map(|_| (0..n).map(|_| next()).collect())
            .collect();
        let names = (1..=channels).map(|i| format!("Ch{i}")).collect();
        let rec = Recording::new(names, 1.0, samples, 0.0).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_recording(&rec, &p1).unwrap();
        let (loaded, _) = load_recording(&p1, &CsvSchema::default()).unwrap();
        write_recording(&loaded, &p2).unwrap();
        prop_assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }
}
