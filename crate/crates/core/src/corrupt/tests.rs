use super::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn white(len: usize, rms_target: f64, rng: &mut ChaCha8Rng) -> Waveform {
    let x: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let r = rms(&x);
    Waveform::new(x.iter().map(|v| v * rms_target / r).collect(), 16_000).unwrap()
}

#[test]
fn zero_db_matches_speech_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = white(8000, 0.1, &mut rng);
    let n = babble(5000, 16_000, 6, &mut rng).unwrap();
    let m = mix_at_snr(&s, &n, 0.0).unwrap();
    let added: Vec<f64> = m.wave.samples.iter().zip(&s.samples).map(|(a, b)| a - b).collect();
    assert!(snr_db(&s.samples, &added).abs() < 0.1);
    assert_eq!(m.clip_scale, 1.0);
}

#[test]
fn huge_snr_leaves_speech() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = white(4000, 0.1, &mut rng);
    let n = white(4000, 0.5, &mut rng);
    let m = mix_at_snr(&s, &n, 200.0).unwrap();
    let dev = m.wave.samples.iter().zip(&s.samples).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(dev < 1e-8);
}

#[test]
fn independent_powers_add() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = white(160_000, 1.0, &mut rng);
    let n = white(160_000, 1.0, &mut rng);
    // keep the unit-RMS mixture in range by measuring before the clip guard
    let m = mix_at_snr(&s, &n, 10.0).unwrap();
    let power = (m.wave.rms() / m.clip_scale).powi(2);
    assert!((power - 1.1).abs() < 0.015, "power {power}");
}

#[test]
fn clip_guard_rescales_and_reports() {
    let s = Waveform::new(vec![0.9, -0.9, 0.9, -0.9], 16_000).unwrap();
    let n = Waveform::new(vec![1.0, -1.0, 1.0, -1.0], 16_000).unwrap();
    let m = mix_at_snr(&s, &n, 0.0).unwrap();
    assert!(m.clip_scale < 1.0);
    assert!(m.wave.samples.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    let added: Vec<f64> = m.wave.samples.iter().zip(&s.samples).map(|(a, b)| a - b * m.clip_scale).collect();
    let scaled: Vec<f64> = s.samples.iter().map(|v| v * m.clip_scale).collect();
    assert!(snr_db(&scaled, &added).abs() < 1e-9);
}

#[test]
fn silent_speech_rejected() {
    let s = Waveform::silence(100, 16_000);
    let n = Waveform::new(vec![0.1; 100], 16_000).unwrap();
    assert!(matches!(mix_at_snr(&s, &n, 10.0), Err(Error::DegenerateSnr)));
    let other_rate = Waveform::new(vec![0.1; 100], 8_000).unwrap();
    assert!(mix_at_snr(&n, &other_rate, 0.0).is_err());
}

#[test]
fn overlap_zero_duration_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = white(16_000, 0.1, &mut rng);
    let c = white(16_000, 0.3, &mut rng);
    let spec = OverlapSpec {
        position: OverlapPosition::Begin,
        duration: 0.0,
    };
    assert_eq!(splice_overlap(&u, &c, spec).unwrap().wave, u);
}

#[test]
fn overlap_is_local_and_equal_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = white(5 * 16_000, 0.1, &mut rng);
    let c = babble(3 * 16_000, 16_000, 6, &mut rng).unwrap();
    for position in [OverlapPosition::Begin, OverlapPosition::End] {
        let m = splice_overlap(&u, &c, OverlapSpec { position, duration: 2.0 }).unwrap();
        let w = 2 * 16_000;
        let (inside, outside) = match position {
            OverlapPosition::Begin => (0..w, w..u.len()),
            OverlapPosition::End => (u.len() - w..u.len(), 0..u.len() - w),
        };
        assert_eq!(m.wave.samples[outside.clone()], u.samples[outside]);
        let diff: Vec<f64> = inside.clone().map(|i| m.wave.samples[i] - u.samples[i]).collect();
        assert!(snr_db(&u.samples[inside], &diff).abs() < 0.1);
    }
}

#[test]
fn overlap_truncated_to_utterance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let u = white(8000, 0.1, &mut rng);
    let c = white(40_000, 0.2, &mut rng);
    let m = splice_overlap(&u, &c, OverlapSpec::default()).unwrap();
    let diff: Vec<f64> = m.wave.samples.iter().zip(&u.samples).map(|(a, b)| a - b).collect();
    assert!(snr_db(&u.samples, &diff).abs() < 0.1);
}

#[test]
fn multistyle_passthrough_and_degenerate_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u = white(400, 0.1, &mut rng);
    let pool = vec![white(300, 0.5, &mut rng), white(500, 0.2, &mut rng)];
    let off = MultistyleConfig {
        probability: 0.0,
        ..Default::default()
    };
    for _ in 0..50 {
        let (w, rec) = multistyle_augment(&u, &pool, &off, &mut rng).unwrap();
        assert_eq!(w, u);
        assert!(rec.is_none());
    }
    let always = MultistyleConfig {
        probability: 1.0,
        min_snr_db: 0.0,
        max_snr_db: 0.0,
    };
    for _ in 0..20 {
        let (w, rec) = multistyle_augment(&u, &pool, &always, &mut rng).unwrap();
        assert_eq!(rec.unwrap().snr_db, 0.0);
        let added: Vec<f64> = w.samples.iter().zip(&u.samples).map(|(a, b)| a - b).collect();
        assert!(snr_db(&u.samples, &added).abs() < 1e-9);
    }
    assert!(multistyle_augment(&u, &[], &always, &mut rng).is_err());
}

#[test]
fn multistyle_rate_and_uniform_levels() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let u = white(16, 0.1, &mut rng);
    let pool = vec![white(16, 0.5, &mut rng)];
    let cfg = MultistyleConfig::default();
    let mut snrs = Vec::new();
    for _ in 0..10_000 {
        if let (_, Some(rec)) = multistyle_augment(&u, &pool, &cfg, &mut rng).unwrap() {
            snrs.push(rec.snr_db);
        }
    }
    assert!((snrs.len() as i64 - 1000).abs() <= 90, "augmented {}", snrs.len());
    // Kolmogorov-Smirnov against U[0, 20] at alpha 0.01
    snrs.sort_by(f64::total_cmp);
    let n = snrs.len() as f64;
    let d = snrs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let f = s / 20.0;
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
}

#[test]
fn babble_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    assert!(babble(100, 16_000, 5, &mut rng).is_err());
    let b = babble(16_000, 16_000, 8, &mut rng).unwrap();
    assert!((b.rms() - 0.1).abs() < 1e-12);
    let again = babble(16_000, 16_000, 8, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let first = babble(16_000, 16_000, 8, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(again, first);
}

#[test]
fn vowel_has_energy_near_formant() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let f = [Formant {
        freq: 1000.0,
        bandwidth: 100.0,
    }];
    let x = harmonic_vowel(125.0, &f, 4000, 16_000, &mut rng);
    assert!((rms(&x) - 1.0).abs() < 1e-12);
    // correlate with the 8th harmonic against the 30th
    let power = |hz: f64| {
        let (mut c, mut s) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let ph = 2.0 * std::f64::consts::PI * hz * i as f64 / 16_000.0;
            c += v * ph.cos();
            s += v * ph.sin();
        }
        c * c + s * s
    };
    assert!(power(1000.0) > 20.0 * power(3750.0));
}
