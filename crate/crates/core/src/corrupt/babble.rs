use std::f64::consts::PI;

use rand::Rng;

use crate::audio::{rms, Waveform};
use crate::error::{Error, Result};

pub const BABBLE_MIN_TALKERS: usize = 6;

/// Spectral peak of a vowel-like sound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Formant {
    pub freq: f64,
    pub bandwidth: f64,
}

/// Harmonic complex on fundamental `f0` (with a slight vibrato) whose
/// harmonic amplitudes follow Gaussian bumps at the formants. Unit RMS.
pub fn harmonic_vowel<R: Rng + ?Sized>(f0: f64, formants: &[Formant], len: usize, sample_rate: u32, rng: &mut R) -> Vec<f64> {
    let sr = sample_rate as f64;
    let top = (sr / 2.0 - 500.0).min(5000.0);
    let harmonics = (top / f0).floor().max(1.0) as usize;
    let amps: Vec<f64> = (1..=harmonics)
        .map(|k| {
            let f = k as f64 * f0;
            0.02 + formants
                .iter()
                .map(|fm| (-0.5 * ((f - fm.freq) / fm.bandwidth).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    let phases: Vec<f64> = (0..harmonics).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let vib_rate = rng.gen_range(4.0..6.0);
    let mut out = vec![0.0; len];
    let mut theta = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / sr;
        theta += 2.0 * PI * f0 * (1.0 + 0.02 * (2.0 * PI * vib_rate * t).sin()) / sr;
        *o = amps
            .iter()
            .zip(&phases)
            .enumerate()
            .map(|(k, (a, p))| a * ((k + 1) as f64 * theta + p).sin())
            .sum();
    }
    let r = rms(&out);
    if r > 0.0 {
        out.iter_mut().for_each(|v| *v /= r);
    }
    out
}

fn talker<R: Rng + ?Sized>(len: usize, sample_rate: u32, rng: &mut R) -> Vec<f64> {
    let sr = sample_rate as f64;
    let f0 = rng.gen_range(90.0..250.0);
    let mut out = vec![0.0; len];
    let mut pos = (rng.gen_range(0.0..0.2) * sr) as usize;
    while pos < len {
        let syl = ((rng.gen_range(0.1..0.3) * sr) as usize).min(len - pos);
        let formants = [
            Formant {
                freq: rng.gen_range(300.0..900.0),
                bandwidth: 120.0,
            },
            Formant {
                freq: rng.gen_range(900.0..2600.0),
                bandwidth: 200.0,
            },
        ];
        let seg = harmonic_vowel(f0 * rng.gen_range(0.9..1.1), &formants, syl, sample_rate, rng);
        for (i, s) in seg.iter().enumerate() {
            let env = (PI * i as f64 / syl as f64).sin();
            out[pos + i] += env * s;
        }
        pos += syl + (rng.gen_range(0.0..0.12) * sr) as usize;
    }
    out
}

/// Sum of `talkers` independent vowel-like talkers, scaled to RMS 0.1.
pub fn babble<R: Rng + ?Sized>(len: usize, sample_rate: u32, talkers: usize, rng: &mut R) -> Result<Waveform> {
    if talkers < BABBLE_MIN_TALKERS {
        return Err(Error::ConfigError(format!(
            "babble needs at least {BABBLE_MIN_TALKERS} talkers, got {talkers}"
        )));
    }
    let mut out = vec![0.0; len];
    for _ in 0..talkers {
        for (o, v) in out.iter_mut().zip(talker(len, sample_rate, rng)) {
            *o += v;
        }
    }
    let r = rms(&out);
    if r > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.1 / r);
    }
    Waveform::new(out, sample_rate)
}
