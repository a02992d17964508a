//! Babble mixing at a target SNR, equal-energy overlapping speech and the
//! multistyle training mixer.

mod babble;

pub use babble::{babble, harmonic_vowel, Formant, BABBLE_MIN_TALKERS};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{rms, Waveform};
use crate::error::{Error, Result};

/// A corrupted waveform plus the gains that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub wave: Waveform,
    /// Gain applied to the interfering signal.
    pub gain: f64,
    /// Scale applied to the whole mixture to keep it inside [-1, 1]; 1 when no
    /// rescaling was needed.
    pub clip_scale: f64,
}

fn check_rates(a: &Waveform, b: &Waveform) -> Result<()> {
    if a.sample_rate != b.sample_rate {
        return Err(Error::ConfigError(format!(
            "sample rates differ: {} vs {}",
            a.sample_rate, b.sample_rate
        )));
    }
    Ok(())
}

/// `noise` repeated or cropped to `len` samples.
fn tile(noise: &[f64], len: usize) -> Vec<f64> {
    noise.iter().copied().cycle().take(len).collect()
}

/// `10 log10(p_signal / p_noise)`.
pub fn snr_db(signal: &[f64], noise: &[f64]) -> f64 {
    20.0 * (rms(signal) / rms(noise)).log10()
}

/// Adds `noise` (tiled or cropped to the speech length) so that the speech to
/// added-noise power ratio over the whole utterance is `snr_db`.
pub fn mix_at_snr(speech: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Mixture> {
    check_rates(speech, noise)?;
    let s_rms = speech.rms();
    if s_rms == 0.0 {
        return Err(Error::DegenerateSnr);
    }
    let n = tile(&noise.samples, speech.len());
    let n_rms = rms(&n);
    if n_rms == 0.0 {
        return Err(Error::EmptyInput("noise signal is silent".into()));
    }
    let gain = s_rms / (n_rms * 10f64.powf(snr_db / 20.0));
    let mut out: Vec<f64> = speech.samples.iter().zip(&n).map(|(s, v)| s + gain * v).collect();
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let clip_scale = if peak > 1.0 { 1.0 / peak } else { 1.0 };
    if clip_scale != 1.0 {
        out.iter_mut().for_each(|v| *v *= clip_scale);
    }
    Ok(Mixture {
        wave: Waveform::new(out, speech.sample_rate)?,
        gain,
        clip_scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapPosition {
    Begin,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapSpec {
    pub position: OverlapPosition,
    /// Overlap length in seconds.
    pub duration: f64,
}

impl Default for OverlapSpec {
    fn default() -> Self {
        OverlapSpec {
            position: OverlapPosition::Begin,
            duration: 2.0,
        }
    }
}

/// Adds competing speech over the first or last `spec.duration` seconds, with
/// its gain chosen so both talkers have equal energy over that window. The
/// window is truncated to the utterance length; samples outside it are left
/// untouched.
pub fn splice_overlap(utt: &Waveform, competing: &Waveform, spec: OverlapSpec) -> Result<Mixture> {
    check_rates(utt, competing)?;
    if !(spec.duration >= 0.0) {
        return Err(Error::ConfigError(format!("overlap duration {} is negative", spec.duration)));
    }
    let len = ((spec.duration * utt.sample_rate as f64).round() as usize).min(utt.len());
    let mut out = utt.samples.clone();
    if len == 0 {
        return Ok(Mixture {
            wave: Waveform::new(out, utt.sample_rate)?,
            gain: 0.0,
            clip_scale: 1.0,
        });
    }
    let start = match spec.position {
        OverlapPosition::Begin => 0,
        OverlapPosition::End => utt.len() - len,
    };
    let comp = match spec.position {
        OverlapPosition::Begin => tile(&competing.samples, len),
        OverlapPosition::End => {
            let c = &competing.samples;
            if c.len() >= len {
                c[c.len() - len..].to_vec()
            } else {
                tile(c, len)
            }
        }
    };
    let c_rms = rms(&comp);
    if c_rms == 0.0 {
        return Err(Error::EmptyInput("competing speech is silent over the overlap".into()));
    }
    let gain = rms(&utt.samples[start..start + len]) / c_rms;
    for (o, c) in out[start..start + len].iter_mut().zip(&comp) {
        *o += gain * c;
    }
    Ok(Mixture {
        wave: Waveform::new(out, utt.sample_rate)?,
        gain,
        clip_scale: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultistyleConfig {
    pub probability: f64,
    pub min_snr_db: f64,
    pub max_snr_db: f64,
}

impl Default for MultistyleConfig {
    fn default() -> Self {
        MultistyleConfig {
            probability: 0.1,
            min_snr_db: 0.0,
            max_snr_db: 20.0,
        }
    }
}

impl MultistyleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) || self.min_snr_db > self.max_snr_db {
            return Err(Error::ConfigError(format!("invalid multistyle settings {self:?}")));
        }
        Ok(())
    }
}

/// Which pool entry was mixed in and at what level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentRecord {
    pub source: usize,
    pub snr_db: f64,
}

/// With probability `cfg.probability` mixes a random pool utterance over the
/// whole of `utt` at an SNR drawn uniformly from the configured range.
pub fn multistyle_augment<R: Rng + ?Sized>(
    utt: &Waveform,
    pool: &[Waveform],
    cfg: &MultistyleConfig,
    rng: &mut R,
) -> Result<(Waveform, Option<AugmentRecord>)> {
    if pool.is_empty() {
        return Err(Error::EmptyInput("multistyle pool is empty".into()));
    }
    if rng.gen::<f64>() >= cfg.probability {
        return Ok((utt.clone(), None));
    }
    let source = rng.gen_range(0..pool.len());
    let snr = if cfg.max_snr_db > cfg.min_snr_db {
        rng.gen_range(cfg.min_snr_db..cfg.max_snr_db)
    } else {
        cfg.min_snr_db
    };
    let mix = mix_at_snr(utt, &pool[source], snr)?;
    Ok((mix.wave, Some(AugmentRecord { source, snr_db: snr })))
}

#[cfg(test)]
mod tests;
