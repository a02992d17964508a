//! Audio front end: framing plans, STFT, mel filterbank and stacked log-mel features.

mod features;
mod mel;
mod stft;
mod wav;

pub use features::{featurize, stack_and_decimate, AudioFrontendConfig, FeatureSequence, LogMel};
pub use mel::{hz_to_mel, log_mel, mel_to_hz, MelFilterbank, DEFAULT_LOG_FLOOR};
pub use stft::{
    compute_stft, fixed_plan, make_variable_hop_schedule, FramingMode, FramingPlan, Spectrogram,
    FFT_SIZE, FIXED_HOP, WINDOW_LENGTH,
};
pub use wav::{read_wav, write_wav};

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono PCM signal with amplitudes nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::UnsupportedSampleRate(0));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::EmptyInput("waveform contains non-finite samples".into()));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Waveform {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    pub(crate) fn require_16k(&self) -> Result<()> {
        if self.sample_rate != SAMPLE_RATE {
            return Err(Error::UnsupportedSampleRate(self.sample_rate));
        }
        Ok(())
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}
