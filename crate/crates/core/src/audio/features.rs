use serde::{Deserialize, Serialize};

use super::{
    compute_stft, fixed_plan, log_mel, make_variable_hop_schedule, FramingMode, MelFilterbank, Waveform,
    DEFAULT_LOG_FLOOR, FFT_SIZE, WINDOW_LENGTH,
};
use crate::error::{Error, Result};

/// Frames kept after stacking: one in `DECIMATION`.
pub const DECIMATION: usize = 3;
/// Context frames stacked on each side.
pub const CONTEXT: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AudioFrontendConfig {
    pub num_filters: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub log_floor: f64,
}

impl Default for AudioFrontendConfig {
    fn default() -> Self {
        AudioFrontendConfig {
            num_filters: 80,
            low_hz: 125.0,
            high_hz: 7500.0,
            log_floor: DEFAULT_LOG_FLOOR,
        }
    }
}

impl AudioFrontendConfig {
    /// Width of one stacked output frame.
    pub fn feature_dim(&self) -> usize {
        (2 * CONTEXT + 1) * self.num_filters
    }

    pub fn filterbank(&self) -> Result<MelFilterbank> {
        MelFilterbank::new(self.num_filters, FFT_SIZE, super::SAMPLE_RATE, self.low_hz, self.high_hz)
    }
}

/// Unstacked log-mel frames with their center times.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMel {
    pub num_filters: usize,
    pub frames: Vec<f64>,
    pub timestamps: Vec<f64>,
}

impl LogMel {
    pub fn num_frames(&self) -> usize {
        self.timestamps.len()
    }
}

/// Stacked, decimated features ready for the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub dim: usize,
    /// `N × dim`, row-major.
    pub frames: Vec<f64>,
    pub timestamps: Vec<f64>,
    pub mode: FramingMode,
}

impl FeatureSequence {
    pub fn num_frames(&self) -> usize {
        self.timestamps.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.frames[i * self.dim..(i + 1) * self.dim]
    }
}

/// Stacks `CONTEXT` frames on each side (replicating the edge frames) and keeps
/// frames whose index is a multiple of `DECIMATION`.
pub fn stack_and_decimate(lm: &LogMel, mode: FramingMode) -> FeatureSequence {
    let n = lm.num_frames();
    let f = lm.num_filters;
    let dim = (2 * CONTEXT + 1) * f;
    let mut frames = Vec::with_capacity(n.div_ceil(DECIMATION) * dim);
    let mut timestamps = Vec::with_capacity(n.div_ceil(DECIMATION));
    for t in (0..n).step_by(DECIMATION) {
        for d in 0..=2 * CONTEXT {
            let src = (t + d).saturating_sub(CONTEXT).min(n - 1);
            frames.extend_from_slice(&lm.frames[src * f..(src + 1) * f]);
        }
        timestamps.push(lm.timestamps[t]);
    }
    FeatureSequence {
        dim,
        frames,
        timestamps,
        mode,
    }
}

/// Full pipeline from 16 kHz PCM to stacked features.
///
/// In variable mode the schedule covers `num_video_frames` frames; when that
/// is `None` it covers every whole video frame period in the waveform.
pub fn featurize(
    wave: &Waveform,
    mode: FramingMode,
    num_video_frames: Option<usize>,
    cfg: &AudioFrontendConfig,
) -> Result<FeatureSequence> {
    wave.require_16k()?;
    let plan = match mode {
        FramingMode::Fixed10msDecimate3 => fixed_plan(wave.len()),
        FramingMode::VariableThirdOfVideoFrame(fps) => {
            let n = num_video_frames.unwrap_or_else(|| fps.frames_in(wave.len(), wave.sample_rate));
            if n == 0 {
                return Err(Error::EmptyInput("waveform shorter than one video frame".into()));
            }
            make_variable_hop_schedule(fps, n, wave.sample_rate)?
        }
    };
    let spec = compute_stft(wave, &plan)?;
    let fb = cfg.filterbank()?;
    let frames = log_mel(&spec, &fb, cfg.log_floor)?;
    let half = WINDOW_LENGTH as f64 / 2.0;
    let timestamps = spec
        .offsets
        .iter()
        .map(|&o| (o as f64 + half) / wave.sample_rate as f64)
        .collect();
    let lm = LogMel {
        num_filters: cfg.num_filters,
        frames,
        timestamps,
    };
    Ok(stack_and_decimate(&lm, mode))
}
