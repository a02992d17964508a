use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::rational::FrameRate;

/// 25 ms at 16 kHz.
pub const WINDOW_LENGTH: usize = 400;
/// 10 ms at 16 kHz.
pub const FIXED_HOP: usize = 160;
/// Smallest power of two holding one window.
pub const FFT_SIZE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "video_fps", rename_all = "snake_case")]
pub enum FramingMode {
    /// 10 ms hop, stacked then decimated 3x: 33 1/3 output frames per second.
    Fixed10msDecimate3,
    /// Hop of one third of the video frame period, so decimated frames line up
    /// one-to-one with video frames.
    VariableThirdOfVideoFrame(FrameRate),
}

impl FramingMode {
    /// Output (post-decimation) frame rate in frames per second.
    pub fn output_rate(&self) -> f64 {
        match self {
            FramingMode::Fixed10msDecimate3 => SAMPLE_RATE as f64 / (3 * FIXED_HOP) as f64,
            FramingMode::VariableThirdOfVideoFrame(fps) => fps.as_f64(),
        }
    }
}

/// Analysis-frame start offsets for one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FramingPlan {
    pub window_length: usize,
    pub offsets: Vec<usize>,
    pub mode: FramingMode,
    pub sample_rate: u32,
}

/// Fixed 10 ms plan covering every complete window of a `len`-sample signal.
pub fn fixed_plan(len: usize) -> FramingPlan {
    let count = if len >= WINDOW_LENGTH {
        (len - WINDOW_LENGTH) / FIXED_HOP + 1
    } else {
        0
    };
    FramingPlan {
        window_length: WINDOW_LENGTH,
        offsets: (0..count).map(|k| k * FIXED_HOP).collect(),
        mode: FramingMode::Fixed10msDecimate3,
        sample_rate: SAMPLE_RATE,
    }
}

/// Three analysis frames per video frame. Offsets are rounded from the exact
/// rational position `k * sample_rate / (3 * fps)`, so no drift accumulates.
pub fn make_variable_hop_schedule(
    fps: FrameRate,
    num_video_frames: usize,
    sample_rate: u32,
) -> Result<FramingPlan> {
    fps.check_supported()?;
    if num_video_frames == 0 {
        return Err(Error::EmptyInput("variable hop schedule needs at least one video frame".into()));
    }
    let num = 3 * fps.num() as u128;
    let step = sample_rate as u128 * fps.den() as u128;
    let offsets = (0..3 * num_video_frames as u128)
        .map(|k| ((2 * k * step + num) / (2 * num)) as usize)
        .collect();
    Ok(FramingPlan {
        window_length: WINDOW_LENGTH,
        offsets,
        mode: FramingMode::VariableThirdOfVideoFrame(fps),
        sample_rate,
    })
}

/// One-sided complex spectrogram; row `i` is the DFT of the frame at `offsets[i]`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub bins: usize,
    pub offsets: Vec<usize>,
    pub data: Vec<Complex64>,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.offsets.len()
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.bins..(i + 1) * self.bins]
    }

    pub fn power(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Periodic Hann window.
pub(crate) fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

struct StftKernel {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl StftKernel {
    fn new() -> Self {
        StftKernel {
            window: hann(WINDOW_LENGTH),
            fft: FftPlanner::new().plan_fft_forward(FFT_SIZE),
        }
    }
}

/// Windowed, unnormalized DFT of the scheduled frames.
///
/// Fixed plans drop a trailing partial window. Variable plans are tied to
/// existing video frames, so a scheduled window that starts inside the signal
/// but runs past its end is zero-padded instead.
pub fn compute_stft(wave: &Waveform, plan: &FramingPlan) -> Result<Spectrogram> {
    wave.require_16k()?;
    if plan.sample_rate != wave.sample_rate {
        return Err(Error::UnsupportedSampleRate(plan.sample_rate));
    }
    if wave.len() < plan.window_length {
        return Err(Error::EmptyInput(format!(
            "waveform of {} samples is shorter than one {}-sample window",
            wave.len(),
            plan.window_length
        )));
    }
    let kernel = StftKernel::new();
    let bins = FFT_SIZE / 2 + 1;
    let pad_tail = matches!(plan.mode, FramingMode::VariableThirdOfVideoFrame(_));
    let offsets: Vec<usize> = plan
        .offsets
        .iter()
        .copied()
        .take_while(|&o| {
            if pad_tail {
                o < wave.len()
            } else {
                o + plan.window_length <= wave.len()
            }
        })
        .collect();
    let mut data = Vec::with_capacity(offsets.len() * bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); FFT_SIZE];
    for &off in &offsets {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        let end = (off + WINDOW_LENGTH).min(wave.len());
        for (i, (s, w)) in wave.samples[off..end]
            .iter()
            .zip(&kernel.window)
            .enumerate()
        {
            buf[i].re = s * w;
        }
        kernel.fft.process(&mut buf);
        data.extend_from_slice(&buf[..bins]);
    }
    Ok(Spectrogram {
        bins,
        offsets,
        data,
        sample_rate: wave.sample_rate,
    })
}
