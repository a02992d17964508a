//! Mouth-thumbnail front end: a stack of 3-D convolution blocks with group
//! normalization that emits one embedding per video frame.

mod conv;
mod frontend;
mod landmarks;

pub use conv::{conv3d_block, BlockCache, ConvBlock, ConvBlockSpec, GN_EPS};
pub use frontend::{embed_clip, FrontendCache, VideoEmbeddingSequence, VideoFrontend, VideoFrontendConfig};
pub use landmarks::{smooth_landmarks, LandmarkTrack};

use crate::error::{Error, Result};
use crate::rational::FrameRate;

/// `T × H × W × 3` RGB frames with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    pub num_frames: usize,
    pub height: usize,
    pub width: usize,
    pub frames: Vec<f64>,
    pub fps: FrameRate,
    pub landmarks: Option<LandmarkTrack>,
}

impl VideoClip {
    pub fn new(num_frames: usize, height: usize, width: usize, frames: Vec<f64>, fps: FrameRate) -> Result<Self> {
        if num_frames == 0 {
            return Err(Error::EmptyInput("video clip has no frames".into()));
        }
        fps.check_supported()?;
        if frames.len() != num_frames * height * width * 3 {
            return Err(Error::shape(format!(
                "clip data has {} values, expected {num_frames}x{height}x{width}x3",
                frames.len()
            )));
        }
        if frames.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::ConfigError("pixel values must lie in [0, 1]".into()));
        }
        Ok(VideoClip {
            num_frames,
            height,
            width,
            frames,
            fps,
            landmarks: None,
        })
    }

    pub fn from_u8(num_frames: usize, height: usize, width: usize, bytes: &[u8], fps: FrameRate) -> Result<Self> {
        Self::new(num_frames, height, width, bytes.iter().map(|&b| b as f64 / 255.0).collect(), fps)
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.frames.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.height * self.width * 3;
        &self.frames[t * n..(t + 1) * n]
    }

    /// Nearest-preceding-frame resampling onto arbitrary timestamps (seconds).
    pub fn resample_to(&self, timestamps: &[f64]) -> VideoClip {
        let n = self.height * self.width * 3;
        let mut frames = Vec::with_capacity(timestamps.len() * n);
        for &ts in timestamps {
            let idx = ((ts * self.fps.as_f64()).floor().max(0.0) as usize).min(self.num_frames - 1);
            frames.extend_from_slice(self.frame(idx));
        }
        VideoClip {
            num_frames: timestamps.len(),
            height: self.height,
            width: self.width,
            frames,
            fps: self.fps,
            landmarks: None,
        }
    }
}
