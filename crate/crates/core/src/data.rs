//! In-memory utterances and their conversion to time-aligned model inputs.

use serde::{Deserialize, Serialize};

use crate::audio::{featurize, AudioFrontendConfig, FramingMode, Waveform};
use crate::error::{Error, Result};
use crate::model::{ModalitySwitch, ModelInput};
use crate::rational::FrameRate;
use crate::video::VideoClip;

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub audio: Waveform,
    pub video: Option<VideoClip>,
    pub transcript: String,
}

impl Utterance {
    /// Streams this utterance can supply.
    pub fn available(&self) -> ModalitySwitch {
        ModalitySwitch {
            audio_on: true,
            video_on: self.video.is_some(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framing {
    /// Audio hop of one third of the video frame period.
    #[default]
    Variable,
    /// 10 ms hop; video frames are repeated or dropped to match.
    Fixed,
}

impl std::str::FromStr for Framing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variable" => Ok(Framing::Variable),
            "fixed" => Ok(Framing::Fixed),
            other => Err(Error::ConfigError(format!("unknown framing `{other}` (use variable or fixed)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    #[serde(default)]
    pub audio: AudioFrontendConfig,
    #[serde(default)]
    pub framing: Framing,
    /// Frame rate used for variable framing when an utterance has no video.
    #[serde(default = "default_fps")]
    pub fallback_fps: FrameRate,
}

fn default_fps() -> FrameRate {
    FrameRate::integer(25)
}

impl Default for Featurizer {
    fn default() -> Self {
        Featurizer {
            audio: AudioFrontendConfig::default(),
            framing: Framing::Variable,
            fallback_fps: default_fps(),
        }
    }
}

/// Audio features and video frames on a common time base.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub audio_dim: usize,
    /// `frames × audio_dim`.
    pub audio: Vec<f64>,
    pub video: Option<VideoClip>,
    pub timestamps: Vec<f64>,
}

impl Prepared {
    pub fn frames(&self) -> usize {
        let a = self.timestamps.len();
        self.video.as_ref().map_or(a, |v| v.num_frames.min(a))
    }

    pub fn input(&self) -> ModelInput<'_> {
        ModelInput {
            audio: Some(&self.audio),
            video: self.video.as_ref(),
        }
    }
}

impl Featurizer {
    pub fn mode_for(&self, video: Option<&VideoClip>) -> FramingMode {
        match self.framing {
            Framing::Fixed => FramingMode::Fixed10msDecimate3,
            Framing::Variable => FramingMode::VariableThirdOfVideoFrame(video.map_or(self.fallback_fps, |v| v.fps)),
        }
    }

    /// Featurizes `audio` and aligns `video` to the feature frames.
    pub fn prepare(&self, audio: &Waveform, video: Option<&VideoClip>) -> Result<Prepared> {
        let mode = self.mode_for(video);
        let feats = featurize(audio, mode, video.map(|v| v.num_frames), &self.audio)?;
        let video = match (self.framing, video) {
            (_, None) => None,
            (Framing::Variable, Some(v)) => Some(v.clone()),
            (Framing::Fixed, Some(v)) => {
                if v.num_frames == 0 {
                    return Err(Error::EmptyInput(format!("video clip has no frames")));
                }
                Some(v.resample_to(&feats.timestamps))
            }
        };
        Ok(Prepared {
            audio_dim: feats.dim,
            audio: feats.frames,
            video,
            timestamps: feats.timestamps,
        })
    }

    pub fn prepare_utterance(&self, utt: &Utterance) -> Result<Prepared> {
        self.prepare(&utt.audio, utt.video.as_ref())
    }
}
