use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::VideoFrontendConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Width of the stacked audio feature vector.
    pub audio_dim: usize,
    pub video: VideoFrontendConfig,
    pub encoder_layers: usize,
    /// Units per direction.
    pub encoder_hidden: usize,
    pub decoder_layers: usize,
    pub decoder_hidden: usize,
    pub decoder_projection: usize,
    pub joint_dim: usize,
    /// Output labels including the blank.
    pub vocab_size: usize,
}

impl ModelConfig {
    /// 400-wide audio features, 512-wide video embeddings, five bidirectional
    /// 512-unit encoder layers, two 2048-unit decoder layers projected to 640
    /// and a 640-wide joint over 75 labels.
    pub fn full_scale() -> Self {
        ModelConfig {
            audio_dim: 400,
            video: VideoFrontendConfig::default(),
            encoder_layers: 5,
            encoder_hidden: 512,
            decoder_layers: 2,
            decoder_hidden: 2048,
            decoder_projection: 640,
            joint_dim: 640,
            vocab_size: 75,
        }
    }

    /// A model small enough to train on one core in minutes.
    pub fn toy(audio_dim: usize, vocab_size: usize) -> Self {
        ModelConfig {
            audio_dim,
            video: VideoFrontendConfig {
                image_size: 8,
                channels: vec![4, 8],
                groups: 2,
            },
            encoder_layers: 2,
            encoder_hidden: 24,
            decoder_layers: 1,
            decoder_hidden: 24,
            decoder_projection: 16,
            joint_dim: 32,
            vocab_size,
        }
    }

    pub fn video_dim(&self) -> usize {
        self.video.embedding_dim()
    }

    /// Width of the concatenated audio + video encoder input.
    pub fn input_dim(&self) -> usize {
        self.audio_dim + self.video_dim()
    }

    pub fn encoder_output_dim(&self) -> usize {
        2 * self.encoder_hidden
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("audio_dim", self.audio_dim),
            ("encoder_layers", self.encoder_layers),
            ("encoder_hidden", self.encoder_hidden),
            ("decoder_layers", self.decoder_layers),
            ("decoder_hidden", self.decoder_hidden),
            ("decoder_projection", self.decoder_projection),
            ("joint_dim", self.joint_dim),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::ConfigError(format!("{name} must be positive")));
        }
        if self.vocab_size < 2 {
            return Err(Error::ConfigError("vocabulary needs the blank and at least one symbol".into()));
        }
        self.video.validate()
    }
}

/// Audio and video input switches. Serialized as `a`, `v` or `av`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModalitySwitch {
    pub audio_on: bool,
    pub video_on: bool,
}

impl ModalitySwitch {
    pub const BOTH: ModalitySwitch = ModalitySwitch { audio_on: true, video_on: true };
    pub const AUDIO: ModalitySwitch = ModalitySwitch { audio_on: true, video_on: false };
    pub const VIDEO: ModalitySwitch = ModalitySwitch { audio_on: false, video_on: true };

    pub fn validate(self) -> Result<()> {
        if self.audio_on || self.video_on {
            Ok(())
        } else {
            Err(Error::InvalidSwitchState)
        }
    }
}

impl std::str::FromStr for ModalitySwitch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "audio" => Ok(Self::AUDIO),
            "v" | "video" => Ok(Self::VIDEO),
            "av" | "a+v" | "both" | "audio+video" => Ok(Self::BOTH),
            other => Err(Error::ConfigError(format!("unknown modality `{other}` (use a, v or av)"))),
        }
    }
}

impl std::fmt::Display for ModalitySwitch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match (self.audio_on, self.video_on) {
            (true, true) => "av",
            (true, false) => "a",
            (false, true) => "v",
            (false, false) => "none",
        })
    }
}

impl TryFrom<String> for ModalitySwitch {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModalitySwitch> for String {
    fn from(s: ModalitySwitch) -> String {
        s.to_string()
    }
}
