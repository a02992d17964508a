use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModalitySwitch;

/// Per-utterance modality dropout. The probabilities are marginal rates: audio
/// is dropped in `p_drop_audio` of utterances, video in `p_drop_video`, and
/// never both.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropoutPolicy {
    pub p_drop_audio: f64,
    pub p_drop_video: f64,
}

impl DropoutPolicy {
    pub const NONE: DropoutPolicy = DropoutPolicy {
        p_drop_audio: 0.0,
        p_drop_video: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.p_drop_audio) || !ok(self.p_drop_video) || self.p_drop_audio + self.p_drop_video > 1.0 + 1e-12 {
            return Err(Error::ConfigError(format!(
                "dropout probabilities must lie in [0, 1] and sum to at most 1, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Audio is decided first; if kept, video is dropped with the conditional
    /// probability that yields the requested marginal rate.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ModalitySwitch {
        if rng.gen::<f64>() < self.p_drop_audio {
            return ModalitySwitch::VIDEO;
        }
        let keep_audio = 1.0 - self.p_drop_audio;
        if keep_audio > 0.0 && rng.gen::<f64>() < self.p_drop_video / keep_audio {
            return ModalitySwitch::AUDIO;
        }
        ModalitySwitch::BOTH
    }
}

/// Switches for a batch. Utterances whose base switch already excludes a
/// modality are left alone; dropout only applies where both streams are on.
pub fn apply_modality_dropout<R: Rng + ?Sized>(
    base: &[ModalitySwitch],
    policy: &DropoutPolicy,
    rng: &mut R,
) -> Vec<ModalitySwitch> {
    base.iter()
        .map(|&s| if s == ModalitySwitch::BOTH { policy.draw(rng) } else { s })
        .collect()
}
