//! On-disk formats: tensor containers, JSONL manifests, checkpoints and
//! result tables. Every file is written to a temporary sibling and renamed.

mod checkpoint;
mod container;
mod manifest;
mod tables;

use std::io::Write;
use std::path::Path;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use container::{DType, Entry, TensorContainer, TensorData, FORMAT_VERSION, MAGIC};
pub use manifest::{read_manifest, write_manifest, ManifestEntry, Split};
pub use tables::{read_nbest, write_nbest, CorruptionRecord, NbestLine, ScoreGrid};

use crate::data::Prepared;
use crate::error::{Error, Result};
use crate::rational::FrameRate;
use crate::video::VideoClip;

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic_with(path, |f| f.write_all(bytes).map_err(|e| Error::io(path, e)))
}

/// Like [`write_atomic`] but lets `fill` stream into the temporary file.
pub fn write_atomic_with(path: &Path, fill: impl FnOnce(&mut std::fs::File) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    fill(tmp.as_file_mut())?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Writes a WAV file atomically.
pub fn write_wav_atomic(path: &Path, wave: &crate::audio::Waveform) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::Builder::new().suffix(".wav").tempfile_in(dir).map_err(|e| Error::io(dir, e))?;
    crate::audio::write_wav(tmp.path(), wave)?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Stores a clip as one f32 `T × H × W × 3` entry named `video`.
pub fn video_to_container(clip: &VideoClip) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    c.set_attr("fps", clip.fps.to_string());
    c.push(
        "video",
        &[clip.num_frames, clip.height, clip.width, 3],
        TensorData::F32(clip.frames.iter().map(|&v| v as f32).collect()),
    )?;
    Ok(c)
}

/// Reads the `video` entry. u8 payloads are scaled to [0, 1]. The frame
/// rate comes from `fps` when given, otherwise from the `fps` attribute.
pub fn video_from_container(c: &TensorContainer, fps: Option<FrameRate>) -> Result<VideoClip> {
    let e = c.require("video")?;
    if e.shape.len() != 4 || e.shape[3] != 3 {
        return Err(Error::shape(format!("video entry has shape {:?}, expected T x H x W x 3", e.shape)));
    }
    let fps = match fps {
        Some(f) => f,
        None => c
            .attr("fps")
            .ok_or_else(|| Error::ConfigError("video container has no frame rate".into()))?
            .parse()?,
    };
    let (t, h, w) = (e.shape[0], e.shape[1], e.shape[2]);
    match &e.data {
        TensorData::U8(b) => VideoClip::from_u8(t, h, w, b, fps),
        d => VideoClip::new(t, h, w, d.to_f64(), fps),
    }
}

/// Feature container for one utterance: `audio` (N × D), `timestamps` (N)
/// and the passthrough `video` entry when present.
pub fn prepared_to_container(id: &str, p: &Prepared) -> Result<TensorContainer> {
    let mut c = match &p.video {
        Some(v) => video_to_container(v)?,
        None => TensorContainer::new(),
    };
    c.set_attr("utt_id", id);
    let n = p.timestamps.len();
    if n > 0 {
        c.push("audio", &[n, p.audio_dim], TensorData::F64(p.audio.clone()))?;
        c.push("timestamps", &[n], TensorData::F64(p.timestamps.clone()))?;
    }
    Ok(c)
}
