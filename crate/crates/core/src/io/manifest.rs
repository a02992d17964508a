use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{video_from_container, write_atomic, TensorContainer};
use crate::audio::read_wav;
use crate::data::Utterance;
use crate::error::{Error, Result};
use crate::rational::FrameRate;
use crate::score::FaceMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Heldout,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "heldout" => Ok(Split::Heldout),
            "test" => Ok(Split::Test),
            _ => Err(Error::ConfigError(format!("unknown split `{s}` (train, heldout, test)"))),
        }
    }
}

/// One JSONL line. Paths are relative to the manifest's directory unless
/// absolute; video files are tensor containers with a `video` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub audio_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_path: Option<PathBuf>,
    pub transcript: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_fps: Option<FrameRate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_meta: Option<FaceMeta>,
    pub split: Split,
}

impl ManifestEntry {
    pub fn resolve(&self, root: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            root.join(p)
        }
    }

    /// Loads audio and, when listed, video.
    pub fn load(&self, root: &Path) -> Result<Utterance> {
        let audio = read_wav(&self.resolve(root, &self.audio_path))?;
        let video = match &self.video_path {
            Some(p) => {
                let path = self.resolve(root, p);
                Some(video_from_container(&TensorContainer::read(&path)?, self.video_fps)?)
            }
            None => None,
        };
        Ok(Utterance {
            id: self.utt_id.clone(),
            audio,
            video,
            transcript: self.transcript.clone(),
        })
    }
}

/// Parses and validates a manifest: unique ids, `video_fps` present exactly
/// when `video_path` is, non-empty transcripts outside the test split, and
/// every referenced file present. Returns the entries and their root.
pub fn read_manifest(path: &Path) -> Result<(Vec<ManifestEntry>, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: ManifestEntry = serde_json::from_str(line)
            .map_err(|err| Error::Manifest(format!("{}:{}: {err}", path.display(), i + 1)))?;
        entries.push(e);
    }
    validate(&entries, &root)?;
    Ok((entries, root))
}

fn validate(entries: &[ManifestEntry], root: &Path) -> Result<()> {
    let mut seen = HashSet::new();
    for e in entries {
        let bad = |m: String| Err(Error::Manifest(format!("{}: {m}", e.utt_id)));
        if e.utt_id.is_empty() {
            return Err(Error::Manifest("empty utt_id".into()));
        }
        if !seen.insert(e.utt_id.as_str()) {
            return bad("duplicate utt_id".into());
        }
        if e.video_path.is_some() != e.video_fps.is_some() {
            return bad("video_fps must be given exactly when video_path is".into());
        }
        if e.split != Split::Test && e.transcript.trim().is_empty() {
            return bad("empty transcript".into());
        }
        for p in std::iter::once(&e.audio_path).chain(e.video_path.as_ref()) {
            let full = e.resolve(root, p);
            if !full.is_file() {
                return bad(format!("missing file {}", full.display()));
            }
        }
    }
    Ok(())
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        let line = serde_json::to_string(e).map_err(|err| Error::Manifest(err.to_string()))?;
        writeln!(out, "{line}").expect("string write");
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str) -> ManifestEntry {
        ManifestEntry {
            utt_id: id.into(),
            audio_path: "a.wav".into(),
            video_path: None,
            transcript: "hello".into(),
            video_fps: None,
            face_meta: None,
            split: Split::Train,
        }
    }

    fn setup() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.wav"), b"").unwrap();
        std::fs::write(dir.path().join("v.avt"), b"").unwrap();
        dir
    }

    #[test]
    fn validation_rules() {
        let dir = setup();
        let root = dir.path();
        assert!(validate(&[entry("x"), entry("y")], root).is_ok());
        assert!(matches!(validate(&[entry("x"), entry("x")], root), Err(Error::Manifest(m)) if m.contains("duplicate")));
        let mut e = entry("x");
        e.video_path = Some("v.avt".into());
        assert!(validate(&[e.clone()], root).is_err());
        e.video_fps = Some(FrameRate::integer(25));
        assert!(validate(&[e.clone()], root).is_ok());
        e.video_path = Some("missing.avt".into());
        assert!(matches!(validate(&[e], root), Err(Error::Manifest(m)) if m.contains("missing file")));
        let mut e = entry("x");
        e.transcript = " ".into();
        assert!(validate(&[e.clone()], root).is_err());
        e.split = Split::Test;
        assert!(validate(&[e], root).is_ok());
    }

    #[test]
    fn round_trip_and_line_numbers() {
        let dir = setup();
        let path = dir.path().join("m.jsonl");
        let mut e = entry("x");
        e.video_path = Some("v.avt".into());
        e.video_fps = Some(FrameRate::NTSC);
        write_manifest(&path, &[e.clone(), entry("y")]).unwrap();
        let (back, root) = read_manifest(&path).unwrap();
        assert_eq!(back, vec![e, entry("y")]);
        assert_eq!(root, dir.path());

        std::fs::write(&path, "{\"utt_id\":\"x\",\"audio_path\":\"a.wav\",\"transcript\":\"t\",\"split\":\"train\"}\n{\"bogus\":1}\n").unwrap();
        let err = read_manifest(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn empty_manifest_is_valid() {
        let dir = setup();
        let path = dir.path().join("m.jsonl");
        std::fs::write(&path, "\n").unwrap();
        assert!(read_manifest(&path).unwrap().0.is_empty());
    }
}
