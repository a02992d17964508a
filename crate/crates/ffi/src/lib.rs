//! C ABI over the `avsr` crate.
//!
//! Every fallible call returns an [`AvsrStatus`]; on failure the message is
//! available from [`avsr_last_error`] on the same thread. Handles are opaque
//! and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use avsr::audio::Waveform;
use avsr::io::{load_checkpoint, Checkpoint};
use avsr::model::{count_parameters, total, ModalitySwitch, ModelConfig};
use avsr::rational::FrameRate;
use avsr::score::{tokenize, word_error_rate};
use avsr::train::decode_prepared;
use avsr::transducer::BeamConfig;
use avsr::video::VideoClip;
use avsr::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvsrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericError = 4,
    IncompatibleCheckpoint = 5,
    IoError = 6,
    Panic = 7,
}

/// Which streams a decode call uses.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvsrModality {
    Audio = 1,
    Video = 2,
    AudioVideo = 3,
}

/// A loaded checkpoint.
pub struct AvsrModel {
    ck: Checkpoint,
}

/// A feature matrix, `rows × dim`, row-major.
pub struct AvsrFeatures {
    data: Vec<f64>,
    timestamps: Vec<f64>,
    rows: usize,
    dim: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> AvsrStatus {
    match e {
        Error::IncompatibleCheckpoint(_) => AvsrStatus::IncompatibleCheckpoint,
        Error::Io { .. } => AvsrStatus::IoError,
        _ => match e.exit_code() {
            1 => AvsrStatus::InvalidArgument,
            3 => AvsrStatus::NumericError,
            _ => AvsrStatus::DataError,
        },
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (AvsrStatus, String)>) -> AvsrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AvsrStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AvsrStatus::Panic
        }
    }
}

fn lib(e: Error) -> (AvsrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (AvsrStatus, String) {
    (AvsrStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (AvsrStatus, String) {
    (AvsrStatus::InvalidArgument, msg.into())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (AvsrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (AvsrStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn switch_of(m: AvsrModality) -> ModalitySwitch {
    match m {
        AvsrModality::Audio => ModalitySwitch::AUDIO,
        AvsrModality::Video => ModalitySwitch::VIDEO,
        AvsrModality::AudioVideo => ModalitySwitch::BOTH,
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn avsr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn avsr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Total parameter count of the full-scale model.
///
/// # Safety
/// `out_total` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn avsr_full_scale_parameter_count(out_total: *mut u64) -> AvsrStatus {
    guard(|| {
        if out_total.is_null() {
            return Err(null("out_total"));
        }
        *out_total = total(&count_parameters(&ModelConfig::full_scale())) as u64;
        Ok(())
    })
}

/// Loads a checkpoint written by `avsr train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn avsr_model_load(path: *const c_char, out_model: *mut *mut AvsrModel) -> AvsrStatus {
    guard(|| {
        if out_model.is_null() {
            return Err(null("out_model"));
        }
        *out_model = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let ck = load_checkpoint(Path::new(path), None).map_err(lib)?;
        *out_model = Box::into_raw(Box::new(AvsrModel { ck }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`avsr_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn avsr_model_free(model: *mut AvsrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Output labels including blank.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn avsr_model_vocab_size(model: *const AvsrModel, out: *mut usize) -> AvsrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.ck.model.config.vocab_size;
        Ok(())
    })
}

/// Decodes one utterance with beam search and returns the best transcript.
///
/// `samples` holds `num_samples` mono samples in [-1, 1]. `video` is null or
/// `frames × height × width × 3` RGB values in [0, 1] at `fps_num / fps_den`
/// frames per second. The returned string must be released with
/// [`avsr_string_free`].
///
/// # Safety
/// Pointers must be valid for the given lengths; `out_text` must be writable.
#[no_mangle]
pub unsafe extern "C" fn avsr_decode(
    model: *const AvsrModel,
    samples: *const f32,
    num_samples: usize,
    sample_rate: u32,
    video: *const f32,
    frames: usize,
    height: usize,
    width: usize,
    fps_num: u64,
    fps_den: u64,
    modality: AvsrModality,
    beam_width: usize,
    out_text: *mut *mut c_char,
) -> AvsrStatus {
    guard(|| {
        if out_text.is_null() {
            return Err(null("out_text"));
        }
        *out_text = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let audio = slice_arg(samples, num_samples, "samples")?;
        let wave = Waveform::new(audio.iter().map(|&x| x as f64).collect(), sample_rate).map_err(lib)?;
        let clip = if video.is_null() {
            None
        } else {
            let n = frames * height * width * 3;
            let data = slice_arg(video, n, "video")?;
            let fps = FrameRate::new(fps_num, fps_den).map_err(lib)?;
            Some(VideoClip::new(frames, height, width, data.iter().map(|&x| x as f64).collect(), fps).map_err(lib)?)
        };
        if beam_width == 0 {
            return Err(invalid("beam_width must be positive"));
        }
        let prepared = m.ck.featurizer.prepare(&wave, clip.as_ref()).map_err(lib)?;
        let beam = BeamConfig {
            beam_width,
            ..Default::default()
        };
        let d = decode_prepared(&m.ck.model, "", "", &prepared, switch_of(modality), beam, &m.ck.inventory).map_err(lib)?;
        *out_text = CString::new(d.best()).map_err(|_| invalid("transcript has a NUL byte"))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn avsr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Stacked log-mel features with the checkpoint's front end. With video
/// metadata (`frames > 0`) the hop follows the video frame rate.
///
/// # Safety
/// `samples` must hold `num_samples` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn avsr_featurize(
    model: *const AvsrModel,
    samples: *const f32,
    num_samples: usize,
    sample_rate: u32,
    frames: usize,
    fps_num: u64,
    fps_den: u64,
    out: *mut *mut AvsrFeatures,
) -> AvsrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let audio = slice_arg(samples, num_samples, "samples")?;
        let wave = Waveform::new(audio.iter().map(|&x| x as f64).collect(), sample_rate).map_err(lib)?;
        // frame content is irrelevant to audio features; a 1×1 clip carries the timing
        let clip = if frames > 0 {
            let fps = FrameRate::new(fps_num, fps_den).map_err(lib)?;
            Some(VideoClip::new(frames, 1, 1, vec![0.0; frames * 3], fps).map_err(lib)?)
        } else {
            None
        };
        let p = m.ck.featurizer.prepare(&wave, clip.as_ref()).map_err(lib)?;
        *out = Box::into_raw(Box::new(AvsrFeatures {
            rows: p.timestamps.len(),
            dim: p.audio_dim,
            data: p.audio,
            timestamps: p.timestamps,
        }));
        Ok(())
    })
}

/// # Safety
/// `f` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn avsr_features_rows(f: *const AvsrFeatures) -> usize {
    f.as_ref().map_or(0, |f| f.rows)
}

/// # Safety
/// `f` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn avsr_features_dim(f: *const AvsrFeatures) -> usize {
    f.as_ref().map_or(0, |f| f.dim)
}

/// Row-major `rows × dim` values, owned by the handle.
///
/// # Safety
/// `f` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn avsr_features_data(f: *const AvsrFeatures) -> *const f64 {
    f.as_ref().map_or(ptr::null(), |f| f.data.as_ptr())
}

/// Frame centre times in seconds, `rows` values owned by the handle.
///
/// # Safety
/// `f` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn avsr_features_timestamps(f: *const AvsrFeatures) -> *const f64 {
    f.as_ref().map_or(ptr::null(), |f| f.timestamps.as_ptr())
}

/// # Safety
/// `f` must be null or a handle from [`avsr_featurize`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn avsr_features_free(f: *mut AvsrFeatures) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Word errors (substitutions + insertions + deletions) and reference length
/// after lowercasing and stripping punctuation.
///
/// # Safety
/// Strings must be NUL-terminated; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn avsr_word_errors(
    reference: *const c_char,
    hypothesis: *const c_char,
    out_errors: *mut usize,
    out_ref_words: *mut usize,
) -> AvsrStatus {
    guard(|| {
        let r = str_arg(reference, "reference")?;
        let h = str_arg(hypothesis, "hypothesis")?;
        if out_errors.is_null() || out_ref_words.is_null() {
            return Err(null("output"));
        }
        let rep = word_error_rate(&tokenize(r, true), &tokenize(h, true));
        *out_errors = rep.errors();
        *out_ref_words = rep.ref_words;
        Ok(())
    })
}
