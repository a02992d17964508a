//! Seeded synthetic audio-visual corpus: each word is one symbol, spoken as a
//! vowel-like harmonic sound and shown as a mouth-like ellipse.
//!
//! Symbols map to an audio class (formant pair) and a video class (mouth
//! shape). Symbols sharing an audio class can only be told apart by video and
//! vice versa, so each modality carries information the other lacks.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::audio::{Waveform, SAMPLE_RATE};
use crate::corrupt::{harmonic_vowel, Formant};
use crate::data::Utterance;
use crate::error::{Error, Result};
use crate::model::GraphemeInventory;
use crate::rational::FrameRate;
use crate::video::VideoClip;

/// (F1, F2) in Hz per audio class.
const AUDIO_CLASSES: [(f64, f64); 4] = [(700.0, 1150.0), (300.0, 2250.0), (350.0, 750.0), (500.0, 1750.0)];
/// Mouth half-width and half-height, as fractions of the image side, per
/// video class.
const VIDEO_CLASSES: [(f64, f64); 4] = [(0.38, 0.30), (0.40, 0.10), (0.16, 0.16), (0.27, 0.21)];
const CLOSED_MOUTH: (f64, f64) = (0.30, 0.04);
const SKIN: [f64; 3] = [0.85, 0.65, 0.55];
const LIPS: [f64; 3] = [0.35, 0.08, 0.10];
const SPEECH_LEVEL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToySymbol {
    pub grapheme: char,
    pub audio_class: usize,
    pub video_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyTaskSpec {
    pub symbols: Vec<ToySymbol>,
    pub num_utterances: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Video frames per word, inclusive range.
    pub word_frames: (usize, usize),
    pub image_size: usize,
    /// Standard deviation of per-pixel noise.
    pub video_noise: f64,
    /// Background noise level relative to the speech level, in dB.
    pub background_db: f64,
    pub frame_rates: Vec<FrameRate>,
    pub seed: u64,
}

impl Default for ToyTaskSpec {
    /// Five symbols: `a`/`b` sound alike, `d`/`e` look alike.
    fn default() -> Self {
        let sym = |grapheme, audio_class, video_class| ToySymbol {
            grapheme,
            audio_class,
            video_class,
        };
        ToyTaskSpec {
            symbols: vec![sym('a', 0, 0), sym('b', 0, 1), sym('c', 1, 2), sym('d', 2, 3), sym('e', 3, 3)],
            num_utterances: 200,
            min_words: 2,
            max_words: 4,
            word_frames: (5, 7),
            image_size: 8,
            video_noise: 0.15,
            background_db: -30.0,
            frame_rates: vec![
                FrameRate::integer(24),
                FrameRate::integer(25),
                FrameRate::NTSC,
                FrameRate::integer(30),
            ],
            seed: 0,
        }
    }
}

impl ToyTaskSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigError(format!("toy task: {m}")));
        if self.symbols.is_empty() {
            return bad("no symbols");
        }
        if self
            .symbols
            .iter()
            .any(|s| s.audio_class >= AUDIO_CLASSES.len() || s.video_class >= VIDEO_CLASSES.len())
        {
            return bad("symbol class out of range");
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return bad("word count range is empty");
        }
        if self.word_frames.0 < 2 || self.word_frames.0 > self.word_frames.1 {
            return bad("word length range is invalid");
        }
        if self.image_size < 4 || self.frame_rates.is_empty() {
            return bad("image size below 4 or no frame rates");
        }
        self.frame_rates.iter().try_for_each(|f| f.check_supported())
    }

    pub fn inventory(&self) -> Result<GraphemeInventory> {
        GraphemeInventory::from_symbols(self.symbols.iter().map(|s| s.grapheme))
    }

    /// The same task with a different seed and size.
    pub fn split(&self, seed: u64, num_utterances: usize) -> Self {
        ToyTaskSpec {
            seed,
            num_utterances,
            ..self.clone()
        }
    }
}

struct Word {
    symbol: ToySymbol,
    start: usize,
    end: usize,
}

fn sample_at(frame: usize, fps: FrameRate) -> usize {
    ((frame as u128 * SAMPLE_RATE as u128 * fps.den() as u128 + fps.num() as u128 / 2) / fps.num() as u128) as usize
}

fn render_frame(spec: &ToyTaskSpec, shape: (f64, f64), center: (f64, f64), scale: f64, noise: &Normal<f64>, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
    let n = spec.image_size as f64;
    let (hw, hh) = (shape.0 * n * scale, shape.1 * n * scale);
    for y in 0..spec.image_size {
        for x in 0..spec.image_size {
            let dx = (x as f64 + 0.5 - center.0) / hw;
            let dy = (y as f64 + 0.5 - center.1) / hh;
            let inside = 1.0 / (1.0 + (-(1.0 - dx * dx - dy * dy) * 4.0).exp());
            for c in 0..3 {
                let v = SKIN[c] * (1.0 - inside) + LIPS[c] * inside + noise.sample(rng);
                out.push(v.clamp(0.0, 1.0));
            }
        }
    }
}

fn generate_one(spec: &ToyTaskSpec, index: usize, rng: &mut ChaCha8Rng) -> Result<Utterance> {
    let fps = *spec.frame_rates.choose(rng).expect("validated");
    let n_words = rng.gen_range(spec.min_words..=spec.max_words);
    let mut words = Vec::with_capacity(n_words);
    let mut t = rng.gen_range(2..=4);
    for k in 0..n_words {
        if k > 0 {
            t += rng.gen_range(1..=3);
        }
        let len = rng.gen_range(spec.word_frames.0..=spec.word_frames.1);
        let symbol = *spec.symbols.choose(rng).expect("validated");
        words.push(Word {
            symbol,
            start: t,
            end: t + len,
        });
        t += len;
    }
    let frames = t + rng.gen_range(2..=4);

    let sr = SAMPLE_RATE as f64;
    let total = sample_at(frames, fps);
    let mut audio = vec![0.0; total];
    let f0 = rng.gen_range(100.0..200.0);
    for w in &words {
        let (s0, s1) = (sample_at(w.start, fps), sample_at(w.end, fps));
        let (f1, f2) = AUDIO_CLASSES[w.symbol.audio_class];
        let formants = [
            Formant {
                freq: f1 * rng.gen_range(0.95..1.05),
                bandwidth: 100.0,
            },
            Formant {
                freq: f2 * rng.gen_range(0.95..1.05),
                bandwidth: 150.0,
            },
        ];
        let amp = SPEECH_LEVEL * rng.gen_range(0.8..1.2);
        let seg = harmonic_vowel(f0 * rng.gen_range(0.95..1.05), &formants, s1 - s0, SAMPLE_RATE, rng);
        let ramp = (0.015 * sr) as usize;
        let len = seg.len();
        for (i, v) in seg.into_iter().enumerate() {
            let edge = i.min(len - 1 - i);
            let env = if edge < ramp { 0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos() } else { 1.0 };
            audio[s0 + i] += amp * env * v;
        }
    }
    let bg = Normal::new(0.0, SPEECH_LEVEL * 10f64.powf(spec.background_db / 20.0)).expect("finite level");
    audio.iter_mut().for_each(|v| *v += bg.sample(rng));

    let pix_noise = Normal::new(0.0, spec.video_noise.max(0.0)).expect("finite noise");
    let half = spec.image_size as f64 / 2.0;
    let center = (half + rng.gen_range(-0.5..0.5), half + rng.gen_range(-0.5..0.5));
    let scale = rng.gen_range(0.9..1.1);
    let mut pixels = Vec::with_capacity(frames * spec.image_size * spec.image_size * 3);
    for f in 0..frames {
        let shape = match words.iter().find(|w| f >= w.start && f < w.end) {
            Some(w) => {
                let progress = (f - w.start) as f64 + 0.5;
                let open = (PI * progress / (w.end - w.start) as f64).sin();
                let target = VIDEO_CLASSES[w.symbol.video_class];
                (
                    CLOSED_MOUTH.0 + open * (target.0 - CLOSED_MOUTH.0),
                    CLOSED_MOUTH.1 + open * (target.1 - CLOSED_MOUTH.1),
                )
            }
            None => CLOSED_MOUTH,
        };
        render_frame(spec, shape, center, scale, &pix_noise, rng, &mut pixels);
    }
    let transcript = words.iter().map(|w| w.symbol.grapheme.to_string()).collect::<Vec<_>>().join(" ");
    Ok(Utterance {
        id: format!("toy{}-{index:05}", spec.seed),
        audio: Waveform::new(audio, SAMPLE_RATE)?,
        video: Some(VideoClip::new(frames, spec.image_size, spec.image_size, pixels, fps)?),
        transcript,
    })
}

/// `spec.num_utterances` utterances, fully determined by `spec.seed`.
pub fn generate_toy_corpus(spec: &ToyTaskSpec) -> Result<Vec<Utterance>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.num_utterances).map(|i| generate_one(spec, i, &mut rng)).collect()
}

/// Synthetic talkers drawn from the toy task itself, summed to babble.
pub fn toy_babble(spec: &ToyTaskSpec, len: usize, talkers: usize, seed: u64) -> Result<Waveform> {
    if talkers < crate::corrupt::BABBLE_MIN_TALKERS {
        return Err(Error::ConfigError(format!("babble needs at least 6 talkers, got {talkers}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; len];
    for k in 0..talkers {
        let mut pos = 0;
        let mut talker_spec = spec.split(seed.wrapping_mul(1_000_003).wrapping_add(k as u64), 1);
        talker_spec.background_db = -120.0;
        while pos < len {
            talker_spec.seed = rng.gen();
            let utt = generate_one(&talker_spec, 0, &mut ChaCha8Rng::seed_from_u64(talker_spec.seed))?;
            let skip = rng.gen_range(0..utt.audio.len() / 2);
            for (o, v) in out[pos..].iter_mut().zip(&utt.audio.samples[skip..]) {
                *o += v;
            }
            pos += utt.audio.len() - skip;
        }
    }
    let r = crate::audio::rms(&out);
    if r > 0.0 {
        out.iter_mut().for_each(|v| *v *= SPEECH_LEVEL / r);
    }
    Waveform::new(out, SAMPLE_RATE)
}
