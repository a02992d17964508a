//! Audio-visual transducer: video front end, bidirectional encoder over the
//! concatenated streams, label-history decoder and joint network.

mod accounting;
mod config;
mod decoder;
mod encoder;
mod graphemes;
mod joint;
mod lstm;

pub use accounting::{
    compare_with_reference, count_parameters, format_count, parse_count, total, ParamRow, RowComparison,
    REFERENCE_ROWS,
};
pub use config::{ModalitySwitch, ModelConfig};
pub use decoder::{Decoder, DecoderState};
pub use encoder::{BiLstmLayer, Encoder};
pub use graphemes::{GraphemeInventory, BLANK};
pub use joint::{Joint, JointLattice};
pub use lstm::{LstmCell, LstmState, LN_EPS};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{log_softmax_in_place, Tensor};
use crate::params::{prefixed, prefixed_mut, Params};
use crate::transducer::{beam_decode, transducer_loss, BeamConfig, Hypothesis, TransducerScorer};
use crate::video::{FrontendCache, VideoClip, VideoFrontend};

/// Per-dimension audio feature standardization, estimated from training data
/// and stored with the model. Not trained by gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl FeatureNorm {
    pub fn identity(dim: usize) -> Self {
        FeatureNorm {
            mean: vec![0.0; dim],
            inv_std: vec![1.0; dim],
        }
    }

    /// Mean and inverse standard deviation over all rows of all sequences.
    pub fn fit<'a>(dim: usize, sequences: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        for seq in sequences {
            for row in seq.chunks_exact(dim) {
                for k in 0..dim {
                    sum[k] += row[k];
                    sq[k] += row[k] * row[k];
                }
                n += 1;
            }
        }
        if n == 0 {
            return Self::identity(dim);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let inv_std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| 1.0 / (s / n as f64 - m * m).max(0.0).sqrt().max(1e-3))
            .collect();
        FeatureNorm { mean, inv_std }
    }

    pub fn apply(&self, row: &[f64], out: &mut [f64]) {
        for k in 0..row.len() {
            out[k] = (row[k] - self.mean[k]) * self.inv_std[k];
        }
    }
}

/// Time-aligned model inputs. The audio stream is `frames × audio_dim` stacked
/// features; the video clip holds one thumbnail per feature frame. When both
/// are present the shorter length wins.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModelInput<'a> {
    pub audio: Option<&'a [f64]>,
    pub video: Option<&'a VideoClip>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransducerModel {
    pub config: ModelConfig,
    pub norm: FeatureNorm,
    pub video: VideoFrontend,
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub joint: Joint,
}

struct EncodeCache {
    encoder: encoder::EncoderCache,
    video: Option<FrontendCache>,
}

impl TransducerModel {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let video = VideoFrontend::new(config.video.clone(), rng)?;
        let encoder = Encoder::new(config.input_dim(), config.encoder_hidden, config.encoder_layers, rng);
        let decoder = Decoder::new(
            config.vocab_size,
            config.decoder_hidden,
            config.decoder_projection,
            config.decoder_layers,
            rng,
        );
        let joint = Joint::new(
            config.encoder_output_dim(),
            config.decoder_projection,
            config.joint_dim,
            config.vocab_size,
            rng,
        );
        Ok(TransducerModel {
            norm: FeatureNorm::identity(config.audio_dim),
            config,
            video,
            encoder,
            decoder,
            joint,
        })
    }

    /// A same-shaped model with every trainable tensor zeroed, used as a
    /// gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        g.zero();
        g
    }

    /// Number of encoder frames the input yields.
    pub fn input_frames(&self, input: &ModelInput) -> Result<usize> {
        let a = match input.audio {
            Some(a) => {
                if a.len() % self.config.audio_dim != 0 {
                    return Err(Error::shape(format!(
                        "audio features have {} values, not a multiple of {}",
                        a.len(),
                        self.config.audio_dim
                    )));
                }
                Some(a.len() / self.config.audio_dim)
            }
            None => None,
        };
        let v = input.video.map(|c| c.num_frames);
        match (a, v) {
            (Some(a), Some(v)) => Ok(a.min(v)),
            (Some(n), None) | (None, Some(n)) => Ok(n),
            (None, None) => Err(Error::EmptyInput("model input has neither audio nor video".into())),
        }
    }

    /// Encoder over `n × input_dim` concatenated features with the switch
    /// applied by zeroing the disabled slices.
    pub fn encode_features(&self, features: &[f64], n: usize, switch: ModalitySwitch) -> Result<Vec<f64>> {
        switch.validate()?;
        let d = self.config.input_dim();
        if features.len() != n * d {
            return Err(Error::shape(format!("expected {n}x{d} features, got {}", features.len())));
        }
        let mut x = features.to_vec();
        let ad = self.config.audio_dim;
        for row in x.chunks_exact_mut(d) {
            if !switch.audio_on {
                row[..ad].fill(0.0);
            }
            if !switch.video_on {
                row[ad..].fill(0.0);
            }
        }
        Ok(self.encoder.forward(&x, n).0)
    }

    fn check_streams(&self, input: &ModelInput, switch: ModalitySwitch) -> Result<()> {
        switch.validate()?;
        if switch.audio_on && input.audio.is_none() {
            return Err(Error::ConfigError("audio switch is on but the input has no audio".into()));
        }
        if switch.video_on && input.video.is_none() {
            return Err(Error::ConfigError("video switch is on but the input has no video".into()));
        }
        Ok(())
    }

    /// Builds the concatenated encoder input. Video embeddings are only
    /// computed when the video switch is on.
    fn assemble(&self, input: &ModelInput, switch: ModalitySwitch) -> Result<(Vec<f64>, usize, Option<FrontendCache>)> {
        self.check_streams(input, switch)?;
        let n = self.input_frames(input)?;
        let (ad, d) = (self.config.audio_dim, self.config.input_dim());
        let mut x = vec![0.0; n * d];
        if switch.audio_on {
            let a = input.audio.unwrap_or_default();
            for t in 0..n {
                self.norm.apply(&a[t * ad..(t + 1) * ad], &mut x[t * d..t * d + ad]);
            }
        }
        let mut vcache = None;
        if switch.video_on {
            let clip = input.video.expect("checked above");
            let clip = truncate_clip(clip, n);
            let (emb, cache) = self.video.forward(&clip)?;
            let vd = self.config.video_dim();
            for t in 0..n {
                x[t * d + ad..(t + 1) * d].copy_from_slice(&emb[t * vd..(t + 1) * vd]);
            }
            vcache = Some(cache);
        }
        Ok((x, n, vcache))
    }

    fn encode_with_cache(&self, input: &ModelInput, switch: ModalitySwitch) -> Result<(Vec<f64>, usize, EncodeCache)> {
        let (x, n, video) = self.assemble(input, switch)?;
        let (enc, encoder) = self.encoder.forward(&x, n);
        Ok((enc, n, EncodeCache { encoder, video }))
    }

    /// `frames × encoder_output_dim` encoder outputs.
    pub fn encode(&self, input: &ModelInput, switch: ModalitySwitch) -> Result<(Vec<f64>, usize)> {
        let (x, n, _) = self.assemble(input, switch)?;
        Ok((self.encoder.forward(&x, n).0, n))
    }

    /// Transducer loss of `labels` and its gradient, accumulated into `grads`.
    pub fn loss_and_grad(
        &self,
        input: &ModelInput,
        labels: &[usize],
        switch: ModalitySwitch,
        grads: &mut TransducerModel,
    ) -> Result<f64> {
        let (enc, n, cache) = self.encode_with_cache(input, switch)?;
        let (dec, dcache) = self.decoder.forward(labels)?;
        let cols = labels.len() + 1;
        let a = self.joint.project_encoder(&enc, n);
        let b = self.joint.project_decoder(&dec, cols);
        let lattice = self.joint.lattice(&a, n, &b, cols);
        let out = transducer_loss(&lattice.log_probs, n, labels, self.config.vocab_size, BLANK)?;
        let (da, db) = self.joint.lattice_backward(&lattice, &out.grad, &mut grads.joint);
        let d_enc = self.joint.project_encoder_backward(&enc, n, &da, &mut grads.joint);
        let d_dec = self.joint.project_decoder_backward(&dec, cols, &db, &mut grads.joint);
        self.decoder.backward(&dcache, &d_dec, &mut grads.decoder);
        let dx = self.encoder.backward(&cache.encoder, &d_enc, &mut grads.encoder);
        if let Some(vc) = &cache.video {
            let (ad, d, vd) = (self.config.audio_dim, self.config.input_dim(), self.config.video_dim());
            let mut d_emb = vec![0.0; n * vd];
            for t in 0..n {
                d_emb[t * vd..(t + 1) * vd].copy_from_slice(&dx[t * d + ad..(t + 1) * d]);
            }
            self.video.backward(vc, &d_emb, &mut grads.video);
        }
        Ok(out.loss)
    }

    /// Loss only.
    pub fn loss(&self, input: &ModelInput, labels: &[usize], switch: ModalitySwitch) -> Result<f64> {
        let (enc, n) = self.encode(input, switch)?;
        let dec = self.decoder.predict(labels)?;
        let cols = labels.len() + 1;
        let a = self.joint.project_encoder(&enc, n);
        let b = self.joint.project_decoder(&dec, cols);
        let lattice = self.joint.lattice(&a, n, &b, cols);
        Ok(transducer_loss(&lattice.log_probs, n, labels, self.config.vocab_size, BLANK)?.loss)
    }

    /// Scorer over precomputed encoder projections, for beam search.
    pub fn scorer(&self, input: &ModelInput, switch: ModalitySwitch) -> Result<ModelScorer<'_>> {
        let (enc, n) = self.encode(input, switch)?;
        Ok(ModelScorer {
            model: self,
            projected: self.joint.project_encoder(&enc, n),
            frames: n,
        })
    }

    /// N-best label sequences, best first.
    pub fn decode(&self, input: &ModelInput, switch: ModalitySwitch, cfg: BeamConfig) -> Result<Vec<Hypothesis>> {
        beam_decode(&self.scorer(input, switch)?, cfg)
    }
}

fn truncate_clip(clip: &VideoClip, n: usize) -> VideoClip {
    let per = clip.height * clip.width * 3;
    VideoClip {
        num_frames: n,
        height: clip.height,
        width: clip.width,
        frames: clip.frames[..n * per].to_vec(),
        fps: clip.fps,
        landmarks: None,
    }
}

/// Decoder state plus its joint-space projection.
#[derive(Debug, Clone)]
pub struct ScorerState {
    decoder: DecoderState,
    projected: Vec<f64>,
}

pub struct ModelScorer<'a> {
    model: &'a TransducerModel,
    projected: Vec<f64>,
    frames: usize,
}

impl ModelScorer<'_> {
    fn wrap(&self, decoder: DecoderState) -> ScorerState {
        let projected = self.model.joint.project_decoder(decoder.output(), 1);
        ScorerState { decoder, projected }
    }
}

impl TransducerScorer for ModelScorer<'_> {
    type State = ScorerState;

    fn num_frames(&self) -> usize {
        self.frames
    }

    fn blank(&self) -> usize {
        BLANK
    }

    fn start(&self) -> ScorerState {
        self.wrap(self.model.decoder.start())
    }

    fn extend(&self, state: &ScorerState, label: usize) -> ScorerState {
        self.wrap(self.model.decoder.extend(&state.decoder, label))
    }

    fn log_probs(&self, frame: usize, state: &ScorerState) -> Vec<f64> {
        let j = self.model.joint.joint_dim();
        let a = &self.projected[frame * j..(frame + 1) * j];
        let mut z = self.model.joint.logits_projected(a, &state.projected).0;
        log_softmax_in_place(&mut z);
        z
    }
}

impl Params for TransducerModel {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("video", self.video.params());
        v.extend(prefixed("encoder", self.encoder.params()));
        v.extend(prefixed("decoder", self.decoder.params()));
        v.extend(prefixed("rnnt", self.joint.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = prefixed_mut("video", self.video.params_mut());
        v.extend(prefixed_mut("encoder", self.encoder.params_mut()));
        v.extend(prefixed_mut("decoder", self.decoder.params_mut()));
        v.extend(prefixed_mut("rnnt", self.joint.params_mut()));
        v
    }
}
