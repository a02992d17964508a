use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::dropout::DropoutPolicy;
use super::eval::{evaluate, Example};
use super::schedule::LrSchedule;
use crate::audio::Waveform;
use crate::corrupt::{multistyle_augment, MultistyleConfig};
use crate::data::Featurizer;
use crate::error::{Error, Result};
use crate::model::{FeatureNorm, GraphemeInventory, ModalitySwitch, TransducerModel};
use crate::params::Params;
use crate::score::CiMethod;
use crate::transducer::BeamConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub version: u32,
    pub seed: u64,
    pub steps: u64,
    /// Utterances per micro-batch.
    pub batch_size: usize,
    /// Micro-batches whose gradients are summed before each update.
    pub accumulation: usize,
    pub schedule: LrSchedule,
    pub adam: AdamConfig,
    pub dropout: DropoutPolicy,
    /// Streams the model consumes.
    pub modality: ModalitySwitch,
    pub multistyle: Option<MultistyleConfig>,
    /// Held-out evaluation cadence in steps.
    pub eval_every: u64,
    pub eval_beam: usize,
    /// Global gradient-norm limit.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            version: CONFIG_VERSION,
            seed: 0,
            steps: 1000,
            batch_size: 8,
            accumulation: 1,
            schedule: LrSchedule::default(),
            adam: AdamConfig::default(),
            dropout: DropoutPolicy::NONE,
            modality: ModalitySwitch::BOTH,
            multistyle: None,
            eval_every: 200,
            eval_beam: 4,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::ConfigError(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.batch_size == 0 || self.accumulation == 0 || self.eval_every == 0 || self.eval_beam == 0 {
            return Err(Error::ConfigError(
                "batch_size, accumulation, eval_every and eval_beam must be positive".into(),
            ));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::ConfigError("grad_clip must be positive".into()));
            }
        }
        self.modality.validate()?;
        self.schedule.validate()?;
        self.dropout.validate()?;
        if let Some(m) = &self.multistyle {
            m.validate()?;
        }
        Ok(())
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricRow {
    pub step: u64,
    /// Mean per-utterance loss over the step's batch.
    pub loss: f64,
    pub lr: f64,
    /// Mean over [`selection_modes`] on evaluation steps.
    pub heldout_wer: Option<f64>,
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "step,loss,lr,heldout_wer")?;
    for r in rows {
        let wer = r.heldout_wer.map_or(String::new(), |w| format!("{w:.4}"));
        writeln!(out, "{},{:.6},{:.6e},{}", r.step, r.loss, r.lr, wer)?;
    }
    Ok(())
}

pub struct TrainOutcome {
    /// Weights with the lowest held-out WER (earliest on ties).
    pub best: TransducerModel,
    pub best_step: u64,
    pub best_wer: f64,
    pub history: Vec<MetricRow>,
}

/// Switch an example is trained with before dropout: what the model consumes
/// intersected with what the utterance provides.
fn base_switch(modality: ModalitySwitch, ex: &Example) -> ModalitySwitch {
    let avail = ex.utt.available();
    ModalitySwitch {
        audio_on: modality.audio_on && avail.audio_on,
        video_on: modality.video_on && avail.video_on,
    }
}

/// Sums gradients of `items` into `grads` and returns the summed loss.
pub fn accumulate_gradients(
    model: &TransducerModel,
    items: &[(&Example, ModalitySwitch, Option<Waveform>)],
    featurizer: &Featurizer,
    grads: &mut TransducerModel,
) -> Result<f64> {
    let mut total = 0.0;
    for (ex, switch, augmented) in items {
        let loss = match augmented {
            Some(wave) => {
                let prepared = featurizer.prepare(wave, ex.utt.video.as_ref())?;
                model.loss_and_grad(&prepared.input(), &ex.labels, *switch, grads)?
            }
            None => model.loss_and_grad(&ex.prepared.input(), &ex.labels, *switch, grads)?,
        };
        total += loss;
    }
    Ok(total)
}

fn global_norm(g: &TransducerModel) -> f64 {
    g.params()
        .iter()
        .map(|(_, t)| t.data().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Modes the held-out WER is averaged over: the configured modality plus each
/// single stream that dropout leaves on its own.
pub fn selection_modes(cfg: &TrainConfig) -> Vec<ModalitySwitch> {
    let mut modes = vec![cfg.modality];
    if cfg.modality == ModalitySwitch::BOTH {
        if cfg.dropout.p_drop_audio > 0.0 {
            modes.push(ModalitySwitch::VIDEO);
        }
        if cfg.dropout.p_drop_video > 0.0 {
            modes.push(ModalitySwitch::AUDIO);
        }
    }
    modes
}

/// Trains `model` in place and returns the best held-out checkpoint, judged
/// by the mean WER over [`selection_modes`].
///
/// Audio feature statistics are estimated from `train` first. Every random
/// choice (batch order, dropout, augmentation) comes from one generator
/// seeded by `cfg.seed`, so a run is reproducible bit for bit.
pub fn train(
    model: &mut TransducerModel,
    train: &[Example],
    heldout: &[Example],
    featurizer: &Featurizer,
    inventory: &GraphemeInventory,
    cfg: &TrainConfig,
    mut on_row: impl FnMut(&MetricRow),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    if inventory.size() != model.config.vocab_size {
        return Err(Error::ConfigError(format!(
            "inventory has {} labels but the model outputs {}",
            inventory.size(),
            model.config.vocab_size
        )));
    }
    model.norm = FeatureNorm::fit(model.config.audio_dim, train.iter().map(|e| e.prepared.audio.as_slice()));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model, cfg.adam);
    let pool: Vec<Waveform> = train.iter().map(|e| e.utt.audio.clone()).collect();
    let beam = BeamConfig {
        beam_width: cfg.eval_beam,
        ..Default::default()
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut grads = model.zeros_like();
    let mut history = Vec::new();
    let mut best: Option<(TransducerModel, u64, f64)> = None;
    let per_step = cfg.batch_size * cfg.accumulation;
    let modes = selection_modes(cfg);

    for step in 1..=cfg.steps {
        grads.zero();
        let mut loss_sum = 0.0;
        for _ in 0..cfg.accumulation {
            let mut batch = Vec::with_capacity(cfg.batch_size);
            for _ in 0..cfg.batch_size {
                if cursor == order.len() {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                let ex = &train[order[cursor]];
                cursor += 1;
                let base = base_switch(cfg.modality, ex);
                let switch = if base == ModalitySwitch::BOTH { cfg.dropout.draw(&mut rng) } else { base };
                let augmented = match &cfg.multistyle {
                    Some(ms) if switch.audio_on => {
                        match multistyle_augment(&ex.utt.audio, &pool, ms, &mut rng)? {
                            (wave, Some(_)) => Some(wave),
                            (_, None) => None,
                        }
                    }
                    _ => None,
                };
                batch.push((ex, switch, augmented));
            }
            loss_sum += accumulate_gradients(model, &batch, featurizer, &mut grads)?;
        }
        let loss = loss_sum / per_step as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step: step as usize,
                reason: format!("loss is {loss}"),
            });
        }
        let mut scale = 1.0 / per_step as f64;
        if let Some(limit) = cfg.grad_clip {
            let norm = global_norm(&grads) * scale;
            if norm > limit {
                scale *= limit / norm;
            }
        }
        for (_, t) in grads.params_mut() {
            t.scale(scale);
        }
        let lr = cfg.schedule.lr_at(step);
        adam.update(model, &grads, lr)?;

        let mut row = MetricRow {
            step,
            loss,
            lr,
            heldout_wer: None,
        };
        if !heldout.is_empty() && (step % cfg.eval_every == 0 || step == cfg.steps) {
            let mut sum = 0.0;
            for &mode in &modes {
                sum += evaluate(model, heldout, mode, beam, inventory, CiMethod::Normal)?.0.wer;
            }
            let wer = sum / modes.len() as f64;
            row.heldout_wer = Some(wer);
            if best.as_ref().map_or(true, |(_, _, w)| wer < *w) {
                best = Some((model.clone(), step, wer));
            }
        }
        on_row(&row);
        history.push(row);
    }
    let (best, best_step, best_wer) = best.unwrap_or_else(|| (model.clone(), cfg.steps, f64::NAN));
    Ok(TrainOutcome {
        best,
        best_step,
        best_wer,
        history,
    })
}
