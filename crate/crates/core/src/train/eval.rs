use crate::data::{Featurizer, Prepared, Utterance};
use crate::error::Result;
use crate::model::{GraphemeInventory, ModalitySwitch, TransducerModel};
use crate::score::{corpus_wer, tokenize, word_error_rate, CiMethod, CorpusWer, WerReport};
use crate::transducer::{BeamConfig, Hypothesis};

/// An utterance with its labels and cached clean features.
#[derive(Debug, Clone)]
pub struct Example {
    pub utt: Utterance,
    pub labels: Vec<usize>,
    pub prepared: Prepared,
}

pub fn prepare_examples(utts: &[Utterance], featurizer: &Featurizer, inventory: &GraphemeInventory) -> Result<Vec<Example>> {
    utts.iter()
        .map(|u| {
            Ok(Example {
                labels: inventory.encode(&u.transcript)?,
                prepared: featurizer.prepare_utterance(u)?,
                utt: u.clone(),
            })
        })
        .collect()
}

/// Copies of `examples` with each waveform replaced by `corrupt(index, example)`
/// and features recomputed. Transcripts and video are kept.
pub fn with_audio(
    examples: &[Example],
    featurizer: &Featurizer,
    mut corrupt: impl FnMut(usize, &Example) -> Result<crate::audio::Waveform>,
) -> Result<Vec<Example>> {
    examples
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut utt = e.utt.clone();
            utt.audio = corrupt(i, e)?;
            Ok(Example {
                labels: e.labels.clone(),
                prepared: featurizer.prepare_utterance(&utt)?,
                utt,
            })
        })
        .collect()
}

/// Beam-search output for one utterance.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub id: String,
    pub reference: String,
    pub nbest: Vec<(String, f64)>,
    pub report: WerReport,
}

impl Decoded {
    pub fn best(&self) -> &str {
        self.nbest.first().map_or("", |(t, _)| t.as_str())
    }
}

pub fn hypotheses_to_text(hyps: &[Hypothesis], inventory: &GraphemeInventory) -> Result<Vec<(String, f64)>> {
    hyps.iter().map(|h| Ok((inventory.decode(&h.labels)?, h.log_score))).collect()
}

pub fn decode_prepared(
    model: &TransducerModel,
    id: &str,
    reference: &str,
    prepared: &Prepared,
    switch: ModalitySwitch,
    beam: BeamConfig,
    inventory: &GraphemeInventory,
) -> Result<Decoded> {
    let hyps = model.decode(&prepared.input(), switch, beam)?;
    let nbest = hypotheses_to_text(&hyps, inventory)?;
    let best = nbest.first().map_or("", |(t, _)| t.as_str());
    let report = word_error_rate(&tokenize(reference, true), &tokenize(best, true));
    Ok(Decoded {
        id: id.to_string(),
        reference: reference.to_string(),
        nbest,
        report,
    })
}

/// Decodes every example with the given switch and pools the WER.
pub fn evaluate(
    model: &TransducerModel,
    examples: &[Example],
    switch: ModalitySwitch,
    beam: BeamConfig,
    inventory: &GraphemeInventory,
    ci: CiMethod,
) -> Result<(CorpusWer, Vec<Decoded>)> {
    let decoded = examples
        .iter()
        .map(|e| decode_prepared(model, &e.utt.id, &e.utt.transcript, &e.prepared, switch, beam, inventory))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<WerReport> = decoded.iter().map(|d| d.report).collect();
    Ok((corpus_wer(&reports, ci)?, decoded))
}
