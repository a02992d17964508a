//! Optimizer, learning-rate schedules, modality dropout, the training loop
//! and the synthetic toy task.

mod adam;
mod dropout;
mod eval;
mod schedule;
mod toy;
mod trainer;

pub use adam::{Adam, AdamConfig};
pub use dropout::{apply_modality_dropout, DropoutPolicy};
pub use eval::{decode_prepared, evaluate, hypotheses_to_text, prepare_examples, with_audio, Decoded, Example};
pub use schedule::LrSchedule;
pub use toy::{generate_toy_corpus, toy_babble, ToySymbol, ToyTaskSpec};
pub use trainer::{accumulate_gradients, selection_modes, train, write_metrics_csv, MetricRow, TrainConfig, TrainOutcome, CONFIG_VERSION};
