//! Word error rate with edit-operation counts, confidence intervals and the
//! face-quality bucket.

mod ci;
mod quality;
mod wer;

pub use ci::{confidence_interval_95, CiMethod};
pub use quality::{quality_bucket, FaceMeta, QualityBucket};
pub use wer::{corpus_wer, normalize_text, tokenize, word_error_rate, CorpusWer, WerReport};
