//! Transducer objective over the frame × label lattice and the
//! frame-synchronous beam decoder.

mod beam;
mod loss;

pub use beam::{beam_decode, BeamConfig, Hypothesis, TransducerScorer};
pub use loss::{logadd, transducer_loss, LossLattice, TransducerLoss};
