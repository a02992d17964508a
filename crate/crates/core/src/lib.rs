//! Audio-visual speech recognition with an RNN transducer.
//!
//! The crate covers the whole pipeline at desk scale: synchronized audio and
//! video features, the transducer model with its audio/video switches, the
//! transducer loss and beam decoder, training with modality dropout, noise and
//! overlap corruption, and WER scoring with confidence intervals.

pub mod audio;
pub mod corrupt;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod linalg;
pub mod model;
pub mod params;
pub mod rational;
pub mod score;
pub mod train;
pub mod transducer;
pub mod video;

pub use error::{Error, Result};
pub use rational::FrameRate;
