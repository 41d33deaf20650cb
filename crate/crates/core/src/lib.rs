//! Monaural speech enhancement for drone ego-noise: STFT front end, complex
//! ratio masking, a complex encoder–decoder with bottleneck adapters, and
//! the training and evaluation tooling around it.

pub mod datagen;
pub mod dsp;
pub mod error;
pub mod masking;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod real;
pub mod seed;
pub mod training;

pub use error::{Error, Result};
