//! Evaluation metrics (SI-SNR and ESTOI) and per-condition reports.

pub mod estoi;
pub mod report;

pub use estoi::{estoi, estoi_at_10k};
pub use report::{evaluate, evaluate_noisy, EvalReport, UtteranceScore};

/// SI-SNR in dB of `estimate` against `reference`; the negated training
/// loss with the same stabilizing epsilon.
pub use crate::training::si_snr_db as si_snr;
