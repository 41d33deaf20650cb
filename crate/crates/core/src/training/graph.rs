//! One differentiable pass of the enhancement pipeline:
//! waveform → STFT → model → mask ⊙ Y → inverse STFT → SI-SNR loss.

use crate::dsp::{ComplexSpectrogram, Stft, Waveform};
use crate::error::{Error, Result};
use crate::masking::{apply_mask, apply_mask_backward};
use crate::nn::{ForwardMode, Gradients, Model, Trace};
use crate::real::Real;

use super::loss::si_snr_loss;

struct Recorded<T> {
    trace: Trace<T>,
    mixture: ComplexSpectrogram<T>,
    /// Gradient of the loss on the enhanced waveform.
    grad_wave: Vec<T>,
}

/// Records a forward pass so a later [`LossGraph::backward`] can replay it.
/// Each forward supports exactly one backward.
pub struct LossGraph<'a, T: Real> {
    model: &'a Model<T>,
    stft: &'a Stft<T>,
    recorded: Option<Recorded<T>>,
}

impl<'a, T: Real> LossGraph<'a, T> {
    pub fn new(model: &'a Model<T>, stft: &'a Stft<T>) -> Result<Self> {
        if stft.config().bins() != model.config().bins() {
            return Err(Error::validation(format!(
                "STFT produces {} bins but the model expects {}",
                stft.config().bins(),
                model.config().bins()
            )));
        }
        Ok(LossGraph {
            model,
            stft,
            recorded: None,
        })
    }

    /// Returns the loss (negative SI-SNR in dB) of enhancing `mixture`
    /// against `clean`.
    pub fn forward(&mut self, mixture: &Waveform<T>, clean: &Waveform<T>, mode: ForwardMode) -> Result<f64> {
        let y = self.stft.forward(mixture)?;
        let (mask, trace) = self.model.forward_traced(&y, mode)?;
        let enhanced = apply_mask(&mask, &y)?;
        let wave = self.stft.inverse_trimmed(&enhanced, mixture.len())?;
        let (loss, grad_wave) = si_snr_loss(&wave.samples, &clean.samples)?;
        self.recorded = Some(Recorded {
            trace,
            mixture: y,
            grad_wave,
        });
        Ok(loss)
    }

    /// Accumulates parameter gradients of the last recorded loss.
    pub fn backward(&mut self, grads: &mut Gradients<T>) -> Result<()> {
        let rec = self
            .recorded
            .take()
            .ok_or_else(|| Error::State("backward called without a recorded forward pass".into()))?;
        let grad_spec = self.stft.inverse_trimmed_adjoint(&rec.grad_wave, rec.trace.frames())?;
        let grad_mask = apply_mask_backward(&grad_spec, &rec.mixture)?;
        self.model.backward(&rec.trace, &grad_mask, grads)
    }
}
