//! Encoder–decoder complex mask estimator.
//!
//! Encoder block `j`: complex conv (downsamples frequency) → split ELU →
//! FSMN → optional bottleneck adapter. Decoder block `j` mirrors it with a
//! transposed conv, then adds the attention-gated encoder output of the
//! level below. A final transposed conv emits the complex mask on the
//! input grid.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::{elu_backward, elu_forward};
use super::adapter::{AdapterCache, BottleneckAdapter};
use super::attention::{AttentionGate, GateCache};
use super::conv::{ComplexConv, ComplexConvTranspose, ConvCache, ConvGeometry, ConvTransposeCache};
use super::feature::ComplexFeatureMap;
use super::fsmn::{Fsmn, FsmnCache};
use super::params::{Gradients, ParamGroup, ParameterStore};
use crate::dsp::ComplexSpectrogram;
use crate::error::{Error, Result};
use crate::masking::ComplexMask;
use crate::real::Real;

/// Floor on the feature normalizer so silent inputs stay finite.
const NORM_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub fft_size: usize,
    /// Output channels of each encoder block.
    pub channels: Vec<usize>,
    pub first_kernel_f: usize,
    pub first_stride: usize,
    pub kernel_f: usize,
    pub kernel_t: usize,
    pub stride: usize,
    pub fsmn_taps: usize,
    /// Where `insert_adapters` places adapters, one flag per encoder block.
    pub adapter_placement: Vec<bool>,
    pub attention_gates: bool,
    /// Magnitude compression exponent of the input features.
    pub compression: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            fft_size: 512,
            channels: vec![8, 16, 32, 32],
            first_kernel_f: 5,
            first_stride: 4,
            kernel_f: 3,
            kernel_t: 2,
            stride: 2,
            fsmn_taps: 3,
            adapter_placement: vec![true; 4],
            attention_gates: true,
            compression: 0.3,
        }
    }
}

impl ModelConfig {
    /// A two-block model on a 32-point FFT, for fast tests and gradient
    /// checks.
    pub fn tiny() -> Self {
        ModelConfig {
            fft_size: 32,
            channels: vec![2, 3],
            first_kernel_f: 3,
            first_stride: 2,
            kernel_f: 3,
            kernel_t: 2,
            stride: 2,
            fsmn_taps: 2,
            adapter_placement: vec![true, true],
            attention_gates: true,
            compression: 0.3,
        }
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frequency geometry of each encoder block.
    pub fn geometries(&self) -> Result<Vec<ConvGeometry>> {
        let mut wide = self.bins();
        let mut out = Vec::with_capacity(self.channels.len());
        for j in 0..self.channels.len() {
            let g = if j == 0 {
                ConvGeometry::new(self.first_kernel_f, self.kernel_t, self.first_stride, 0, wide)?
            } else {
                ConvGeometry::new(self.kernel_f, self.kernel_t, self.stride, self.kernel_f / 2, wide)?
            };
            wide = g.narrow;
            out.push(g);
        }
        Ok(out)
    }

    /// Frequency size of each encoder block's output.
    pub fn block_freqs(&self) -> Result<Vec<usize>> {
        Ok(self.geometries()?.iter().map(|g| g.narrow).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 4 || !self.fft_size.is_power_of_two() {
            return Err(Error::validation(format!(
                "fft_size must be a power of two, got {}",
                self.fft_size
            )));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::validation(
                "need at least one encoder block with positive channels",
            ));
        }
        if self.adapter_placement.len() != self.channels.len() {
            return Err(Error::validation(format!(
                "{} adapter flags for {} encoder blocks",
                self.adapter_placement.len(),
                self.channels.len()
            )));
        }
        if !(self.compression > 0.0 && self.compression <= 1.0) {
            return Err(Error::validation(format!(
                "compression must be in (0, 1], got {}",
                self.compression
            )));
        }
        let freqs = self.block_freqs()?;
        for (j, (&f, &flag)) in freqs.iter().zip(&self.adapter_placement).enumerate() {
            if flag && f % 2 != 0 {
                return Err(Error::validation(format!(
                    "adapter at block {j} needs even frequency size, got {f}"
                )));
            }
        }
        Ok(())
    }
}

/// Whether inserted adapters participate in a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    WithAdapters,
    WithoutAdapters,
}

#[derive(Debug, Clone, PartialEq)]
struct EncoderBlock {
    conv: ComplexConv,
    fsmn: Fsmn,
}

#[derive(Debug, Clone, PartialEq)]
struct DecoderBlock {
    tconv: ComplexConvTranspose,
    fsmn: Fsmn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    config: ModelConfig,
    pub store: ParameterStore<T>,
    enc: Vec<EncoderBlock>,
    adapters: Vec<Option<BottleneckAdapter>>,
    /// Gates on the skip from encoder level `j` into decoder level `j`.
    gates: Vec<Option<AttentionGate>>,
    /// `dec[j - 1]` maps level `j` back up to level `j - 1`.
    dec: Vec<DecoderBlock>,
    head: ComplexConvTranspose,
}

struct EncTrace<T> {
    conv: ConvCache<T>,
    act: ComplexFeatureMap<T>,
    fsmn: FsmnCache<T>,
    adapter: Option<AdapterCache<T>>,
}

struct DecTrace<T> {
    tconv: ConvTransposeCache<T>,
    act: ComplexFeatureMap<T>,
    fsmn: FsmnCache<T>,
    gate: Option<GateCache<T>>,
}

/// Everything a backward pass needs from one forward pass.
pub struct Trace<T> {
    frames: usize,
    mode: ForwardMode,
    enc: Vec<EncTrace<T>>,
    dec: Vec<DecTrace<T>>,
    head: ConvTransposeCache<T>,
}

impl<T> Trace<T> {
    pub fn frames(&self) -> usize {
        self.frames
    }
}

impl<T: Real> Model<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let geoms = config.geometries()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        let ch = &config.channels;
        let n = ch.len();
        let mut enc = Vec::with_capacity(n);
        for j in 0..n {
            let cin = if j == 0 { 1 } else { ch[j - 1] };
            let conv = ComplexConv::new(
                &mut store,
                &format!("enc{j}.conv"),
                cin,
                ch[j],
                geoms[j],
                ParamGroup::EncoderConv,
                &mut rng,
            );
            let fsmn = Fsmn::new(
                &mut store,
                &format!("enc{j}.fsmn"),
                ch[j],
                geoms[j].narrow,
                config.fsmn_taps,
                ParamGroup::EncoderFsmn,
                &mut rng,
            );
            enc.push(EncoderBlock { conv, fsmn });
        }
        let mut gates = Vec::with_capacity(n.saturating_sub(1));
        for (j, &c) in ch.iter().enumerate().take(n - 1) {
            gates.push(
                config
                    .attention_gates
                    .then(|| AttentionGate::new(&mut store, &format!("gate{j}"), c, &mut rng)),
            );
        }
        let mut dec = Vec::with_capacity(n - 1);
        for j in 1..n {
            let tconv = ComplexConvTranspose::new(
                &mut store,
                &format!("dec{j}.tconv"),
                ch[j],
                ch[j - 1],
                geoms[j],
                ParamGroup::DecoderConv,
                &mut rng,
            );
            let fsmn = Fsmn::new(
                &mut store,
                &format!("dec{j}.fsmn"),
                ch[j - 1],
                geoms[j - 1].narrow,
                config.fsmn_taps,
                ParamGroup::DecoderFsmn,
                &mut rng,
            );
            dec.push(DecoderBlock { tconv, fsmn });
        }
        let head = ComplexConvTranspose::new(
            &mut store,
            "dec0.tconv",
            ch[0],
            1,
            geoms[0],
            ParamGroup::DecoderConv,
            &mut rng,
        );
        Ok(Model {
            adapters: vec![None; n],
            config,
            store,
            enc,
            gates,
            dec,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Which encoder blocks currently carry an adapter.
    pub fn adapters_present(&self) -> Vec<bool> {
        self.adapters.iter().map(Option::is_some).collect()
    }

    pub fn has_adapters(&self) -> bool {
        self.adapters.iter().any(Option::is_some)
    }

    /// Appends fresh adapters at flagged blocks that lack one. Existing
    /// parameters are untouched. Returns the number of parameters added.
    pub fn insert_adapters(&mut self, flags: &[bool], seed: u64) -> Result<usize> {
        if flags.len() != self.enc.len() {
            return Err(Error::validation(format!(
                "{} adapter flags for {} encoder blocks",
                flags.len(),
                self.enc.len()
            )));
        }
        let before = self.store.total_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (j, &flag) in flags.iter().enumerate() {
            if !flag || self.adapters[j].is_some() {
                continue;
            }
            let fsmn = &self.enc[j].fsmn;
            let ad = BottleneckAdapter::new(
                &mut self.store,
                &format!("enc{j}.adapter"),
                fsmn.channels,
                fsmn.freq,
                &mut rng,
            )?;
            self.adapters[j] = Some(ad);
        }
        Ok(self.store.total_count() - before)
    }

    /// Compressed, globally normalized complex input features
    /// `Y·|Y|^(c−1) / rms`.
    pub fn features(&self, y: &ComplexSpectrogram<T>) -> Result<ComplexFeatureMap<T>> {
        if y.bins != self.config.bins() {
            return Err(Error::shape(
                format!("{} bins", self.config.bins()),
                format!("{} bins", y.bins),
            ));
        }
        if y.frames == 0 {
            return Err(Error::validation("spectrogram has no frames"));
        }
        let c = T::lit(self.config.compression);
        let mut re = Vec::with_capacity(y.data.len());
        let mut im = Vec::with_capacity(y.data.len());
        let mut energy = 0.0f64;
        for v in &y.data {
            let mag = v.norm();
            let scale = if mag > T::zero() {
                mag.powf(c - T::one())
            } else {
                T::zero()
            };
            re.push(v.re * scale);
            im.push(v.im * scale);
            energy += (mag * scale).as_f64().powi(2);
        }
        let rms = (energy / y.data.len() as f64).sqrt().max(NORM_FLOOR);
        let inv = T::lit(1.0 / rms);
        re.iter_mut().chain(im.iter_mut()).for_each(|v| *v *= inv);
        ComplexFeatureMap::from_planes(1, y.bins, y.frames, re, im)
    }

    pub fn forward(&self, y: &ComplexSpectrogram<T>, mode: ForwardMode) -> Result<ComplexMask<T>> {
        self.forward_traced(y, mode).map(|(m, _)| m)
    }

    pub fn forward_traced(&self, y: &ComplexSpectrogram<T>, mode: ForwardMode) -> Result<(ComplexMask<T>, Trace<T>)> {
        let s = &self.store;
        let mut x = self.features(y)?;
        let mut enc_trace = Vec::with_capacity(self.enc.len());
        let mut skips = Vec::with_capacity(self.enc.len());
        for (j, block) in self.enc.iter().enumerate() {
            let (u, conv) = block.conv.forward(s, &x)?;
            let act = elu_forward(&u);
            let (mut u, fsmn) = block.fsmn.forward(s, &act)?;
            let mut adapter = None;
            if let (ForwardMode::WithAdapters, Some(ad)) = (mode, &self.adapters[j]) {
                let (v, cache) = ad.forward(s, &u)?;
                u = v;
                adapter = Some(cache);
            }
            enc_trace.push(EncTrace {
                conv,
                act,
                fsmn,
                adapter,
            });
            skips.push(u.clone());
            x = u;
        }
        let mut dec_trace: Vec<DecTrace<T>> = Vec::with_capacity(self.dec.len());
        for j in (1..self.enc.len()).rev() {
            let block = &self.dec[j - 1];
            let (u, tconv) = block.tconv.forward(s, &x)?;
            let act = elu_forward(&u);
            let (mut u, fsmn) = block.fsmn.forward(s, &act)?;
            let gate = match &self.gates[j - 1] {
                Some(g) => {
                    let (gated, cache) = g.forward(s, &skips[j - 1])?;
                    u.add_assign(&gated);
                    Some(cache)
                }
                None => {
                    u.add_assign(&skips[j - 1]);
                    None
                }
            };
            dec_trace.push(DecTrace { tconv, act, fsmn, gate });
            x = u;
        }
        let (out, head) = self.head.forward(s, &x)?;
        let data = out.re.iter().zip(&out.im).map(|(r, i)| Complex::new(*r, *i)).collect();
        let mask = ComplexMask {
            frames: y.frames,
            bins: y.bins,
            data,
        };
        Ok((
            mask,
            Trace {
                frames: y.frames,
                mode,
                enc: enc_trace,
                dec: dec_trace,
                head,
            },
        ))
    }

    /// Accumulates parameter gradients of a loss whose mask gradient is
    /// `dmask` (as `∂L/∂re + i ∂L/∂im`).
    pub fn backward(&self, trace: &Trace<T>, dmask: &ComplexMask<T>, grads: &mut Gradients<T>) -> Result<()> {
        if dmask.frames != trace.frames || dmask.bins != self.config.bins() {
            return Err(Error::shape(
                format!("{} x {} mask gradient", trace.frames, self.config.bins()),
                format!("{} x {}", dmask.frames, dmask.bins),
            ));
        }
        let s = &self.store;
        let n = self.enc.len();
        let dout = ComplexFeatureMap::from_planes(
            1,
            dmask.bins,
            dmask.frames,
            dmask.data.iter().map(|c| c.re).collect(),
            dmask.data.iter().map(|c| c.im).collect(),
        )?;
        let mut d = self
            .head
            .backward(s, &trace.head, &dout, grads, true)
            .expect("input gradient requested");
        // gradient reaching each encoder output through its skip path
        let mut skip_grads: Vec<Option<ComplexFeatureMap<T>>> = (0..n).map(|_| None).collect();
        for j in 1..n {
            let t = &trace.dec[n - 1 - j];
            let block = &self.dec[j - 1];
            skip_grads[j - 1] = Some(match (&self.gates[j - 1], &t.gate) {
                (Some(g), Some(cache)) => g.backward(s, cache, &d, grads),
                _ => d.clone(),
            });
            let du = block
                .fsmn
                .backward(s, &t.fsmn, &d, grads, true)
                .expect("input gradient requested");
            let du = elu_backward(&t.act, &du);
            d = block
                .tconv
                .backward(s, &t.tconv, &du, grads, true)
                .expect("input gradient requested");
        }
        for j in (0..n).rev() {
            if let Some(g) = skip_grads[j].take() {
                d.add_assign(&g);
            }
            let t = &trace.enc[j];
            if let (ForwardMode::WithAdapters, Some(ad), Some(cache)) = (trace.mode, &self.adapters[j], &t.adapter) {
                d = ad.backward(s, cache, &d, grads);
            }
            let block = &self.enc[j];
            let du = block
                .fsmn
                .backward(s, &t.fsmn, &d, grads, true)
                .expect("input gradient requested");
            let du = elu_backward(&t.act, &du);
            match block.conv.backward(s, &t.conv, &du, grads, j > 0) {
                Some(dx) => d = dx,
                None => break,
            }
        }
        Ok(())
    }

    /// Same architecture and values in another float type.
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            store: self.store.cast(),
            enc: self.enc.clone(),
            adapters: self.adapters.clone(),
            gates: self.gates.clone(),
            dec: self.dec.clone(),
            head: self.head.clone(),
        }
    }
}
