//! Adam with bias-corrected moments. Frozen parameters are never touched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParameterStore;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T = f32> {
    pub config: AdamConfig,
    /// Number of updates applied so far.
    pub t: u64,
    /// First and second moments, one array per parameter in store order.
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Grows the moment buffers for parameters appended to the store since
    /// the last step (e.g. freshly inserted adapters).
    fn sync(&mut self, store: &ParameterStore<T>) -> Result<()> {
        if self.m.len() > store.len() {
            return Err(Error::State(format!(
                "optimizer tracks {} parameters but the store has {}",
                self.m.len(),
                store.len()
            )));
        }
        for (_, p) in store.iter().skip(self.m.len()) {
            self.m.push(vec![T::zero(); p.len()]);
            self.v.push(vec![T::zero(); p.len()]);
        }
        Ok(())
    }

    /// One update from the gradients held in the store.
    pub fn step(&mut self, store: &mut ParameterStore<T>) -> Result<()> {
        self.sync(store)?;
        self.t += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = 1.0 - c.beta1.powf(self.t as f64);
        let bc2 = 1.0 - c.beta2.powf(self.t as f64);
        let step = T::lit(c.lr / bc1);
        let inv_bc2 = T::lit(1.0 / bc2);
        let eps = T::lit(c.eps);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if p.frozen {
                continue;
            }
            for (((w, g), m), v) in p.value.iter_mut().zip(&p.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (T::one() - b1) * *g;
                *v = b2 * *v + (T::one() - b2) * *g * *g;
                *w -= step * *m / ((*v * inv_bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
