//! Named parameter arrays with freeze flags and gradient slots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Architectural role of a parameter; freeze policies select on this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    EncoderConv,
    EncoderFsmn,
    Adapter,
    AttentionGate,
    DecoderConv,
    DecoderFsmn,
}

impl ParamGroup {
    pub fn tag(self) -> u8 {
        match self {
            ParamGroup::EncoderConv => 0,
            ParamGroup::EncoderFsmn => 1,
            ParamGroup::Adapter => 2,
            ParamGroup::AttentionGate => 3,
            ParamGroup::DecoderConv => 4,
            ParamGroup::DecoderFsmn => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => ParamGroup::EncoderConv,
            1 => ParamGroup::EncoderFsmn,
            2 => ParamGroup::Adapter,
            3 => ParamGroup::AttentionGate,
            4 => ParamGroup::DecoderConv,
            5 => ParamGroup::DecoderFsmn,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub group: ParamGroup,
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub frozen: bool,
}

impl<T: Real> Param<T> {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Real> ParameterStore<T> {
    pub fn new() -> Self {
        ParameterStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], group: ParamGroup, value: Vec<T>) -> ParamId {
        let n: usize = shape.iter().product();
        assert_eq!(n, value.len(), "parameter value does not match its shape");
        let name = name.into();
        assert!(self.find(&name).is_none(), "duplicate parameter name {name}");
        self.params.push(Param {
            name,
            shape: shape.to_vec(),
            group,
            grad: vec![T::zero(); n],
            value,
            frozen: false,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[T] {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.params[id.0].value
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.params[id.0].frozen
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn total_count(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| !p.frozen).map(Param::len).sum()
    }

    pub fn count_group(&self, group: ParamGroup) -> usize {
        self.params.iter().filter(|p| p.group == group).map(Param::len).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Adds `scale · grads` into the gradient slots of non-frozen parameters;
    /// frozen slots stay zero.
    pub fn accumulate(&mut self, grads: &Gradients<T>, scale: T) -> Result<()> {
        if grads.slots.len() != self.params.len() {
            return Err(Error::shape(self.params.len(), grads.slots.len()));
        }
        for (p, g) in self.params.iter_mut().zip(&grads.slots) {
            if p.frozen {
                continue;
            }
            if let Some(g) = g {
                for (a, b) in p.grad.iter_mut().zip(g) {
                    *a += *b * scale;
                }
            }
        }
        Ok(())
    }

    /// Flat copy of every value, in store order.
    pub fn flat_values(&self) -> Vec<T> {
        self.params.iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    pub fn cast<U: Real>(&self) -> ParameterStore<U> {
        ParameterStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    group: p.group,
                    value: p.value.iter().map(|v| U::lit(v.as_f64())).collect(),
                    grad: vec![U::zero(); p.value.len()],
                    frozen: p.frozen,
                })
                .collect(),
        }
    }
}

/// Per-backward gradient buffers, parallel to a [`ParameterStore`]. Slots of
/// frozen parameters are never allocated.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    slots: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn for_store(store: &ParameterStore<T>) -> Self {
        Gradients {
            slots: store
                .params
                .iter()
                .map(|p| (!p.frozen).then(|| vec![T::zero(); p.len()]))
                .collect(),
        }
    }

    /// Mutable slot for `id`, or `None` if the parameter is frozen.
    pub fn slot(&mut self, id: ParamId) -> Option<&mut [T]> {
        self.slots[id.0].as_deref_mut()
    }

    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.slots[id.0].as_deref()
    }

    pub fn wants(&self, id: ParamId) -> bool {
        self.slots[id.0].is_some()
    }

    /// Elementwise sum in slot order; used for deterministic batch reduction.
    pub fn add(&mut self, other: &Gradients<T>) {
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            if let (Some(a), Some(b)) = (a, b) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += *y;
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slots.iter().flatten().flatten().all(|v| v.is_finite())
    }
}
