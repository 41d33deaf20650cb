//! Complex-valued mask estimation network.

pub mod activation;
pub mod adapter;
pub mod attention;
pub mod conv;
pub mod feature;
pub mod fsmn;
pub mod model;
pub mod params;
#[cfg(test)]
pub(crate) mod testutil;

pub use adapter::{AdapterCell, BottleneckAdapter};
pub use attention::AttentionGate;
pub use conv::{ComplexConv, ComplexConvTranspose, ConvGeometry};
pub use feature::ComplexFeatureMap;
pub use fsmn::Fsmn;
pub use model::{ForwardMode, Model, ModelConfig, Trace};
pub use params::{Gradients, Param, ParamGroup, ParamId, ParameterStore};
