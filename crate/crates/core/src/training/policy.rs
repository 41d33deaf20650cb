//! Freeze policies: which parameter groups a training regime updates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Model, ParamGroup, ParameterStore};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezePolicy {
    /// Every parameter trains.
    Full,
    /// Encoder FSMN layers and attention gates train.
    FineTune,
    /// Adapters and attention gates train.
    AdapterTune,
    /// Nothing trains.
    Frozen,
}

impl FreezePolicy {
    pub const ALL: [FreezePolicy; 4] = [
        FreezePolicy::Full,
        FreezePolicy::FineTune,
        FreezePolicy::AdapterTune,
        FreezePolicy::Frozen,
    ];

    pub fn trains(self, group: ParamGroup) -> bool {
        match self {
            FreezePolicy::Full => true,
            FreezePolicy::FineTune => matches!(group, ParamGroup::EncoderFsmn | ParamGroup::AttentionGate),
            FreezePolicy::AdapterTune => matches!(group, ParamGroup::Adapter | ParamGroup::AttentionGate),
            FreezePolicy::Frozen => false,
        }
    }

    /// Sets every parameter's frozen flag according to this policy.
    pub fn apply<T: Real>(self, store: &mut ParameterStore<T>) {
        for p in store.iter_mut() {
            p.frozen = !self.trains(p.group);
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FreezePolicy::Full => "full",
            FreezePolicy::FineTune => "fine_tune",
            FreezePolicy::AdapterTune => "adapter_tune",
            FreezePolicy::Frozen => "frozen",
        }
    }
}

impl fmt::Display for FreezePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FreezePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FreezePolicy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown freeze policy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCounts {
    pub trainable: usize,
    pub total: usize,
}

pub fn count_trainable<T: Real>(model: &Model<T>, policy: FreezePolicy) -> ParamCounts {
    let mut counts = ParamCounts { trainable: 0, total: 0 };
    for (_, p) in model.store.iter() {
        counts.total += p.len();
        if policy.trains(p.group) {
            counts.trainable += p.len();
        }
    }
    counts
}
