//! SI-SNR loss, freeze policies, the Adam optimizer, the differentiable
//! enhancement graph, the training loop and checkpoints.

pub mod checkpoint;
pub mod graph;
pub mod loss;
pub mod optim;
pub mod policy;
pub mod trainer;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint};
pub use graph::LossGraph;
pub use loss::{si_snr_db, si_snr_loss, SI_SNR_EPS};
pub use optim::{Adam, AdamConfig};
pub use policy::{count_trainable, FreezePolicy, ParamCounts};
pub use trainer::{train, EpochRecord, History, TrainConfig, TrainState};
