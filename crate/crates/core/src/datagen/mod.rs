//! Data preparation: WAV ingestion, parametric drone-noise and speech
//! synthesis, SNR-controlled mixing, manifests and dataset assembly.

pub mod dataset;
pub mod manifest;
pub mod mix;
pub mod mixset;
pub mod resample;
pub mod synth;
pub mod wav;

pub use dataset::{
    build_dataset, build_dataset_from_manifest, synthetic_pool, DatasetConfig, NoiseFamily, Source, SourcePool,
    SyntheticPoolConfig,
};
pub use manifest::{DatasetManifest, ManifestEntry, Role, Split};
pub use mix::{mix_at_snr, MixtureRecord};
pub use mixset::{read_mixtures, write_mixtures};
pub use resample::resample;
pub use synth::{
    synth_drone_noise, synth_generic_noise, synth_speech, GenericNoiseKind, NoiseSynthSpec, NoiseType, SpeakerProfile,
    NOISE_PEAK,
};
pub use wav::{read_wav, read_wav_native, write_wav, write_wav_f32};
