//! End-to-end flows through data generation, training and checkpointing on
//! the tiny model.

use drone_enhance::datagen::{
    build_dataset, read_mixtures, synthetic_pool, write_mixtures, DatasetConfig, MixtureRecord, NoiseFamily,
    SourcePool, Split, SyntheticPoolConfig,
};
use drone_enhance::dsp::{StftConfig, WindowKind};
use drone_enhance::nn::ModelConfig;
use drone_enhance::training::{load_checkpoint, save_checkpoint, train, FreezePolicy, TrainConfig, TrainState};

fn tiny_stft() -> StftConfig {
    StftConfig {
        fft_size: 32,
        hop: 16,
        window: WindowKind::SqrtHann,
    }
}

fn pool(seed: u64) -> SourcePool {
    synthetic_pool(&SyntheticPoolConfig {
        clean_per_split: [6, 2, 2],
        noise_per_split: [3, 1, 1],
        clean_s: 2.0,
        noise_s: 2.0,
        ..SyntheticPoolConfig::desk(NoiseFamily::Drone, seed)
    })
    .unwrap()
}

fn records(pool: &SourcePool, split: Split, count: usize, seed: u64) -> Vec<MixtureRecord> {
    let cfg = DatasetConfig {
        crop_s: 0.5,
        count,
        seed,
        ..DatasetConfig::default()
    };
    build_dataset(pool, split, &cfg).unwrap()
}

fn adapted_state(seed: u64) -> TrainState {
    let cfg = ModelConfig::tiny();
    let mut state = TrainState::new(tiny_stft(), cfg.clone(), TrainConfig::default().adam(), seed).unwrap();
    state.model.insert_adapters(&cfg.adapter_placement, seed + 1).unwrap();
    state
}

#[test]
fn adapter_tuning_lowers_training_loss() {
    let data = records(&pool(1), Split::Train, 40, 2);
    let mut state = adapted_state(3);
    let cfg = TrainConfig {
        lr: 5e-3,
        epochs: 10,
        batch_size: 2,
        ..TrainConfig::default()
    };
    let history = train(&mut state, &data, &[], FreezePolicy::AdapterTune, &cfg).unwrap();
    assert_eq!(state.step, 200);
    let losses: Vec<f64> = history.epochs.iter().map(|r| r.train_loss).collect();
    let (first, last) = (losses[0], *losses.last().unwrap());
    assert!(last < first, "epoch losses {losses:?}");
}

#[test]
fn resuming_from_a_checkpoint_matches_uninterrupted_training() {
    let p = pool(4);
    let (data, val) = (records(&p, Split::Train, 12, 5), records(&p, Split::Val, 4, 6));
    let one_epoch = TrainConfig {
        epochs: 1,
        batch_size: 3,
        ..TrainConfig::default()
    };
    let two_epochs = TrainConfig {
        epochs: 2,
        ..one_epoch.clone()
    };

    let mut straight = adapted_state(7);
    let full = train(&mut straight, &data, &val, FreezePolicy::FineTune, &two_epochs).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.ckpt");
    let mut first = adapted_state(7);
    train(&mut first, &data, &val, FreezePolicy::FineTune, &one_epoch).unwrap();
    save_checkpoint(&first, &path).unwrap();
    let mut resumed = load_checkpoint(&path).unwrap();
    assert_eq!(resumed, first);
    let second = train(&mut resumed, &data, &val, FreezePolicy::FineTune, &one_epoch).unwrap();

    assert_eq!(resumed, straight);
    assert_eq!(second.epochs[0], full.epochs[1]);
}

#[test]
fn sources_and_mixtures_survive_a_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = pool(8).write(dir.path().join("sources")).unwrap();
    let manifest_path = dir.path().join("sources").join("manifest.tsv");
    manifest.save(&manifest_path).unwrap();

    let loaded = SourcePool::load_manifest(&manifest_path).unwrap();
    loaded.check_split_hygiene().unwrap();
    assert_eq!(loaded.clean.len(), 10);
    assert_eq!(loaded.noise.len(), 5);

    let test = records(&loaded, Split::Test, 6, 9);
    write_mixtures(dir.path().join("test"), &test).unwrap();
    let back = read_mixtures(dir.path().join("test")).unwrap();
    assert_eq!(back, test);
    for r in &back {
        assert!((r.realized_snr_db() - r.target_snr_db).abs() < 0.01);
    }
}
