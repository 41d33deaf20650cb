//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use drone_enhance::datagen::{
    mix_at_snr, synth_drone_noise, synth_generic_noise, synth_speech, GenericNoiseKind, NoiseSynthSpec, NoiseType,
    SpeakerProfile,
};
use drone_enhance::dsp::Waveform;
use drone_enhance::nn::{ComplexFeatureMap, Gradients, ParamId, ParameterStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const SR: u32 = 16_000;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub fn white(len: usize, seed: u64) -> Waveform<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..len)
        .map(|_| 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng) as f32)
        .collect();
    Waveform::new(samples, SR)
}

pub const ESTOI_FIXTURE_LEN: usize = 20;

/// Clean/processed pair `i` of the ESTOI reference fixture: 3 s of synthetic
/// speech degraded by white, drone, babble or smoothed-plus-pink noise at
/// SNRs from -15 to 4 dB.
pub fn estoi_fixture_pair(i: usize) -> (Waveform<f32>, Waveform<f32>) {
    let seed = 1000 + i as u64;
    let clean = synth_speech(&SpeakerProfile::random(seed), 3.0, SR, seed);
    let snr = -15.0 + i as f64;
    let n = clean.len();
    let (target, noise) = match i % 4 {
        0 => (clean.clone(), white(n, seed)),
        1 => {
            let spec = NoiseSynthSpec::random(NoiseType::Dynamic, seed);
            (clean.clone(), synth_drone_noise(&spec, 3.0, SR).unwrap())
        }
        2 => (
            clean.clone(),
            synth_generic_noise(GenericNoiseKind::Babble, 3.0, SR, seed),
        ),
        _ => {
            let width = 2 + i / 4;
            let smoothed = (0..n)
                .map(|t| {
                    let lo = t.saturating_sub(width - 1);
                    clean.samples[lo..=t].iter().sum::<f32>() / width as f32
                })
                .collect();
            (
                Waveform::new(smoothed, SR),
                synth_generic_noise(GenericNoiseKind::Pink, 3.0, SR, seed),
            )
        }
    };
    let processed = mix_at_snr(&target, &noise, snr, "s", "v").unwrap().mixture;
    (clean, processed)
}

pub fn random_map(channels: usize, freq: usize, time: usize, seed: u64) -> ComplexFeatureMap<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = channels * freq * time;
    let re = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let im = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ComplexFeatureMap::from_planes(channels, freq, time, re, im).unwrap()
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

const STEP: f64 = 1e-5;
const PROBES: usize = 16;

fn bump(m: &mut ComplexFeatureMap<f64>, plane: usize, i: usize, delta: f64) {
    let v = if plane == 0 { &mut m.re[i] } else { &mut m.im[i] };
    *v += delta;
}

/// Worst relative error between a layer's backward pass and central
/// differences of `L = <r, layer(x)>` for a random projection `r`, over
/// probed parameter and input entries.
pub fn layer_grad_error<C>(
    store: &ParameterStore<f64>,
    x: &ComplexFeatureMap<f64>,
    forward: impl Fn(&ParameterStore<f64>, &ComplexFeatureMap<f64>) -> (ComplexFeatureMap<f64>, C),
    backward: impl Fn(&ParameterStore<f64>, &C, &ComplexFeatureMap<f64>, &mut Gradients<f64>) -> ComplexFeatureMap<f64>,
    seed: u64,
) -> f64 {
    let (y, cache) = forward(store, x);
    let (c, f, t) = y.shape();
    let r = random_map(c, f, t, seed ^ 0x5eed);
    let loss = |s: &ParameterStore<f64>, x: &ComplexFeatureMap<f64>| {
        let (y, _) = forward(s, x);
        y.re.iter()
            .zip(&r.re)
            .chain(y.im.iter().zip(&r.im))
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let mut grads = Gradients::for_store(store);
    let dx = backward(store, &cache, &r, &mut grads);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let ids: Vec<ParamId> = store.iter().map(|(id, _)| id).collect();
    for id in ids {
        let n = store.get(id).len();
        let g = grads.get(id).expect("trainable parameter has a gradient slot");
        for _ in 0..PROBES.min(n) {
            let i = rng.gen_range(0..n);
            let mut s = store.clone();
            s.value_mut(id)[i] += STEP;
            let up = loss(&s, x);
            s.value_mut(id)[i] -= 2.0 * STEP;
            let down = loss(&s, x);
            worst = worst.max(rel_err(g[i], (up - down) / (2.0 * STEP)));
        }
    }
    for plane in 0..2 {
        for _ in 0..PROBES.min(x.len()) {
            let i = rng.gen_range(0..x.len());
            let mut xp = x.clone();
            bump(&mut xp, plane, i, STEP);
            let up = loss(store, &xp);
            bump(&mut xp, plane, i, -2.0 * STEP);
            let down = loss(store, &xp);
            let analytic = if plane == 0 { dx.re[i] } else { dx.im[i] };
            worst = worst.max(rel_err(analytic, (up - down) / (2.0 * STEP)));
        }
    }
    worst
}
