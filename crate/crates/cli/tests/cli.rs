use std::path::Path;
use std::process::{Command, Output};

use drone_enhance::datagen::{read_wav_native, write_wav};
use drone_enhance::dsp::Waveform;

const TINY: &str = r#"
[stft]
fft_size = 32
hop = 16

[model]
fft_size = 32
channels = [2, 3]
first_kernel_f = 3
first_stride = 2
kernel_f = 3
kernel_t = 2
stride = 2
fsmn_taps = 2
adapter_placement = [true, true]

[data]
crop_s = 1.0
pretrain_minutes = 0.1
adapt_minutes = 0.1
val_minutes = 0.034
test_minutes = 0.067

[data.synthetic]
clean_per_split = [3, 2, 2]
noise_per_split = [2, 1, 1]
clean_s = 1.5
noise_s = 1.5

[pretrain]
epochs = 1

[adapt]
epochs = 1
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drone-enhance"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    for args in [&["frobnicate"][..], &["enhance", "--bogus"], &[]] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains("Usage"), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn show_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["show-config", "--seed", "42"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("seed = 42\n"));
    let cfg = dir.path().join("shown.toml");
    std::fs::write(&cfg, &text).unwrap();
    let again = run(&["show-config", "--config", p(&cfg)]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn unknown_config_key_exits_1_on_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nchanels = [1]\n").unwrap();
    let o = run(&["show-config", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("chanels"), "{err}");
}

#[test]
fn evaluate_noisy_matches_the_mixing_snr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("synth");
    let o = run(&["synth", "--config", &cfg, "--out", p(&out), "--mixtures", "120"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&[
        "evaluate",
        "--testset",
        p(&out.join("mixtures")),
        "--out",
        p(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = String::from_utf8(o.stdout).unwrap();
    let si_snr: f64 = line
        .split('\t')
        .find_map(|f| f.strip_prefix("si_snr_db="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((si_snr + 15.0).abs() <= 1.0, "{line}");
    assert!(dir.path().join("eval_noisy.tsv").exists());

    // the written manifest feeds build-data
    let built = dir.path().join("built");
    let o = run(&[
        "build-data",
        "--config",
        &cfg,
        "--manifest",
        p(&out.join("manifest.tsv")),
        "--out",
        p(&built),
        "--count",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["evaluate", "--testset", p(&built)]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("\tn=3\t"));
}

#[test]
fn stage_commands_chain_through_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let base = dir.path().join("base.ckpt");
    let adapted = dir.path().join("adapted.ckpt");
    let tuned = dir.path().join("tuned.ckpt");
    let o = run(&["pretrain", "--config", &cfg, "--out", p(&base), "--max-steps", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("base.history.tsv").exists());
    let o = run(&[
        "adapt",
        "--config",
        &cfg,
        "--base",
        p(&base),
        "--out",
        p(&adapted),
        "--max-steps",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&[
        "finetune",
        "--config",
        &cfg,
        "--base",
        p(&base),
        "--out",
        p(&tuned),
        "--max-steps",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    // a base trained under another model config is refused
    let o = run(&["adapt", "--base", p(&base), "--out", p(&tuned)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mismatch"), "{}", stderr(&o));

    let input = dir.path().join("in.wav");
    let output = dir.path().join("out.wav");
    let tone = |rate: u32| Waveform::new((0..rate).map(|i| 0.3 * (i as f32 * 0.05).sin()).collect(), rate);
    write_wav(&input, &tone(16_000)).unwrap();
    let o = run(&["enhance", "--checkpoint", p(&adapted), p(&input), p(&output)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_wav_native(&output).unwrap().len(), 16_000);

    write_wav(&input, &tone(8_000)).unwrap();
    let o = run(&["enhance", "--checkpoint", p(&adapted), p(&input), p(&output)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("8000"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn protocol_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let outs = ["a", "b"].map(|n| dir.path().join(n));
    for out in &outs {
        let o = run(&[
            "protocol",
            "--config",
            &cfg,
            "--seed",
            "7",
            "--threads",
            "2",
            "--out",
            p(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let table = String::from_utf8(o.stdout).unwrap();
        for c in ["noisy", "without_tuning", "fine_tuning", "adapter_tuning"] {
            assert!(table.contains(&format!("\n{c}\t")), "{table}");
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(&outs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 10, "{names:?}");
    for name in names {
        let a = std::fs::read(outs[0].join(&name)).unwrap();
        let b = std::fs::read(outs[1].join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}
