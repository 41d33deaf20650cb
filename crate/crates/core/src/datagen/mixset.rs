//! Mixture sets on disk: float32 WAVs per record plus an index file
//! `mixtures.tsv` with columns `index clean_id noise_id target_snr_db
//! applied_noise_gain`. Float storage keeps every record's mixing
//! invariant exact after reloading.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::mix::MixtureRecord;
use super::wav::{read_wav_native, write_wav_f32};
use crate::error::{Error, Result};

pub const INDEX_FILE: &str = "mixtures.tsv";

fn paths(dir: &Path, i: usize) -> [PathBuf; 3] {
    ["clean", "noise", "mixture"].map(|k| dir.join(format!("{i:05}_{k}.wav")))
}

pub fn write_mixtures(dir: impl AsRef<Path>, records: &[MixtureRecord]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = String::from("index\tclean_id\tnoise_id\ttarget_snr_db\tapplied_noise_gain\n");
    for (i, r) in records.iter().enumerate() {
        let [c, n, m] = paths(dir, i);
        write_wav_f32(c, &r.clean)?;
        write_wav_f32(n, &r.noise)?;
        write_wav_f32(m, &r.mixture)?;
        // `{:?}` prints the shortest representation that parses back exactly
        let _ = writeln!(
            index,
            "{i}\t{}\t{}\t{:?}\t{:?}",
            r.clean_id, r.noise_id, r.target_snr_db, r.applied_noise_gain
        );
    }
    let p = dir.join(INDEX_FILE);
    std::fs::write(&p, index).map_err(|e| Error::io(&p, e))
}

pub fn read_mixtures(dir: impl AsRef<Path>) -> Result<Vec<MixtureRecord>> {
    let dir = dir.as_ref();
    let index_path = dir.join(INDEX_FILE);
    let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let bad = |line: usize, msg: &str| Error::Format {
        path: index_path.clone(),
        msg: format!("line {line}: {msg}"),
    };
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(ln + 1, "expected 5 tab-separated fields"));
        }
        let i: usize = f[0].parse().map_err(|_| bad(ln + 1, "bad index"))?;
        let snr: f64 = f[3].parse().map_err(|_| bad(ln + 1, "bad target SNR"))?;
        let gain: f64 = f[4].parse().map_err(|_| bad(ln + 1, "bad gain"))?;
        let [c, n, m] = paths(dir, i);
        out.push(MixtureRecord {
            clean: read_wav_native(c)?,
            noise: read_wav_native(n)?,
            mixture: read_wav_native(m)?,
            target_snr_db: snr,
            applied_noise_gain: gain,
            clean_id: f[1].to_string(),
            noise_id: f[2].to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::mix::mix_at_snr;
    use crate::dsp::Waveform;

    #[test]
    fn round_trip_is_exact() {
        let s = Waveform::new((0..300).map(|i| (i as f32 * 0.1).sin()).collect(), 16_000);
        let v = Waveform::new((0..300).map(|i| (i as f32 * 0.37).cos()).collect(), 16_000);
        let recs = vec![
            mix_at_snr(&s, &v, -12.3, "s0", "v0").unwrap(),
            mix_at_snr(&v, &s, 4.0, "s1", "v1").unwrap(),
        ];
        let dir = tempfile::tempdir().unwrap();
        write_mixtures(dir.path(), &recs).unwrap();
        assert_eq!(read_mixtures(dir.path()).unwrap(), recs);
    }

    #[test]
    fn missing_index_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_mixtures(dir.path()), Err(Error::Io { .. })));
    }
}
