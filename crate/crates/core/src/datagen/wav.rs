//! WAV ingestion and output.
//!
//! Reads PCM16 or IEEE float32, keeps the first channel, and decodes PCM16
//! as `k / 32768`. Writes mono PCM16 with saturation.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::resample::resample;
use crate::dsp::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

fn wav_err(path: &Path, source: hound::Error) -> Error {
    match source {
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::FormatError(msg) => Error::Format {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        },
        source => Error::Wav {
            path: path.to_path_buf(),
            source,
        },
    }
}

/// Once the file is open, short reads mean a malformed file.
fn decode_err(path: &Path, source: hound::Error) -> Error {
    match source {
        hound::Error::IoError(e) => Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        },
        source => wav_err(path, source),
    }
}

/// Decodes the first channel at the file's own sample rate.
pub fn read_wav_native(path: impl AsRef<Path>) -> Result<Waveform<f32>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = WavReader::new(std::io::BufReader::new(file)).map_err(|e| decode_err(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .step_by(channels)
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| decode_err(path, e))?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .step_by(channels)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| decode_err(path, e))?,
        (format, bits) => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("unsupported sample format {format:?} with {bits} bits; expected PCM16 or float32"),
            })
        }
    };
    let w = Waveform::new(samples, spec.sample_rate);
    w.validate().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    Ok(w)
}

/// Decodes the first channel and resamples to 16 kHz if needed.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform<f32>> {
    let w = read_wav_native(path)?;
    if w.sample_rate == SAMPLE_RATE {
        return Ok(w);
    }
    log::debug!("resampling {} Hz input to {SAMPLE_RATE} Hz", w.sample_rate);
    let x: Vec<f64> = w.samples.iter().map(|&v| v as f64).collect();
    let y = resample(&x, w.sample_rate, SAMPLE_RATE);
    Ok(Waveform::new(y.into_iter().map(|v| v as f32).collect(), SAMPLE_RATE))
}

fn to_pcm16(v: f32) -> i16 {
    (v as f64 * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Writes mono PCM16, saturating out-of-range samples.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform<f32>) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &v in &w.samples {
        writer.write_sample(to_pcm16(v)).map_err(|e| wav_err(path, e))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}

/// Writes mono IEEE float32, preserving samples exactly.
pub fn write_wav_f32(path: impl AsRef<Path>, w: &Waveform<f32>) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &v in &w.samples {
        writer.write_sample(v).map_err(|e| wav_err(path, e))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}
