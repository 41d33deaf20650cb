//! Binary checkpoints of a [`TrainState`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "DEHCKPT\0" | u32 version
//! u32 header length | JSON {"stft": StftConfig, "model": ModelConfig}
//! u32 block count | u8 adapter-present flag per encoder block
//! u32 param count | per param: u16 name length, name, u8 group tag,
//!                   u8 frozen, u8 rank, u64 dims.., u64 offset, u64 length
//! u64 value count | f32 values
//! f64 lr, beta1, beta2, eps | u64 t | u32 moment arrays | per array:
//!                   u64 length, f32 m values, f32 v values
//! u64 step | u64 epoch
//! 32-byte RNG seed | u64 stream | u128 word position
//! u32 CRC-32 of everything before it
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{Adam, AdamConfig};
use super::trainer::TrainState;
use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::nn::{Model, ModelConfig, ParamGroup};

const MAGIC: &[u8; 8] = b"DEHCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    stft: StftConfig,
    model: ModelConfig,
}

struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f32s(&mut self, v: &[f32]) {
        v.iter().for_each(|x| self.bytes(&x.to_le_bytes()));
    }
}

/// Serializes `state` to checkpoint bytes.
pub fn encode_checkpoint(state: &TrainState) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.bytes(MAGIC);
    w.u32(CHECKPOINT_VERSION);
    let header = serde_json::to_vec(&Header {
        stft: state.stft,
        model: state.model.config().clone(),
    })?;
    w.u32(header.len() as u32);
    w.bytes(&header);

    let flags = state.model.adapters_present();
    w.u32(flags.len() as u32);
    flags.iter().for_each(|&f| w.u8(f as u8));

    let store = &state.model.store;
    w.u32(store.len() as u32);
    let mut offset = 0u64;
    for (_, p) in store.iter() {
        w.u16(p.name.len() as u16);
        w.bytes(p.name.as_bytes());
        w.u8(p.group.tag());
        w.u8(p.frozen as u8);
        w.u8(p.shape.len() as u8);
        p.shape.iter().for_each(|&d| w.u64(d as u64));
        w.u64(offset);
        w.u64(p.len() as u64);
        offset += p.len() as u64;
    }
    w.u64(offset);
    for (_, p) in store.iter() {
        w.f32s(&p.value);
    }

    let opt = &state.optimizer;
    w.f64(opt.config.lr);
    w.f64(opt.config.beta1);
    w.f64(opt.config.beta2);
    w.f64(opt.config.eps);
    w.u64(opt.t);
    w.u32(opt.m.len() as u32);
    for (m, v) in opt.m.iter().zip(&opt.v) {
        w.u64(m.len() as u64);
        w.f32s(m);
        w.f32s(v);
    }

    w.u64(state.step);
    w.u64(state.epoch);
    w.bytes(&state.rng.get_seed());
    w.u64(state.rng.get_stream());
    w.bytes(&state.rng.get_word_pos().to_le_bytes());

    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    Ok(w.0)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("unexpected end of data at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> std::result::Result<[u8; N], String> {
        Ok(self.take(N)?.try_into().expect("slice length"))
    }
    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn len(&mut self) -> std::result::Result<usize, String> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| format!("length {v} out of range"))
    }
    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn f32s(&mut self, n: usize) -> std::result::Result<Vec<f32>, String> {
        let bytes = self.take(n.checked_mul(4).ok_or("length overflow")?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk")))
            .collect())
    }
}

enum DecodeError {
    Format(String),
    Other(Error),
}

impl From<String> for DecodeError {
    fn from(s: String) -> Self {
        DecodeError::Format(s)
    }
}

impl From<&str> for DecodeError {
    fn from(s: &str) -> Self {
        DecodeError::Format(s.to_string())
    }
}

fn decode_inner(bytes: &[u8], expected: Option<&ModelConfig>) -> std::result::Result<TrainState, DecodeError> {
    if bytes.len() < MAGIC.len() + 8 {
        return Err("file too short".into());
    }
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    if &body[..MAGIC.len()] != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let mut r = Reader {
        buf: body,
        pos: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported version {version}, expected {CHECKPOINT_VERSION}").into());
    }
    if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().expect("crc")) {
        return Err("checksum mismatch (truncated or corrupt file)".into());
    }
    let header_len = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len)?).map_err(|e| format!("bad header: {e}"))?;
    if let Some(exp) = expected {
        if *exp != header.model {
            return Err(DecodeError::Other(Error::ConfigMismatch(format!(
                "checkpoint model config {} differs from expected {}",
                serde_json::to_string(&header.model).unwrap_or_default(),
                serde_json::to_string(exp).unwrap_or_default()
            ))));
        }
    }
    let n_flags = r.u32()? as usize;
    let flags = (0..n_flags)
        .map(|_| r.u8().map(|b| b != 0))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut model = Model::<f32>::new(header.model.clone(), 0).map_err(DecodeError::Other)?;
    model.insert_adapters(&flags, 0).map_err(DecodeError::Other)?;
    if model.adapters_present() != flags {
        return Err("adapter flags do not match the model layout".into());
    }

    let n_params = r.u32()? as usize;
    if n_params != model.store.len() {
        return Err(format!("{n_params} parameters stored, model has {}", model.store.len()).into());
    }
    let mut table = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| "parameter name is not UTF-8")?;
        let group = ParamGroup::from_tag(r.u8()?).ok_or("unknown parameter group")?;
        let frozen = r.u8()? != 0;
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.len()).collect::<std::result::Result<Vec<_>, _>>()?;
        let offset = r.u64()?;
        let len = r.len()?;
        table.push((name, group, frozen, shape, offset, len));
    }
    let total = r.len()?;
    let values = r.f32s(total)?;
    let mut expect_offset = 0u64;
    for ((name, group, frozen, shape, offset, len), p) in table.into_iter().zip(model.store.iter_mut()) {
        if name != p.name || group != p.group || shape != p.shape || len != p.len() || offset != expect_offset {
            return Err(format!("parameter table entry {name:?} does not match the model layout").into());
        }
        let start = offset as usize;
        p.value
            .copy_from_slice(values.get(start..start + len).ok_or("parameter payload out of range")?);
        p.frozen = frozen;
        expect_offset += len as u64;
    }
    if expect_offset as usize != total {
        return Err("parameter payload length does not match the table".into());
    }

    let config = AdamConfig {
        lr: r.f64()?,
        beta1: r.f64()?,
        beta2: r.f64()?,
        eps: r.f64()?,
    };
    let mut optimizer = Adam::new(config);
    optimizer.t = r.u64()?;
    let n_moments = r.u32()? as usize;
    if n_moments > model.store.len() {
        return Err("more optimizer moment arrays than parameters".into());
    }
    for (_, p) in model.store.iter().take(n_moments) {
        let len = r.len()?;
        if len != p.len() {
            return Err(format!("moment array for {:?} has {len} values, expected {}", p.name, p.len()).into());
        }
        optimizer.m.push(r.f32s(len)?);
        optimizer.v.push(r.f32s(len)?);
    }

    let step = r.u64()?;
    let epoch = r.u64()?;
    let seed: [u8; 32] = r.array()?;
    let stream = r.u64()?;
    let word_pos = u128::from_le_bytes(r.array()?);
    if r.pos != body.len() {
        return Err(format!("{} trailing bytes", body.len() - r.pos).into());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);

    header.stft.validate().map_err(DecodeError::Other)?;
    Ok(TrainState {
        stft: header.stft,
        model,
        optimizer,
        step,
        epoch,
        rng,
    })
}

/// Parses checkpoint bytes; `origin` names the source in errors. When
/// `expected` is given, a different stored model config is a
/// [`Error::ConfigMismatch`].
pub fn decode_checkpoint(bytes: &[u8], origin: &Path, expected: Option<&ModelConfig>) -> Result<TrainState> {
    decode_inner(bytes, expected).map_err(|e| match e {
        DecodeError::Format(msg) => Error::Format {
            path: origin.to_path_buf(),
            msg,
        },
        DecodeError::Other(e) => e,
    })
}

pub fn save_checkpoint(state: &TrainState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(state)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainState> {
    load_checkpoint_expecting(path, None)
}

pub fn load_checkpoint_expecting(path: impl AsRef<Path>, expected: Option<&ModelConfig>) -> Result<TrainState> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path, expected)
}
