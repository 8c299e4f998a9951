//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "SHALLOWK"
//! version    u32      1
//! precision  u8       4 (f32 blocks) or 8 (f64 blocks)
//! header_len u32
//! header     header_len bytes of UTF-8 text:
//!              bn_epsilon = <f64>
//!              bn_momentum = <f64>
//!              seed = <u64>
//!              epoch = <u64>
//!              spec:
//!              <architecture text>
//! blocks     u32 block count, then per block a u64 element count followed
//!            by that many floats of the flagged precision
//! ```
//!
//! Blocks follow layer order: conv and dense layers store weights then bias;
//! batch-norm layers store scale, shift, running mean, running variance.

use crate::arch::ArchSpec;
use crate::error::{Error, Result};
use crate::layers::batchnorm::{DEFAULT_EPSILON, DEFAULT_MOMENTUM};
use crate::model::{Layer, Network};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"SHALLOWK";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    fn tag(self) -> u8 {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: u64,
    pub precision: Precision,
}

fn blocks(net: &Network) -> Vec<&Tensor> {
    net.layers()
        .iter()
        .flat_map(|l| match l {
            Layer::Conv(c) => vec![&c.weights, &c.bias],
            Layer::Dense(d) => vec![&d.weights, &d.bias],
            Layer::BatchNorm(b) => vec![&b.scale, &b.shift, &b.running_mean, &b.running_var],
            _ => Vec::new(),
        })
        .collect()
}

fn blocks_mut(net: &mut Network) -> Vec<&mut Tensor> {
    net.layers_mut()
        .iter_mut()
        .flat_map(|l| match l {
            Layer::Conv(c) => vec![&mut c.weights, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weights, &mut d.bias],
            Layer::BatchNorm(b) => vec![&mut b.scale, &mut b.shift, &mut b.running_mean, &mut b.running_var],
            _ => Vec::new(),
        })
        .collect()
}

/// Batch-norm hyper-parameters shared by every batch-norm layer.
fn bn_settings(net: &Network) -> Result<(f64, f64)> {
    let mut found: Option<(f64, f64)> = None;
    for l in net.layers() {
        if let Layer::BatchNorm(b) = l {
            match found {
                None => found = Some((b.epsilon, b.momentum)),
                Some(s) if s != (b.epsilon, b.momentum) => {
                    return Err(Error::InvalidParameter("batch-norm layers disagree on epsilon/momentum".into()))
                }
                _ => {}
            }
        }
    }
    Ok(found.unwrap_or((DEFAULT_EPSILON, DEFAULT_MOMENTUM)))
}

pub fn save_checkpoint(net: &Network, meta: &CheckpointMeta) -> Result<Vec<u8>> {
    let (eps, momentum) = bn_settings(net)?;
    let header = format!(
        "bn_epsilon = {eps:?}\nbn_momentum = {momentum:?}\nseed = {}\nepoch = {}\nspec:\n{}",
        meta.seed,
        meta.epoch,
        net.spec().to_text()
    );
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(meta.precision.tag());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    let blocks = blocks(net);
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for t in blocks {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for &v in t.data() {
            match meta.precision {
                Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
                Precision::F32 => {
                    let s = v as f32;
                    if !s.is_finite() {
                        return Err(Error::NonFinite("checkpoint weight after f32 conversion"));
                    }
                    out.extend_from_slice(&s.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::CorruptCheckpoint(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

fn header_value<'h>(lines: &mut impl Iterator<Item = &'h str>, key: &str) -> Result<&'h str> {
    let line = lines.next().ok_or_else(|| Error::CorruptCheckpoint(format!("header missing {key}")))?;
    match line.split_once('=') {
        Some((k, v)) if k.trim() == key => Ok(v.trim()),
        _ => Err(Error::CorruptCheckpoint(format!("expected header key {key}, found {line:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, key: &str) -> Result<T> {
    s.parse().map_err(|_| Error::CorruptCheckpoint(format!("bad value {s:?} for {key}")))
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<(Network, CheckpointMeta)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.array()?);
    if version != VERSION {
        return Err(Error::CorruptCheckpoint(format!("unsupported version {version}")));
    }
    let precision = match r.array::<1>()?[0] {
        4 => Precision::F32,
        8 => Precision::F64,
        t => return Err(Error::CorruptCheckpoint(format!("unknown precision tag {t}"))),
    };
    let header_len = u32::from_le_bytes(r.array()?) as usize;
    let header = std::str::from_utf8(r.take(header_len)?).map_err(|_| Error::CorruptCheckpoint("header is not UTF-8".into()))?;

    let mut lines = header.lines();
    let eps: f64 = parse_num(header_value(&mut lines, "bn_epsilon")?, "bn_epsilon")?;
    let momentum: f64 = parse_num(header_value(&mut lines, "bn_momentum")?, "bn_momentum")?;
    let seed: u64 = parse_num(header_value(&mut lines, "seed")?, "seed")?;
    let epoch: u64 = parse_num(header_value(&mut lines, "epoch")?, "epoch")?;
    let (_, spec_text) = header.split_once("\nspec:\n").ok_or_else(|| Error::CorruptCheckpoint("header missing spec".into()))?;
    let spec = ArchSpec::from_text(spec_text).map_err(|e| Error::CorruptCheckpoint(format!("spec: {e}")))?;

    let mut net = Network::zeroed(&spec).map_err(|e| Error::CorruptCheckpoint(format!("spec: {e}")))?;
    for l in net.layers_mut() {
        if let Layer::BatchNorm(b) = l {
            b.epsilon = eps;
            b.momentum = momentum;
        }
    }
    let count = u32::from_le_bytes(r.array()?) as usize;
    let mut targets = blocks_mut(&mut net);
    if count != targets.len() {
        return Err(Error::CorruptCheckpoint(format!("architecture needs {} blocks, file has {count}", targets.len())));
    }
    for (i, t) in targets.iter_mut().enumerate() {
        let n = u64::from_le_bytes(r.array()?) as usize;
        if n != t.len() {
            return Err(Error::CorruptCheckpoint(format!("block {i} holds {n} values, expected {}", t.len())));
        }
        let raw = r.take(n.checked_mul(precision.tag() as usize).ok_or_else(|| Error::CorruptCheckpoint("block too large".into()))?)?;
        let values: Vec<f64> = match precision {
            Precision::F64 => raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            Precision::F32 => raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::CorruptCheckpoint(format!("block {i} contains non-finite values")));
        }
        t.data_mut().copy_from_slice(&values);
    }
    if r.pos != bytes.len() {
        return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((net, CheckpointMeta { seed, epoch, precision }))
}
