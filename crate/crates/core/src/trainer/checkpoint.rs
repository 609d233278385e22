//! Versioned binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes   "SSLSODCK"
//! version    u32
//! header_len u64
//! header     header_len bytes of UTF-8 JSON (see `Header`)
//! data       concatenated tensor payloads in the header's dtype
//! ```
//!
//! Each tensor entry in the header records its element offset and length
//! into the data section, so readers can validate every range before
//! touching the payload.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sslsod_tensor::{ParamStore, Real, Sgd, Tensor};

use crate::error::{Error, Result};
use crate::network::{transfer_weights, TransferPolicy, TransferReport};

pub const MAGIC: &[u8; 8] = b"SSLSODCK";
pub const FORMAT_VERSION: u32 = 1;

/// Which training procedure produced a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageTag {
    #[serde(rename = "stage1_rgb2depth")]
    Stage1RgbToDepth,
    #[serde(rename = "stage1_depth2rgb")]
    Stage1DepthToRgb,
    #[serde(rename = "stage2_contour")]
    Stage2Contour,
    DownstreamSod,
}

impl StageTag {
    pub fn as_str(self) -> &'static str {
        match self {
            StageTag::Stage1RgbToDepth => "stage1_rgb2depth",
            StageTag::Stage1DepthToRgb => "stage1_depth2rgb",
            StageTag::Stage2Contour => "stage2_contour",
            StageTag::DownstreamSod => "downstream_sod",
        }
    }
}

impl fmt::Display for StageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything in the header except the tensor index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub stage: StageTag,
    pub fingerprint: String,
    pub iteration: u64,
    /// Model description sufficient to rebuild the parameter layout.
    pub architecture: serde_json::Value,
    pub rng_seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 4],
    offset: u64,
    len: u64,
    trainable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    #[serde(flatten)]
    meta: CheckpointMeta,
    dtype: String,
    tensors: Vec<TensorEntry>,
    /// Optimizer momentum buffers, keyed by parameter name.
    momentum: Vec<TensorEntry>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint<T: Real> {
    pub meta: CheckpointMeta,
    pub params: ParamStore<T>,
    pub momentum: Vec<(String, Vec<T>)>,
}

fn corrupt(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::CorruptCheckpoint { field: field.into(), reason: reason.into() }
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, field: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(corrupt(field, format!("needs {n} bytes, {} left", bytes.len())));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn decode<T: Real>(data: &[u8], dtype: &str, offset: u64, len: u64, field: &str) -> Result<Vec<T>> {
    let width = match dtype {
        "f32" => 4,
        "f64" => 8,
        other => return Err(corrupt("dtype", format!("unsupported element type `{other}`"))),
    };
    let start = usize::try_from(offset).ok().and_then(|o| o.checked_mul(width));
    let end = usize::try_from(offset.saturating_add(len)).ok().and_then(|e| e.checked_mul(width));
    let (start, end) = match (start, end) {
        (Some(s), Some(e)) if e <= data.len() => (s, e),
        _ => return Err(corrupt(field, format!("data range {offset}+{len} lies outside the payload"))),
    };
    let raw = &data[start..end];
    Ok(match dtype {
        "f32" => raw.chunks_exact(4).map(|c| T::of(f32::read_le(c) as f64)).collect(),
        _ => raw.chunks_exact(8).map(|c| T::of(f64::read_le(c))).collect(),
    })
}

impl<T: Real> Checkpoint<T> {
    pub fn new(meta: CheckpointMeta, params: ParamStore<T>) -> Self {
        Self { meta, params, momentum: Vec::new() }
    }

    /// Records the optimizer's momentum buffers under their parameter names.
    pub fn with_optimizer(mut self, opt: &Sgd<T>) -> Self {
        self.momentum = opt.buffers().map(|(id, b)| (self.params.name(id).to_string(), b.to_vec())).collect();
        self
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut data = Vec::new();
        let mut offset = 0u64;
        let mut entry = |name: &str, shape: [usize; 4], values: &[T], trainable: bool, data: &mut Vec<u8>| {
            for &v in values {
                v.write_le(data);
            }
            let e = TensorEntry { name: name.to_string(), shape, offset, len: values.len() as u64, trainable };
            offset += values.len() as u64;
            e
        };
        let tensors: Vec<TensorEntry> = self
            .params
            .iter()
            .map(|(_, e)| entry(&e.name, e.value.shape(), e.value.data(), e.trainable, &mut data))
            .collect();
        let momentum: Vec<TensorEntry> = self
            .momentum
            .iter()
            .map(|(name, values)| entry(name, [values.len(), 1, 1, 1], values, true, &mut data))
            .collect();
        let header = Header { meta: self.meta.clone(), dtype: T::DTYPE.to_string(), tensors, momentum };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(20 + json.len() + data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&data);
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let b = &mut bytes;
        if take(b, 8, "magic")? != MAGIC {
            return Err(corrupt("magic", "not a checkpoint file"));
        }
        let version = u32::from_le_bytes(take(b, 4, "version")?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(corrupt("version", format!("unsupported format version {version}")));
        }
        let header_len = u64::from_le_bytes(take(b, 8, "header_len")?.try_into().expect("8 bytes"));
        let header_len = usize::try_from(header_len).map_err(|_| corrupt("header_len", "does not fit in memory"))?;
        let header: Header =
            serde_json::from_slice(take(b, header_len, "header")?).map_err(|e| corrupt("header", e.to_string()))?;
        let data = *b;

        let expected: u64 = header.tensors.iter().chain(&header.momentum).map(|t| t.len).sum();
        let width = if header.dtype == "f64" { 8 } else { 4 };
        if (data.len() as u64) < expected * width {
            return Err(corrupt(
                "data",
                format!("payload holds {} bytes, index needs {}", data.len(), expected * width),
            ));
        }

        let mut params = ParamStore::new();
        for t in &header.tensors {
            let field = format!("tensors.{}", t.name);
            let values = decode::<T>(data, &header.dtype, t.offset, t.len, &field)?;
            if t.shape.iter().product::<usize>() as u64 != t.len {
                return Err(corrupt(field, format!("shape {:?} disagrees with length {}", t.shape, t.len)));
            }
            if params.get(&t.name).is_some() {
                return Err(corrupt(field, "duplicate tensor name"));
            }
            let id = params.insert(t.name.clone(), Tensor::from_vec(t.shape, values));
            params.set_trainable(id, t.trainable);
        }
        let mut momentum = Vec::with_capacity(header.momentum.len());
        for t in &header.momentum {
            let field = format!("momentum.{}", t.name);
            momentum.push((t.name.clone(), decode::<T>(data, &header.dtype, t.offset, t.len, &field)?));
        }
        Ok(Self { meta: header.meta, params, momentum })
    }

    /// Atomic write: the file appears complete or not at all.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(&self.to_bytes()).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn expect_stage(&self, stage: StageTag) -> Result<()> {
        if self.meta.stage != stage {
            return Err(Error::StageMismatch { expected: stage.to_string(), found: self.meta.stage.to_string() });
        }
        Ok(())
    }

    pub fn check_fingerprint(&self, expected: &str) -> Result<()> {
        if self.meta.fingerprint != expected {
            return Err(Error::Fingerprint { expected: expected.to_string(), found: self.meta.fingerprint.clone() });
        }
        Ok(())
    }

    /// Copies the stored parameters into `target`.
    ///
    /// Without `force`, the fingerprint must match and every target tensor
    /// must be present with the same shape. With `force`, whatever matches by
    /// name and shape is loaded and the rest is listed in the report.
    pub fn restore_into(&self, target: &mut ParamStore<T>, fingerprint: &str, force: bool) -> Result<TransferReport> {
        if !force {
            self.check_fingerprint(fingerprint)?;
        }
        let report = transfer_weights(&[&self.params], target, TransferPolicy::AllMatching)?;
        if !force && !report.reinitialized.is_empty() {
            return Err(Error::Incompatible(format!(
                "{} target tensors missing or misshapen, first `{}`",
                report.reinitialized.len(),
                report.reinitialized[0]
            )));
        }
        Ok(report)
    }

    /// Reinstates stored momentum buffers for parameters that exist in `params`.
    pub fn restore_optimizer(&self, params: &ParamStore<T>, opt: &mut Sgd<T>) {
        for (name, values) in &self.momentum {
            if let Some(id) = params.id(name) {
                if values.len() == params.value(id).len() {
                    opt.set_buffer(id, values.clone());
                }
            }
        }
    }
}
