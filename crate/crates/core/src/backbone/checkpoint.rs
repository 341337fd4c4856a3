//! Checkpoint container.
//!
//! All integers little-endian:
//!
//! ```text
//! magic        4 bytes  "EVTC"
//! version      u16      1
//! meta_len     u32
//! meta         meta_len bytes of UTF-8 JSON {"model": ModelConfig, "repr": ReprConfig}
//! tensor_count u32
//! tensor_count times:
//!   name_len   u16
//!   name       name_len bytes of UTF-8
//!   rows       u32
//!   cols       u32
//!   data       rows * cols f64, row-major
//! ```
//!
//! Tensors appear in [`ModelParams::tensors`] order and must match the
//! names and shapes the stored model config prescribes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::{ModelParams, NamedTensor};
use crate::error::{Error, Result};
use crate::numeric::Matrix;
use crate::representation::ReprConfig;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"EVTC";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    model: ModelConfig,
    repr: ReprConfig,
}

/// Trained parameters together with the representation they expect.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub repr: ReprConfig,
}

impl Checkpoint {
    pub fn new(params: ModelParams, repr: ReprConfig) -> Self {
        Self { params, repr }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&Meta {
            model: self.params.config().clone(),
            repr: self.repr.clone(),
        })?;
        let mut out = Vec::with_capacity(16 + meta.len() + 8 * self.params.count());
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&len_u32(meta.len(), "meta")?.to_le_bytes());
        out.extend_from_slice(&meta);
        let tensors = self.params.tensors();
        out.extend_from_slice(&len_u32(tensors.len(), "tensor count")?.to_le_bytes());
        for t in tensors {
            let name = t.name.as_bytes();
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::Checkpoint(format!("tensor name {} too long", t.name)))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name);
            out.extend_from_slice(&len_u32(t.value.rows(), "rows")?.to_le_bytes());
            out.extend_from_slice(&len_u32(t.value.cols(), "cols")?.to_le_bytes());
            for v in t.value.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::BadHeader("checkpoint magic mismatch".into()));
        }
        let version = r.u16("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::BadHeader(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let meta_len = r.u32("meta length")? as usize;
        let meta: Meta = serde_json::from_slice(r.take(meta_len, "meta")?)?;
        meta.model.validate()?;
        meta.repr.validate()?;

        let count = r.u32("tensor count")? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for i in 0..count {
            let name_len = usize::from(r.u16("name length")?);
            let name = std::str::from_utf8(r.take(name_len, "name")?)
                .map_err(|_| Error::Checkpoint(format!("tensor {i} name is not UTF-8")))?
                .to_owned();
            let rows = r.u32("rows")? as usize;
            let cols = r.u32("cols")? as usize;
            let n = rows
                .checked_mul(cols)
                .and_then(|n| n.checked_mul(8))
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name} too large")))?;
            let raw = r.take(n, "tensor data")?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let value = Matrix::from_vec(rows, cols, data)
                .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
            tensors.push(NamedTensor { name, value });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            params: ModelParams::from_tensors(&meta.model, tensors)?,
            repr: meta.repr,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

fn len_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Checkpoint(format!("{what} {n} does not fit in u32")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Truncated(format!("checkpoint ends inside {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2, what)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Checkpoint {
        let cfg = ModelConfig {
            dim: 8,
            latents: 4,
            heads: 2,
            self_blocks: 1,
            grid_h: 2,
            grid_w: 3,
            token_in: 8,
            pos_bands: 2,
            ..ModelConfig::default()
        };
        Checkpoint::new(ModelParams::init(&cfg, 5).unwrap(), ReprConfig::default())
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = tiny();
        let bytes = c.encode().unwrap();
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.encode().unwrap(), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = tiny().encode().unwrap();
        assert_eq!(&bytes[..4], b"EVTC");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        let meta_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let meta: serde_json::Value = serde_json::from_slice(&bytes[10..10 + meta_len]).unwrap();
        assert_eq!(meta["model"]["dim"], 8);
        assert_eq!(meta["repr"]["patch_size"], 6);
    }

    #[test]
    fn rejects_damage() {
        let bytes = tiny().encode().unwrap();
        for cut in [0, 3, 9, 20, bytes.len() - 1] {
            assert!(Checkpoint::decode(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::decode(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(
            Checkpoint::decode(&magic),
            Err(Error::BadHeader(_))
        ));
        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(Checkpoint::decode(&nan).is_err());
    }
}
