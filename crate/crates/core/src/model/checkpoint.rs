//! Checkpoint container.
//!
//! ```text
//! magic      "MVCK"
//! u32        format version (1)
//! u32        metadata length in bytes
//! [u8]       metadata: UTF-8 `key=value` lines, keys sorted
//! u32        tensor count
//! per tensor:
//!   u32      name length, then the UTF-8 name
//!   u32      rank, then one u32 per dimension
//!   [f32]    values, row-major
//! ```
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::params::{Param, ParameterStore};
use super::{EncoderConfig, ModelConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MVCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub metadata: BTreeMap<String, String>,
    pub params: ParameterStore,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self, n: usize) -> std::result::Result<String, String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| e.to_string())
    }
}

impl Checkpoint {
    /// Metadata is seeded with the model configuration echo.
    pub fn new(params: ParameterStore, cfg: &ModelConfig) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("format_version".into(), CHECKPOINT_VERSION.to_string());
        metadata.insert("in_channels".into(), cfg.encoder.in_channels.to_string());
        metadata.insert(
            "stage_channels".into(),
            cfg.encoder
                .stage_channels
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        metadata.insert(
            "internal_dropout".into(),
            cfg.encoder.internal_dropout_p.to_string(),
        );
        metadata.insert("class_count".into(), cfg.class_count.to_string());
        Self { metadata, params }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        assert!(
            !key.contains(['=', '\n']) && !value.contains('\n'),
            "metadata entries must be single-line key=value"
        );
        self.metadata.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Config(format!("checkpoint metadata lacks `{key}`")))?;
        raw.parse().map_err(|_| {
            Error::Config(format!("checkpoint metadata `{key}` has bad value {raw:?}"))
        })
    }

    /// Rebuilds the model configuration from metadata and checks that the
    /// stored tensors match it.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let stages = self
            .get("stage_channels")
            .ok_or_else(|| Error::Config("checkpoint metadata lacks `stage_channels`".into()))?
            .split(',')
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Config("bad stage_channels in checkpoint metadata".into()))?;
        let cfg = ModelConfig {
            encoder: EncoderConfig {
                in_channels: self.parse("in_channels")?,
                stage_channels: stages,
                internal_dropout_p: self.parse("internal_dropout")?,
            },
            class_count: self.parse("class_count")?,
        };
        cfg.validate()?;
        cfg.check_params(&self.params)?;
        Ok(cfg)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let meta: String = self
            .metadata
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in self.params.params() {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
            for &d in &p.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &p.value {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != CHECKPOINT_MAGIC {
            return Err("not a checkpoint (bad magic)".into());
        }
        let version = cur.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let meta_len = cur.u32()? as usize;
        let meta = cur.string(meta_len)?;
        let mut metadata = BTreeMap::new();
        for line in meta.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("bad metadata line {line:?}"))?;
            metadata.insert(k.to_string(), v.to_string());
        }
        let count = cur.u32()? as usize;
        let mut params = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = cur.u32()? as usize;
            let name = cur.string(name_len)?;
            let rank = cur.u32()? as usize;
            let shape = (0..rank)
                .map(|_| cur.u32().map(|d| d as usize))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let raw = cur.take(n.checked_mul(4).ok_or("tensor too large")?)?;
            let value: Vec<f64> = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect();
            params.push(Param {
                grad: vec![0.0; n],
                name,
                shape,
                value,
            });
        }
        if cur.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - cur.pos));
        }
        let params = ParameterStore::new(params).map_err(|e| e.to_string())?;
        Ok(Self { metadata, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())
            .map_err(|e| Error::io(format!("writing checkpoint {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)
            .map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
        Self::from_bytes(&bytes).map_err(|message| Error::Format {
            path: path.to_path_buf(),
            message,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            encoder: EncoderConfig {
                in_channels: 2,
                stage_channels: vec![3, 4],
                internal_dropout_p: 0.0,
            },
            class_count: 5,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = small_cfg();
        let mut params = init_params(&cfg, 3).unwrap();
        params.round_to_f32();
        let mut ck = Checkpoint::new(params.clone(), &cfg);
        ck.set("epoch", 7);
        ck.set("val_mse", 1.25);
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.model_config().unwrap(), cfg);
        assert_eq!(back.parse::<u32>("epoch").unwrap(), 7);
    }

    #[test]
    fn unrounded_values_stabilize_after_one_trip() {
        let cfg = small_cfg();
        let ck = Checkpoint::new(init_params(&cfg, 3).unwrap(), &cfg);
        let once = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(once.to_bytes(), ck.to_bytes());
    }

    #[test]
    fn detects_corruption() {
        let cfg = small_cfg();
        let bytes = Checkpoint::new(init_params(&cfg, 0).unwrap(), &cfg).to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 2]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }

    #[test]
    fn config_mismatch_is_reported() {
        let cfg = small_cfg();
        let mut ck = Checkpoint::new(init_params(&cfg, 0).unwrap(), &cfg);
        ck.set("in_channels", 1);
        assert!(matches!(ck.model_config(), Err(Error::Shape(_))));
    }
}
