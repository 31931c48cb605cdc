//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes  "MADLCKPT"
//! version    u32
//! family     u8       1 = transformer, 2 = lstm
//! config     u32 length + UTF-8 JSON of ModelConfig (includes the seed)
//! count      u32      number of parameter blocks
//! per block: u32 name length, name bytes, u32 rank, rank × u64 dims,
//!            product(dims) × f64
//! ```
//!
//! All integers and floats are little-endian. Values are stored bit-exact.

use super::{ForecastModel, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MADLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(model: &ForecastModel) -> Vec<u8> {
    let config = serde_json::to_vec(model.config()).expect("config serializes");
    let mut out = Vec::with_capacity(64 + config.len() + model.param_count() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(model.family().code());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            offset: self.pos,
            reason: reason.into(),
        })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return self.fail(format!("truncated while reading {what}"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<ForecastModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != CHECKPOINT_MAGIC {
        r.pos = 0;
        return r.fail("bad magic");
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return r.fail(format!("unsupported version {version}"));
    }
    let family_pos = r.pos;
    let family = r.u8("family")?;
    let config_len = r.u32("config length")? as usize;
    let config_pos = r.pos;
    let config: ModelConfig = match serde_json::from_slice(r.take(config_len, "config")?) {
        Ok(c) => c,
        Err(e) => {
            r.pos = config_pos;
            return r.fail(format!("invalid config: {e}"));
        }
    };
    if config.family.code() != family {
        r.pos = family_pos;
        return r.fail(format!("family byte {family} disagrees with config"));
    }
    let count = r.u32("parameter count")? as usize;
    let mut stored = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name_pos = r.pos;
        let name = match std::str::from_utf8(r.take(name_len, "name")?) {
            Ok(s) => s.to_owned(),
            Err(_) => {
                r.pos = name_pos;
                return r.fail("parameter name is not UTF-8");
            }
        };
        let rank = r.u32("rank")? as usize;
        let dims_pos = r.pos;
        let dims = (0..rank)
            .map(|_| r.u64("dimension").map(|d| d as usize))
            .collect::<Result<Vec<usize>>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n.checked_mul(8).is_some());
        let Some(n) = n else {
            r.pos = dims_pos;
            return r.fail(format!("dimensions {dims:?} overflow"));
        };
        let raw = r.take(n * 8, "values")?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = match Tensor::new(dims, values) {
            Ok(t) => t,
            Err(e) => {
                r.pos = dims_pos;
                return r.fail(e.to_string());
            }
        };
        stored.push((name, tensor));
    }
    if r.pos != bytes.len() {
        return r.fail(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    let end = r.pos;
    ForecastModel::from_parameters(config, stored).map_err(|e| Error::Format {
        offset: end,
        reason: e.to_string(),
    })
}
