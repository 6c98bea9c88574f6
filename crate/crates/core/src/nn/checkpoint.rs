//! Binary checkpoint layout, all integers little-endian:
//!
//! ```text
//! "BCNN1" | u32 model count | per model:
//!     u32 header length | JSON {"layers": [...], "input_shape": [...]}
//!     u64 parameter count | f32 parameters in Network::params order
//! ```

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{LayerSpec, Network, NnError};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"BCNN1";

#[derive(Serialize, Deserialize)]
struct Header {
    layers: Vec<LayerSpec>,
    input_shape: Vec<usize>,
}

pub fn encode_checkpoint(models: &[&Network<f32>]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(models.len() as u32).to_le_bytes());
    for net in models {
        let header = Header { layers: net.layers.clone(), input_shape: net.input_shape.clone() };
        let json = serde_json::to_vec(&header).expect("layer specs serialize");
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(net.param_count() as u64).to_le_bytes());
        for p in &net.params {
            for v in &p.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| NnError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<Network<f32>>, NnError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(CHECKPOINT_MAGIC.len()).ok() != Some(&CHECKPOINT_MAGIC[..]) {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let count = r.u32()?;
    let mut models = Vec::new();
    for m in 0..count {
        let len = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(len)?)
            .map_err(|e| NnError::Checkpoint(format!("model {m} header: {e}")))?;
        let mut net = Network::<f32>::zeroed(&header.layers, &header.input_shape)?;
        let n = r.u64()?;
        if n != net.param_count() as u64 {
            return Err(NnError::Checkpoint(format!(
                "model {m}: {n} parameters stored, layers need {}",
                net.param_count()
            )));
        }
        for p in &mut net.params {
            for v in &mut p.data {
                *v = f32::from_le_bytes(r.take(4)?.try_into().unwrap());
            }
        }
        models.push(net);
    }
    if r.pos != bytes.len() {
        return Err(NnError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(models)
}
