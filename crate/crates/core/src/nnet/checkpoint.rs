//! Binary checkpoint format for one network.
//!
//! ```text
//! magic    8 bytes  "PDVNMLP\0"
//! version  u32
//! input    u32
//! hidden   u32
//! output   u32
//! head     u8       0 logits, 1 sigmoid, 2 softplus
//! dropout  f64
//! seed     u64
//! count    u64      number of parameters
//! params   count x f64
//! checksum u64      FNV-1a over every preceding byte
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::mlp::{Head, Mlp};
use crate::error::{Error, Result};
use crate::world::fnv1a64;

const MAGIC: &[u8; 8] = b"PDVNMLP\0";
const VERSION: u32 = 1;

pub fn encode(net: &Mlp) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + net.num_params() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.input_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(net.hidden_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(net.output_dim() as u32).to_le_bytes());
    out.push(net.head().code());
    out.extend_from_slice(&net.dropout().to_le_bytes());
    out.extend_from_slice(&net.seed().to_le_bytes());
    out.extend_from_slice(&(net.num_params() as u64).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let sum = fnv1a64(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Mlp> {
    if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if fnv1a64(body) != stored {
        return Err(Error::Checkpoint("checksum mismatch".into()));
    }
    let mut r = Reader {
        bytes: body,
        pos: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let input = r.u32()? as usize;
    let hidden = r.u32()? as usize;
    let output = r.u32()? as usize;
    let head = Head::from_code(r.take(1)?[0]).ok_or_else(|| Error::Checkpoint("bad head".into()))?;
    let dropout = r.f64()?;
    let seed = r.u64()?;
    let count = r.u64()? as usize;
    if count.checked_mul(8) != Some(body.len() - r.pos) {
        return Err(Error::Checkpoint("parameter count does not match file size".into()));
    }
    let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    Mlp::from_parts(input, hidden, output, head, dropout, seed, params)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save(net: &Mlp, path: &Path) -> Result<()> {
    fs::write(path, encode(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Mlp> {
    decode(&fs::read(path)?)
}
