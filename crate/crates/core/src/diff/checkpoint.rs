//! Named-parameter checkpoint files.
//!
//! Layout (little endian):
//!
//! ```text
//! magic    8 bytes  "TRAJCKPT"
//! version  u32      1
//! meta     u32 length + UTF-8 bytes (free-form, JSON by convention)
//! count    u32
//! entries  count x { u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values[..] }
//! ```

use std::io::{Read, Write};

use thiserror::Error;

use super::Tensor;

pub const MAGIC: &[u8; 8] = b"TRAJCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: String,
    pub params: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        write_bytes(&mut w, self.meta.as_bytes())?;
        w.write_all(&(self.params.len() as u32).to_le_bytes())?;
        for (name, t) in &self.params {
            write_bytes(&mut w, name.as_bytes())?;
            w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read<R: Read>(mut r: R) -> Result<Checkpoint, CheckpointError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::Magic);
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let meta = String::from_utf8(read_bytes(&mut r)?)
            .map_err(|_| CheckpointError::Corrupt("meta is not utf-8".into()))?;
        let count = read_u32(&mut r)?;
        let mut params = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name = String::from_utf8(read_bytes(&mut r)?)
                .map_err(|_| CheckpointError::Corrupt("name is not utf-8".into()))?;
            let rank = read_u32(&mut r)?;
            if rank > 8 {
                return Err(CheckpointError::Corrupt(format!("rank {rank} for {name}")));
            }
            let mut shape = Vec::with_capacity(rank as usize);
            for _ in 0..rank {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let n: usize = shape.iter().product();
            if n > 1 << 28 {
                return Err(CheckpointError::Corrupt(format!("{name} too large")));
            }
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                data.push(f64::from_le_bytes(b));
            }
            let t = Tensor::new(shape, data).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
            params.push((name, t));
        }
        Ok(Checkpoint { meta, params })
    }
}

fn write_bytes<W: Write>(w: &mut W, bytes: &[u8]) -> std::io::Result<()> {
    w.write_all(&(bytes.len() as u32).to_le_bytes())?;
    w.write_all(bytes)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_bytes<R: Read>(r: &mut R) -> Result<Vec<u8>, CheckpointError> {
    let len = read_u32(r)? as usize;
    if len > 1 << 26 {
        return Err(CheckpointError::Corrupt("length field too large".into()));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}
