//! Named-tensor container files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic  8 bytes  b"SFTENSR1"
//! u32    metadata length, followed by that many UTF-8 JSON bytes
//! u32    tensor count
//! per tensor:
//!   u16      name length, then name bytes (UTF-8)
//!   u8       dtype: 1 = f64, 2 = f32
//!   u8       rank
//!   u32 * r  extents
//!   payload  raw little-endian values
//! 32 bytes SHA-256 over everything above
//! ```
//!
//! In memory everything is f64; dtype only controls on-disk width. An
//! f64 round-trip is bit-exact.

use super::Tensor;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"SFTENSR1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: not a tensor container")]
    BadMagic,
    #[error("truncated container at byte {0}")]
    Truncated(usize),
    #[error("checksum mismatch: file is corrupt")]
    ChecksumMismatch,
    #[error("unknown dtype tag {0}")]
    UnknownDtype(u8),
    #[error("invalid name encoding")]
    BadName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F64,
    F32,
}

impl Dtype {
    fn tag(self) -> u8 {
        match self {
            Dtype::F64 => 1,
            Dtype::F32 => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, CheckpointError> {
        match tag {
            1 => Ok(Dtype::F64),
            2 => Ok(Dtype::F32),
            other => Err(CheckpointError::UnknownDtype(other)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
    pub dtype: Dtype,
}

impl NamedTensor {
    pub fn f64(name: impl Into<String>, tensor: Tensor) -> Self {
        NamedTensor {
            name: name.into(),
            tensor,
            dtype: Dtype::F64,
        }
    }
}

pub fn write_named_tensors(
    path: &Path,
    metadata_json: &str,
    tensors: &[NamedTensor],
) -> Result<(), CheckpointError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    let meta = metadata_json.as_bytes();
    buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    buf.extend_from_slice(meta);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for nt in tensors {
        let name = nt.name.as_bytes();
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name);
        buf.push(nt.dtype.tag());
        buf.push(nt.tensor.shape().len() as u8);
        for &d in nt.tensor.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match nt.dtype {
            Dtype::F64 => {
                for v in nt.tensor.data() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            Dtype::F32 => {
                for v in nt.tensor.data() {
                    buf.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_named_tensors(path: &Path) -> Result<(String, Vec<NamedTensor>), CheckpointError> {
    let buf = fs::read(path)?;
    if buf.len() < MAGIC.len() + 32 {
        return Err(CheckpointError::Truncated(buf.len()));
    }
    let (body, digest) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(CheckpointError::ChecksumMismatch);
    }
    let mut cur = Cursor { buf: body, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let meta_len = cur.u32()? as usize;
    let metadata = String::from_utf8(cur.take(meta_len)?.to_vec())
        .map_err(|_| CheckpointError::BadName)?;
    let count = cur.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = cur.u16()? as usize;
        let name =
            String::from_utf8(cur.take(name_len)?.to_vec()).map_err(|_| CheckpointError::BadName)?;
        let dtype = Dtype::from_tag(cur.u8()?)?;
        let rank = cur.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let data = match dtype {
            Dtype::F64 => {
                let raw = cur.take(len * 8)?;
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect()
            }
            Dtype::F32 => {
                let raw = cur.take(len * 4)?;
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect()
            }
        };
        tensors.push(NamedTensor {
            name,
            tensor: Tensor::from_vec(&shape, data).expect("length follows from shape"),
            dtype,
        });
    }
    Ok((metadata, tensors))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Truncated(self.pos));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join("sf_ckpt_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.sft");
        let t = Tensor::from_vec(&[2, 3], vec![1.5, -0.25, 1e-300, 3.7, 0.0, -9.125]).unwrap();
        write_named_tensors(
            &path,
            r#"{"epoch":3}"#,
            &[NamedTensor::f64("layer0.w", t.clone())],
        )
        .unwrap();
        let (meta, tensors) = read_named_tensors(&path).unwrap();
        assert_eq!(meta, r#"{"epoch":3}"#);
        assert_eq!(tensors.len(), 1);
        assert_eq!(tensors[0].name, "layer0.w");
        assert_eq!(tensors[0].tensor, t);
    }

    #[test]
    fn corruption_is_detected() {
        let dir = std::env::temp_dir().join("sf_ckpt_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("corrupt.sft");
        let t = Tensor::filled(&[4], 2.0);
        write_named_tensors(&path, "", &[NamedTensor::f64("w", t)]).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_named_tensors(&path),
            Err(CheckpointError::ChecksumMismatch)
        ));
    }
}
