//! IDX array files (the MNIST distribution format).
//!
//! Header: two zero bytes, an element-type byte (only `0x08`, unsigned byte,
//! is accepted) and a rank byte, then one big-endian `u32` per dimension,
//! then the row-major payload.

use std::path::Path;

use thiserror::Error;

pub const UBYTE: u8 = 0x08;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("bad IDX magic {0:02x?}: expected 00 00 08 <rank>")]
    BadMagic([u8; 4]),
    #[error("unsupported IDX element type 0x{0:02x}; only unsigned bytes (0x08) are supported")]
    ElementType(u8),
    #[error("truncated IDX file: need {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("IDX file has {0} bytes beyond the declared payload")]
    TrailingBytes(usize),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxArray {
    pub fn new(shape: Vec<usize>, data: Vec<u8>) -> Option<Self> {
        (shape.iter().product::<usize>() == data.len() && shape.len() <= u8::MAX as usize)
            .then_some(Self { shape, data })
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, IdxError> {
        if bytes.len() < 4 {
            return Err(IdxError::Truncated {
                expected: 4,
                actual: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("four bytes");
        if magic[0] != 0 || magic[1] != 0 {
            return Err(IdxError::BadMagic(magic));
        }
        if magic[2] != UBYTE {
            return Err(IdxError::ElementType(magic[2]));
        }
        let rank = magic[3] as usize;
        let header = 4 + 4 * rank;
        if bytes.len() < header {
            return Err(IdxError::Truncated {
                expected: header,
                actual: bytes.len(),
            });
        }
        let shape: Vec<usize> = bytes[4..header]
            .chunks(4)
            .map(|c| u32::from_be_bytes(c.try_into().expect("four bytes")) as usize)
            .collect();
        let payload: usize = shape.iter().product();
        let expected = header + payload;
        if bytes.len() < expected {
            return Err(IdxError::Truncated {
                expected,
                actual: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(IdxError::TrailingBytes(bytes.len() - expected));
        }
        Ok(Self {
            shape,
            data: bytes[header..].to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0, 0, UBYTE, self.shape.len() as u8];
        for &n in &self.shape {
            out.extend_from_slice(&(n as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    /// Number of items along the first axis.
    pub fn len(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements per item (product of the trailing dimensions).
    pub fn item_size(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn item(&self, i: usize) -> &[u8] {
        let n = self.item_size();
        &self.data[i * n..(i + 1) * n]
    }
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxArray, IdxError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| IdxError::Io {
        path: path.display().to_string(),
        source,
    })?;
    IdxArray::parse(&bytes)
}
