//! Versioned binary container for agent state.
//!
//! Layout (little-endian): magic `CMCA`, format version `u32`, seed `u64`,
//! entry count `u32`, then each entry as name length `u16`, UTF-8 name, kind
//! byte and payload, and finally a SHA-256 digest of everything before it.
//! Arrays carry their rank and dimensions and store `f64` bit patterns in
//! row-major order, so round trips are bit-exact.

use indexmap::IndexMap;
use sha2::{Digest, Sha256};

use crate::error::{CogError, Result};

pub const MAGIC: &[u8; 4] = b"CMCA";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub enum Entry {
    Array { shape: Vec<usize>, data: Vec<f64> },
    U64(u64),
    I64(i64),
    F64(f64),
    Text(String),
}

impl Entry {
    fn kind(&self) -> u8 {
        match self {
            Entry::Array { .. } => 0,
            Entry::U64(_) => 1,
            Entry::I64(_) => 2,
            Entry::F64(_) => 3,
            Entry::Text(_) => 4,
        }
    }

    /// One-line summary for directory listings.
    pub fn describe(&self) -> String {
        match self {
            Entry::Array { shape, .. } => format!("f64 array {shape:?}"),
            Entry::U64(v) => format!("u64 {v}"),
            Entry::I64(v) => format!("i64 {v}"),
            Entry::F64(v) => format!("f64 {v:e}"),
            Entry::Text(t) => format!("text ({} bytes)", t.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    seed: u64,
    entries: IndexMap<String, Entry>,
}

impl Container {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            entries: IndexMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &Entry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn insert(&mut self, name: impl Into<String>, entry: Entry) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.len() > u16::MAX as usize {
            return Err(CogError::Snapshot(format!("invalid entry name `{name}`")));
        }
        if let Entry::Array { shape, data } = &entry {
            if shape.iter().product::<usize>() != data.len() {
                return Err(CogError::Snapshot(format!(
                    "entry `{name}`: shape {shape:?} does not hold {} values",
                    data.len()
                )));
            }
        }
        if self.entries.insert(name.clone(), entry).is_some() {
            return Err(CogError::Snapshot(format!("duplicate entry `{name}`")));
        }
        Ok(())
    }

    pub fn put_array(&mut self, name: impl Into<String>, shape: &[usize], data: &[f64]) -> Result<()> {
        self.insert(
            name,
            Entry::Array {
                shape: shape.to_vec(),
                data: data.to_vec(),
            },
        )
    }

    pub fn put_u64(&mut self, name: impl Into<String>, v: u64) -> Result<()> {
        self.insert(name, Entry::U64(v))
    }

    pub fn put_i64(&mut self, name: impl Into<String>, v: i64) -> Result<()> {
        self.insert(name, Entry::I64(v))
    }

    pub fn put_f64(&mut self, name: impl Into<String>, v: f64) -> Result<()> {
        self.insert(name, Entry::F64(v))
    }

    pub fn put_text(&mut self, name: impl Into<String>, v: impl Into<String>) -> Result<()> {
        self.insert(name, Entry::Text(v.into()))
    }

    pub fn get(&self, name: &str) -> Result<&Entry> {
        self.entries
            .get(name)
            .ok_or_else(|| CogError::Snapshot(format!("missing entry `{name}`")))
    }

    fn wrong_kind(name: &str, want: &str) -> CogError {
        CogError::Snapshot(format!("entry `{name}` is not {want}"))
    }

    pub fn array(&self, name: &str) -> Result<(&[usize], &[f64])> {
        match self.get(name)? {
            Entry::Array { shape, data } => Ok((shape, data)),
            _ => Err(Self::wrong_kind(name, "an array")),
        }
    }

    /// Array entry whose shape must equal `shape`.
    pub fn array_shaped(&self, name: &str, shape: &[usize]) -> Result<&[f64]> {
        let (s, data) = self.array(name)?;
        if s != shape {
            return Err(CogError::Snapshot(format!(
                "entry `{name}` has shape {s:?}, expected {shape:?}"
            )));
        }
        Ok(data)
    }

    pub fn u64(&self, name: &str) -> Result<u64> {
        match self.get(name)? {
            Entry::U64(v) => Ok(*v),
            _ => Err(Self::wrong_kind(name, "a u64")),
        }
    }

    pub fn i64(&self, name: &str) -> Result<i64> {
        match self.get(name)? {
            Entry::I64(v) => Ok(*v),
            _ => Err(Self::wrong_kind(name, "an i64")),
        }
    }

    pub fn f64(&self, name: &str) -> Result<f64> {
        match self.get(name)? {
            Entry::F64(v) => Ok(*v),
            _ => Err(Self::wrong_kind(name, "an f64")),
        }
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match self.get(name)? {
            Entry::Text(v) => Ok(v),
            _ => Err(Self::wrong_kind(name, "text")),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, entry) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(entry.kind());
            match entry {
                Entry::Array { shape, data } => {
                    out.push(shape.len() as u8);
                    for &n in shape {
                        out.extend_from_slice(&(n as u64).to_le_bytes());
                    }
                    for v in data {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                Entry::U64(v) => out.extend_from_slice(&v.to_le_bytes()),
                Entry::I64(v) => out.extend_from_slice(&v.to_le_bytes()),
                Entry::F64(v) => out.extend_from_slice(&v.to_le_bytes()),
                Entry::Text(t) => {
                    out.extend_from_slice(&(t.len() as u64).to_le_bytes());
                    out.extend_from_slice(t.as_bytes());
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(CogError::Snapshot("not a snapshot container (bad magic)".into()));
        }
        let mut r = Reader { bytes, pos: 4 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CogError::Snapshot(format!(
                "unsupported format version {version} (this build reads {FORMAT_VERSION})"
            )));
        }
        if bytes.len() < DIGEST_LEN + 20 {
            return Err(truncated());
        }
        let body_len = bytes.len() - DIGEST_LEN;
        if Sha256::digest(&bytes[..body_len]).as_slice() != &bytes[body_len..] {
            return Err(CogError::Snapshot(
                "checksum mismatch (container is truncated or corrupted)".into(),
            ));
        }
        r.bytes = &bytes[..body_len];
        let seed = r.u64()?;
        let count = r.u32()?;
        let mut c = Container::new(seed);
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| CogError::Snapshot("entry name is not UTF-8".into()))?;
            let entry = match r.u8()? {
                0 => {
                    let rank = r.u8()? as usize;
                    let shape = (0..rank)
                        .map(|_| r.u64().map(|n| n as usize))
                        .collect::<Result<Vec<_>>>()?;
                    let n = shape
                        .iter()
                        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                        .filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                        .ok_or_else(truncated)?;
                    let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                    Entry::Array { shape, data }
                }
                1 => Entry::U64(r.u64()?),
                2 => Entry::I64(r.u64()? as i64),
                3 => Entry::F64(r.f64()?),
                4 => {
                    let len = r.u64()? as usize;
                    let raw = r.take(len)?.to_vec();
                    Entry::Text(
                        String::from_utf8(raw)
                            .map_err(|_| CogError::Snapshot("text entry is not UTF-8".into()))?,
                    )
                }
                k => return Err(CogError::Snapshot(format!("unknown entry kind {k}"))),
            };
            c.insert(name, entry)?;
        }
        if r.remaining() != 0 {
            return Err(CogError::Snapshot("trailing bytes after last entry".into()));
        }
        Ok(c)
    }
}

fn truncated() -> CogError {
    CogError::Snapshot("container is truncated".into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(truncated());
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }
}
