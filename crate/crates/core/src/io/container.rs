use std::collections::BTreeMap;
use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"AVSRTNSR";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    U8,
    F32,
    F64,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::U8 => 0,
            DType::F32 => 1,
            DType::F64 => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(DType::U8),
            1 => Some(DType::F32),
            2 => Some(DType::F64),
            _ => None,
        }
    }

    fn width(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    U8(Vec<u8>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::U8(_) => DType::U8,
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::U8(v) => v.len(),
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values widened to f64.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::U8(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }

    fn payload(&self) -> Vec<u8> {
        match self {
            TensorData::U8(v) => v.clone(),
            TensorData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            TensorData::F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    fn from_payload(dtype: DType, bytes: &[u8]) -> Self {
        match dtype {
            DType::U8 => TensorData::U8(bytes.to_vec()),
            DType::F32 => TensorData::F32(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::F64 => TensorData::F64(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Entry {
    fn checksum(&self, payload: &[u8]) -> u32 {
        let mut h = crc32fast::Hasher::new();
        h.update(self.name.as_bytes());
        h.update(&[self.data.dtype().code()]);
        for &d in &self.shape {
            h.update(&(d as u64).to_le_bytes());
        }
        h.update(payload);
        h.finalize()
    }
}

/// Named tensors plus string attributes, serialized little-endian. A CRC-32
/// covers the attribute block and another each entry's name, dtype, shape
/// and payload.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorContainer {
    pub attrs: BTreeMap<String, String>,
    pub entries: Vec<Entry>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_attr(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.attrs.insert(key.into(), value.into());
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.get(key).map(String::as_str)
    }

    /// Adds an entry. Every dimension must be positive and the shape must
    /// match the data length; names are unique.
    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], data: TensorData) -> Result<()> {
        let name = name.into();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("entry `{name}` has a zero dimension in {shape:?}")));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::shape(format!("entry `{name}`: shape {shape:?} does not hold {} values", data.len())));
        }
        if self.get(&name).is_some() {
            return Err(Error::ConfigError(format!("duplicate entry `{name}`")));
        }
        self.entries.push(Entry {
            name,
            shape: shape.to_vec(),
            data,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Entry> {
        self.get(name)
            .ok_or_else(|| Error::ConfigError(format!("container has no entry `{name}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let attr_start = out.len();
        out.extend_from_slice(&(self.attrs.len() as u32).to_le_bytes());
        for (k, v) in &self.attrs {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        let crc = crc32fast::hash(&out[attr_start..]);
        out.extend_from_slice(&crc.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            put_str(&mut out, &e.name);
            out.push(e.data.dtype().code());
            out.extend_from_slice(&(e.shape.len() as u32).to_le_bytes());
            for &d in &e.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            let payload = e.data.payload();
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&payload);
            out.extend_from_slice(&e.checksum(&payload).to_le_bytes());
        }
        out
    }

    /// Parses bytes; `origin` names the source in error messages.
    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, origin };
        if r.take(8)? != MAGIC {
            return Err(r.error("bad magic"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(r.error(&format!("format version {version}, expected {FORMAT_VERSION}")));
        }
        let mut c = TensorContainer::new();
        let attr_start = r.pos;
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            c.attrs.insert(k, v);
        }
        let crc = crc32fast::hash(&bytes[attr_start..r.pos]);
        if r.u32()? != crc {
            return Err(Error::Checksum("<attributes>".into()));
        }
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let dtype = DType::from_code(r.take(1)?[0]).ok_or_else(|| r.error("unknown dtype"))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len = r.u64()? as usize;
            let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            if count.and_then(|n| n.checked_mul(dtype.width())) != Some(len) || shape.iter().any(|&d| d == 0) {
                return Err(r.error(&format!("entry `{name}` has inconsistent shape {shape:?} for {len} bytes")));
            }
            let payload = r.take(len)?;
            let stored = r.u32()?;
            let entry = Entry {
                name,
                shape,
                data: TensorData::from_payload(dtype, payload),
            };
            if entry.checksum(payload) != stored {
                return Err(Error::Checksum(entry.name));
            }
            if c.get(&entry.name).is_some() {
                return Err(r.error(&format!("duplicate entry `{}`", entry.name)));
            }
            c.entries.push(entry);
        }
        if r.pos != bytes.len() {
            return Err(r.error("trailing bytes"));
        }
        Ok(c)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a str,
}

impl<'a> Reader<'a> {
    fn error(&self, reason: &str) -> Error {
        Error::Format {
            path: self.origin.to_string(),
            reason: format!("{reason} (at byte {})", self.pos),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| self.error("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.error("string is not UTF-8"))
    }
}
