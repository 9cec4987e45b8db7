//! Checkpoint file format.
//!
//! Layout: magic "MVDK", format version (u32 LE), record count (u64 LE),
//! then per record: name length (u32 LE), UTF-8 name, dtype tag (u8),
//! rank (u32 LE), dims (u64 LE each), and raw little-endian values.
//! Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::error::{DiffError, Result};
use super::params::ParamStore;
use super::scalar::{Dtype, Scalar};
use super::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"MVDK";
pub const VERSION: u32 = 1;

/// One named array in a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub dtype: Dtype,
    pub dims: Vec<u64>,
    pub payload: Vec<u8>,
}

impl Record {
    pub fn from_tensor<T: Scalar>(name: &str, t: &Tensor<T>) -> Record {
        Record {
            name: name.to_string(),
            dtype: T::DTYPE,
            dims: t.shape().iter().map(|&d| d as u64).collect(),
            payload: T::to_le_bytes_vec(t.data()),
        }
    }

    pub fn from_slice<T: Scalar>(name: &str, dims: &[u64], data: &[T]) -> Record {
        Record {
            name: name.to_string(),
            dtype: T::DTYPE,
            dims: dims.to_vec(),
            payload: T::to_le_bytes_vec(data),
        }
    }

    pub fn from_u64(name: &str, value: u64) -> Record {
        Record {
            name: name.to_string(),
            dtype: Dtype::U64,
            dims: vec![1],
            payload: value.to_le_bytes().to_vec(),
        }
    }

    pub fn numel(&self) -> usize {
        self.dims.iter().product::<u64>() as usize
    }

    pub fn to_tensor<T: Scalar>(&self) -> Result<Tensor<T>> {
        if self.dtype != T::DTYPE {
            return Err(DiffError::Checkpoint(format!(
                "record '{}' has dtype {:?}, expected {:?}",
                self.name,
                self.dtype,
                T::DTYPE
            )));
        }
        let shape: Vec<usize> = self.dims.iter().map(|&d| d as usize).collect();
        Tensor::from_vec(shape, T::from_le_bytes_vec(&self.payload))
    }

    pub fn to_u64(&self) -> Result<u64> {
        if self.dtype != Dtype::U64 || self.payload.len() != 8 {
            return Err(DiffError::Checkpoint(format!("record '{}' is not a u64 scalar", self.name)));
        }
        let mut b = [0u8; 8];
        b.copy_from_slice(&self.payload);
        Ok(u64::from_le_bytes(b))
    }
}

pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for r in records {
        let name = r.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&[r.dtype as u8])?;
        w.write_all(&(r.dims.len() as u32).to_le_bytes())?;
        for d in &r.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        if r.payload.len() != r.numel() * r.dtype.byte_width() {
            return Err(DiffError::Checkpoint(format!(
                "record '{}': payload {} bytes, dims need {}",
                r.name,
                r.payload.len(),
                r.numel() * r.dtype.byte_width()
            )));
        }
        w.write_all(&r.payload)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(DiffError::Checkpoint(format!("bad magic {:?}", magic)));
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b)?;
    let version = u32::from_le_bytes(u32b);
    if version != VERSION {
        return Err(DiffError::Checkpoint(format!("unsupported version {}", version)));
    }
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u64b)?;
    let count = u64::from_le_bytes(u64b);
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        r.read_exact(&mut u32b)?;
        let name_len = u32::from_le_bytes(u32b) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|e| DiffError::Checkpoint(format!("record name not UTF-8: {}", e)))?;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let dtype = Dtype::from_tag(tag[0])
            .ok_or_else(|| DiffError::Checkpoint(format!("unknown dtype tag {}", tag[0])))?;
        r.read_exact(&mut u32b)?;
        let rank = u32::from_le_bytes(u32b) as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            r.read_exact(&mut u64b)?;
            dims.push(u64::from_le_bytes(u64b));
        }
        let numel: u64 = dims.iter().product();
        let mut payload = vec![0u8; numel as usize * dtype.byte_width()];
        r.read_exact(&mut payload)?;
        records.push(Record { name, dtype, dims, payload });
    }
    Ok(records)
}

const MOMENT1_SUFFIX: &str = "#adam_m";
const MOMENT2_SUFFIX: &str = "#adam_v";
const STEP_RECORD: &str = "#step";

/// Write a parameter store (values, optimizer moments, step counter).
pub fn save_store<T: Scalar>(path: &Path, store: &ParamStore<T>) -> Result<()> {
    let mut records = Vec::new();
    records.push(Record::from_u64(STEP_RECORD, store.step_count()));
    for (name, value, m1, m2) in store.export_entries() {
        let dims: Vec<u64> = value.shape().iter().map(|&d| d as u64).collect();
        records.push(Record::from_tensor(&name, value));
        records.push(Record::from_slice(&format!("{}{}", name, MOMENT1_SUFFIX), &dims, m1));
        records.push(Record::from_slice(&format!("{}{}", name, MOMENT2_SUFFIX), &dims, m2));
    }
    write_records(path, &records)
}

/// Read a parameter store written by [`save_store`].
pub fn load_store<T: Scalar>(path: &Path) -> Result<ParamStore<T>> {
    let records = read_records(path)?;
    let mut store = ParamStore::new();
    let mut moments: Vec<(String, bool, Vec<T>)> = Vec::new();
    for rec in &records {
        if rec.name == STEP_RECORD {
            store.set_step(rec.to_u64()?);
        } else if let Some(base) = rec.name.strip_suffix(MOMENT1_SUFFIX) {
            moments.push((base.to_string(), true, T::from_le_bytes_vec(&rec.payload)));
        } else if let Some(base) = rec.name.strip_suffix(MOMENT2_SUFFIX) {
            moments.push((base.to_string(), false, T::from_le_bytes_vec(&rec.payload)));
        } else {
            store.register(&rec.name, rec.to_tensor::<T>()?)?;
        }
    }
    let mut pending: std::collections::BTreeMap<String, (Option<Vec<T>>, Option<Vec<T>>)> =
        std::collections::BTreeMap::new();
    for (base, is_m1, data) in moments {
        let slot = pending.entry(base).or_default();
        if is_m1 {
            slot.0 = Some(data);
        } else {
            slot.1 = Some(data);
        }
    }
    for (base, (m1, m2)) in pending {
        match (m1, m2) {
            (Some(m1), Some(m2)) => store.import_moments(&base, m1, m2)?,
            _ => {
                return Err(DiffError::Checkpoint(format!(
                    "incomplete optimizer moments for '{}'",
                    base
                )))
            }
        }
    }
    Ok(store)
}
