//! Flat binary checkpoint container.
//!
//! Byte layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  b"SEMLINK\0"
//! version u32      1
//! count   u32      number of records
//! record:
//!   name_len u32
//!   name     name_len bytes, UTF-8 parameter path
//!   ndim     u32
//!   dims     ndim * u32
//!   data     prod(dims) * f32
//! ```
//!
//! Records are written in sorted path order, so identical models
//! produce byte-identical files. Values are stored as f32; loading
//! widens back to f64.

use super::Tensor;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"SEMLINK\0";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{0} is not a checkpoint file (bad magic)")]
    BadMagic(String),
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint is truncated or corrupt: {0}")]
    Corrupt(String),
}

/// Writes `(path, tensor)` records. Callers pass them pre-sorted;
/// this function sorts defensively so the layout stays canonical.
pub fn save(path: &Path, records: &[(String, &Tensor)]) -> Result<(), CheckpointError> {
    let mut sorted: Vec<&(String, &Tensor)> = records.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(sorted.len() as u32).to_le_bytes());
    for (name, tensor) in sorted {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(tensor.shape.len() as u32).to_le_bytes());
        for &d in &tensor.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &tensor.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(&buf).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads every record in file order.
pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>, CheckpointError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8], CheckpointError> {
        if *cursor + n > bytes.len() {
            return Err(CheckpointError::Corrupt(format!(
                "need {n} bytes at offset {cursor}"
            )));
        }
        let s = &bytes[*cursor..*cursor + n];
        *cursor += n;
        Ok(s)
    };
    let read_u32 = |cursor: &mut usize| -> Result<u32, CheckpointError> {
        let s = take(cursor, 4)?;
        Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    };

    if take(&mut cursor, 8)? != MAGIC {
        return Err(CheckpointError::BadMagic(path.display().to_string()));
    }
    let version = read_u32(&mut cursor)?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let count = read_u32(&mut cursor)?;
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = read_u32(&mut cursor)? as usize;
        let name = String::from_utf8(take(&mut cursor, name_len)?.to_vec())
            .map_err(|_| CheckpointError::Corrupt("record name is not UTF-8".into()))?;
        let ndim = read_u32(&mut cursor)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u32(&mut cursor)? as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = take(&mut cursor, numel * 4)?;
        let data: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        records.push((name, Tensor::from_vec(&shape, data)));
    }
    Ok(records)
}
