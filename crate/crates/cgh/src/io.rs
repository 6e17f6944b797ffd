//! Self-describing binary tensor store used for model checkpoints: a magic
//! header followed by named tensors (name, shape, row-major f64 data), all
//! little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{CghError, Result};

const TENSORS_MAGIC: &[u8; 4] = b"CGHP";
const TENSORS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn scalar(name: &str, value: f64) -> Self {
        NamedTensor {
            name: name.to_string(),
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn vector(name: &str, data: Vec<f64>) -> Self {
        NamedTensor {
            name: name.to_string(),
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(name: &str, rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        NamedTensor {
            name: name.to_string(),
            shape: vec![rows, cols],
            data,
        }
    }
}

pub fn write_tensors(path: &Path, tensors: &[NamedTensor]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TENSORS_MAGIC)?;
    w.write_u32::<LittleEndian>(TENSORS_VERSION)?;
    w.write_u32::<LittleEndian>(tensors.len() as u32)?;
    for t in tensors {
        let name = t.name.as_bytes();
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name)?;
        w.write_u32::<LittleEndian>(t.shape.len() as u32)?;
        for &d in &t.shape {
            w.write_u64::<LittleEndian>(d as u64)?;
        }
        let expected: usize = t.shape.iter().product();
        debug_assert_eq!(expected, t.data.len());
        for &v in &t.data {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensors(path: &Path) -> Result<Vec<NamedTensor>> {
    let corrupt = |message: String| CghError::CorruptArtifact {
        path: path.to_path_buf(),
        message,
    };
    let mut rd = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    rd.read_exact(&mut magic)?;
    if &magic != TENSORS_MAGIC {
        return Err(corrupt("bad magic, expected CGHP".into()));
    }
    if rd.read_u32::<LittleEndian>()? != TENSORS_VERSION {
        return Err(corrupt("unsupported version".into()));
    }
    let count = rd.read_u32::<LittleEndian>()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = rd.read_u32::<LittleEndian>()? as usize;
        let mut name_buf = vec![0u8; name_len];
        rd.read_exact(&mut name_buf)?;
        let name = String::from_utf8(name_buf).map_err(|e| corrupt(format!("name: {e}")))?;
        let ndim = rd.read_u32::<LittleEndian>()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(rd.read_u64::<LittleEndian>()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = vec![0.0f64; len];
        for v in data.iter_mut() {
            *v = rd.read_f64::<LittleEndian>()?;
        }
        tensors.push(NamedTensor { name, shape, data });
    }
    Ok(tensors)
}

/// Look up a tensor by name.
pub fn find<'a>(tensors: &'a [NamedTensor], name: &str, path: &Path) -> Result<&'a NamedTensor> {
    tensors.iter().find(|t| t.name == name).ok_or_else(|| {
        CghError::CorruptArtifact {
            path: path.to_path_buf(),
            message: format!("missing tensor {name}"),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_byte_stability() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let tensors = vec![
            NamedTensor::scalar("alpha", 0.25),
            NamedTensor::vector("v", vec![1.0, -2.0, 3.5]),
            NamedTensor::matrix("m", 2, 3, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
        ];
        write_tensors(&path, &tensors).unwrap();
        let back = read_tensors(&path).unwrap();
        assert_eq!(tensors, back);

        let bytes1 = std::fs::read(&path).unwrap();
        write_tensors(&path, &back).unwrap();
        assert_eq!(bytes1, std::fs::read(&path).unwrap());
    }

    #[test]
    fn missing_tensor_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        write_tensors(&path, &[NamedTensor::scalar("x", 1.0)]).unwrap();
        let tensors = read_tensors(&path).unwrap();
        assert!(find(&tensors, "y", &path).is_err());
    }

    #[test]
    fn bad_magic_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(
            read_tensors(&path),
            Err(CghError::CorruptArtifact { .. })
        ));
    }
}
