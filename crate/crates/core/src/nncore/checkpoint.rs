//! PRM1: named parameter tensors.
//!
//! ```text
//! header:  b"PRM1" | u32 version = 1 | u64 tensor_count
//! tensor:  u32 name_len | name (UTF-8) | u32 rank | rank × u32 dims | f32 payload
//! ```
//! Little-endian throughout; payload length is the product of the dims.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{NnError, Params, Real};
use crate::binio::{len_u32, read_array, read_f32s, read_string, read_u32, read_u64, write_f32s, write_str, write_u32, write_u64};

pub const MAGIC: &[u8; 4] = b"PRM1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn tensors_of<T: Real, P: Params<T>>(params: &P) -> Vec<NamedTensor> {
    params
        .blocks()
        .into_iter()
        .map(|b| NamedTensor { name: b.name, dims: b.dims, data: b.data.iter().map(|v| v.as_f32()).collect() })
        .collect()
}

pub fn write_tensors(path: &Path, tensors: &[NamedTensor]) -> Result<(), NnError> {
    let err = |source| NnError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    let write = |w: &mut BufWriter<File>| -> io::Result<()> {
        w.write_all(MAGIC)?;
        write_u32(w, VERSION)?;
        write_u64(w, tensors.len() as u64)?;
        for t in tensors {
            write_str(w, &t.name)?;
            write_u32(w, len_u32(t.dims.len())?)?;
            for &d in &t.dims {
                write_u32(w, len_u32(d)?)?;
            }
            write_f32s(w, &t.data)?;
        }
        w.flush()
    };
    write(&mut w).map_err(err)
}

pub fn write_checkpoint<T: Real, P: Params<T>>(path: &Path, params: &P) -> Result<(), NnError> {
    write_tensors(path, &tensors_of(params))
}

pub fn read_tensors(path: &Path) -> Result<Vec<NamedTensor>, NnError> {
    let err = |source| NnError::Io { path: path.to_path_buf(), source };
    let mut r = BufReader::new(File::open(path).map_err(err)?);
    let bad = |msg: String| NnError::Checkpoint(format!("{}: {msg}", path.display()));
    let trunc = |e: io::Error| bad(format!("truncated or unreadable checkpoint ({e})"));
    let magic: [u8; 4] = read_array(&mut r).map_err(trunc)?;
    if &magic != MAGIC {
        return Err(bad(format!("bad magic {:?}, expected \"PRM1\"", String::from_utf8_lossy(&magic))));
    }
    let version = read_u32(&mut r).map_err(trunc)?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let count = read_u64(&mut r).map_err(trunc)?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let name = read_string(&mut r).map_err(trunc)?;
        let rank = read_u32(&mut r).map_err(trunc)? as usize;
        let dims = (0..rank).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<io::Result<Vec<_>>>().map_err(trunc)?;
        let data = read_f32s(&mut r, dims.iter().product()).map_err(trunc)?;
        tensors.push(NamedTensor { name, dims, data });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(err)? != 0 {
        return Err(bad("trailing bytes after last tensor".into()));
    }
    Ok(tensors)
}

/// Copies checkpoint tensors into `params`, requiring identical names and shapes.
pub fn load_into<T: Real, P: Params<T>>(params: &mut P, tensors: &[NamedTensor]) -> Result<(), NnError> {
    let expected: Vec<(String, Vec<usize>)> = params.blocks().into_iter().map(|b| (b.name, b.dims)).collect();
    if expected.len() != tensors.len() {
        return Err(NnError::Checkpoint(format!(
            "checkpoint has {} tensors, model expects {}",
            tensors.len(),
            expected.len()
        )));
    }
    for ((name, dims), t) in expected.iter().zip(tensors) {
        if *name != t.name || *dims != t.dims {
            return Err(NnError::Checkpoint(format!(
                "tensor mismatch: model has {name} {dims:?}, checkpoint has {} {:?}",
                t.name, t.dims
            )));
        }
    }
    for (dst, t) in params.blocks_mut().into_iter().zip(tensors) {
        for (d, &s) in dst.iter_mut().zip(&t.data) {
            *d = T::from_f32(s);
        }
    }
    Ok(())
}

pub fn read_checkpoint<T: Real, P: Params<T>>(path: &Path, params: &mut P) -> Result<(), NnError> {
    load_into(params, &read_tensors(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{DenseParams, Initializer, LstmParams};

    #[test]
    fn round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.prm1");
        let p: LstmParams<f32> = Initializer::new(3).lstm(4, 2);
        write_checkpoint(&path, &p).unwrap();
        let mut q = LstmParams::<f32>::zeros(4, 2);
        read_checkpoint(&path, &mut q).unwrap();
        assert_eq!(p, q);
        let t = read_tensors(&path).unwrap();
        assert_eq!(t[0].name, "w");
        assert_eq!(t[0].dims, vec![4, 2, 4]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.prm1");
        write_checkpoint(&path, &Initializer::new(1).dense::<f32>(3, 2)).unwrap();
        let mut wrong = DenseParams::<f32>::zeros(4, 2);
        assert!(matches!(read_checkpoint(&path, &mut wrong), Err(NnError::Checkpoint(_))));
    }

    #[test]
    fn corrupted_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.prm1");
        std::fs::write(&path, b"EMB1\x01\0\0\0").unwrap();
        assert!(read_tensors(&path).is_err());
        write_checkpoint(&path, &Initializer::new(1).dense::<f32>(3, 2)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_tensors(&path).is_err());
    }
}
