//! EMB1: per-document token embeddings.
//!
//! ```text
//! header:  b"EMB1" | u32 version = 1 | u32 dim | u64 record_count
//! record:  u32 id_len | id (UTF-8) | u32 token_count | token_count·dim f32, row-major
//! ```
//! All integers and floats are little-endian.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbeddingError, EmbeddingMatrix};
use crate::binio::{read_array, read_f32s, read_string, read_u32, read_u64, write_f32s, write_str, write_u32, write_u64};
use crate::corpus::{Document, Segmenter};

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Emb1Record {
    pub doc_id: String,
    pub token_count: usize,
    /// `token_count · dim` values, row-major.
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Emb1File {
    pub dim: usize,
    pub records: Vec<Emb1Record>,
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> EmbeddingError + '_ {
    move |source| EmbeddingError::Io { path: path.to_path_buf(), source }
}

pub fn write_embeddings(path: &Path, dim: usize, records: &[Emb1Record]) -> Result<(), EmbeddingError> {
    for r in records {
        if r.values.len() != r.token_count * dim {
            return Err(EmbeddingError::InconsistentRecord {
                id: r.doc_id.clone(),
                token_count: r.token_count,
                dim,
                values: r.values.len(),
            });
        }
    }
    let err = io_err(path);
    let mut w = BufWriter::new(File::create(path).map_err(&err)?);
    let write = |w: &mut BufWriter<File>| -> io::Result<()> {
        w.write_all(MAGIC)?;
        write_u32(w, VERSION)?;
        write_u32(w, crate::binio::len_u32(dim)?)?;
        write_u64(w, records.len() as u64)?;
        for r in records {
            write_str(w, &r.doc_id)?;
            write_u32(w, crate::binio::len_u32(r.token_count)?)?;
            write_f32s(w, &r.values)?;
        }
        w.flush()
    };
    write(&mut w).map_err(err)
}

pub fn read_emb1(path: &Path) -> Result<Emb1File, EmbeddingError> {
    let err = io_err(path);
    let mut r = BufReader::new(File::open(path).map_err(&err)?);
    let truncated = |context: &str| {
        let context = context.to_string();
        move |e: io::Error| match e.kind() {
            io::ErrorKind::UnexpectedEof => EmbeddingError::Truncated { path: path.to_path_buf(), context },
            _ => EmbeddingError::Io { path: path.to_path_buf(), source: e },
        }
    };
    let magic: [u8; 4] = read_array(&mut r).map_err(truncated("header"))?;
    if &magic != MAGIC {
        return Err(EmbeddingError::BadMagic {
            path: path.to_path_buf(),
            expected: "EMB1".into(),
            found: String::from_utf8_lossy(&magic).into_owned(),
        });
    }
    let version = read_u32(&mut r).map_err(truncated("header"))?;
    if version != VERSION {
        return Err(EmbeddingError::UnsupportedVersion { path: path.to_path_buf(), version });
    }
    let dim = read_u32(&mut r).map_err(truncated("header"))? as usize;
    let count = read_u64(&mut r).map_err(truncated("header"))?;
    let mut records = Vec::new();
    for i in 0..count {
        let ctx = format!("record {i}");
        let doc_id = read_string(&mut r).map_err(truncated(&ctx))?;
        let token_count = read_u32(&mut r).map_err(truncated(&ctx))? as usize;
        let values = read_f32s(&mut r, token_count * dim).map_err(truncated(&ctx))?;
        records.push(Emb1Record { doc_id, token_count, values });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(err)? != 0 {
        return Err(EmbeddingError::Truncated {
            path: path.to_path_buf(),
            context: "trailing bytes after last record".into(),
        });
    }
    Ok(Emb1File { dim, records })
}

/// Loads an EMB1 file and assembles one pad-after matrix per corpus document.
/// Records for ids not in `corpus` are ignored.
pub fn load_precomputed(
    path: &Path,
    corpus: &[Document],
    segmenter: &Segmenter,
    expected_dim: usize,
) -> Result<HashMap<String, EmbeddingMatrix>, EmbeddingError> {
    let file = read_emb1(path)?;
    if file.dim != expected_dim {
        return Err(EmbeddingError::DimMismatch { expected: expected_dim, found: file.dim });
    }
    let mut by_id: HashMap<&str, &Emb1Record> = HashMap::with_capacity(file.records.len());
    for rec in &file.records {
        if by_id.insert(rec.doc_id.as_str(), rec).is_some() {
            return Err(EmbeddingError::DuplicateDocument(rec.doc_id.clone()));
        }
    }
    corpus
        .iter()
        .map(|doc| {
            let rec = by_id.get(doc.id.as_str()).ok_or_else(|| EmbeddingError::MissingDocument(doc.id.clone()))?;
            let grid = segmenter.segment(doc);
            if rec.token_count != grid.token_count() {
                return Err(EmbeddingError::TokenCountMismatch {
                    id: doc.id.clone(),
                    expected: grid.token_count(),
                    found: rec.token_count,
                });
            }
            Ok((doc.id.clone(), EmbeddingMatrix::pad_after_from_rows(&grid, file.dim, &rec.values)))
        })
        .collect()
}
