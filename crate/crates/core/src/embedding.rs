//! Dense per-image feature vectors and the EMB1 binary format.
//!
//! EMB1 layout (all little-endian):
//!
//! | offset | size          | content                 |
//! |--------|---------------|-------------------------|
//! | 0      | 4             | magic `EMB1`            |
//! | 4      | 4             | `u32` n_images          |
//! | 8      | 4             | `u32` dim               |
//! | 12     | 4·n·dim       | `f32` values, row-major |

use std::path::Path;

use crate::error::{Error, Result};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

/// Row-major matrix of `n_images × dim` features.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    n_images: usize,
    dim: usize,
    data: Vec<f32>,
    /// Names the extractor (or scale) that produced the features.
    pub source_id: String,
}

impl EmbeddingSet {
    pub fn new(
        n_images: usize,
        dim: usize,
        data: Vec<f32>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("embedding dim must be at least 1".into()));
        }
        if data.len() != n_images * dim {
            return Err(Error::Shape(format!(
                "expected {} values for {n_images}x{dim}, got {}",
                n_images * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Param(format!(
                "non-finite value at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            n_images,
            dim,
            data,
            source_id: source_id.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f32>], source_id: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Shape(format!("row {i} has length != {dim}")));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), dim, data, source_id)
    }

    pub fn n_images(&self) -> usize {
        self.n_images
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Stacks `self` on top of `other` (query rows first, then gallery rows).
    pub fn concat(&self, other: &EmbeddingSet) -> Result<EmbeddingSet> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!(
                "cannot stack dim {} with dim {}",
                self.dim, other.dim
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(EmbeddingSet {
            n_images: self.n_images + other.n_images,
            dim: self.dim,
            data,
            source_id: self.source_id.clone(),
        })
    }

    /// Divides every row by its Euclidean norm.
    pub fn normalize_rows(&self) -> Result<EmbeddingSet> {
        let mut data = Vec::with_capacity(self.data.len());
        for (i, row) in self.rows().enumerate() {
            let norm = row
                .iter()
                .map(|&v| f64::from(v) * f64::from(v))
                .sum::<f64>()
                .sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNorm { row: i });
            }
            data.extend(row.iter().map(|&v| (f64::from(v) / norm) as f32));
        }
        Ok(EmbeddingSet {
            n_images: self.n_images,
            dim: self.dim,
            data,
            source_id: self.source_id.clone(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(EMB1_MAGIC);
        out.extend_from_slice(&(self.n_images as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], source_id: impl Into<String>) -> Result<Self> {
        let (n_images, dim) = read_header(bytes, EMB1_MAGIC)?;
        if dim == 0 {
            return Err(Error::Format {
                offset: 8,
                reason: "dim is zero".into(),
            });
        }
        let data = read_f32_payload(bytes, HEADER_LEN, n_images * dim)?;
        for (i, row) in data.chunks_exact(dim).enumerate() {
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::Format {
                    offset: (HEADER_LEN + 4 * i * dim) as u64,
                    reason: format!("row {i} is all zeros"),
                });
            }
        }
        Ok(EmbeddingSet {
            n_images,
            dim,
            data,
            source_id: source_id.into(),
        })
    }
}

/// Reads an EMB1 file. The source id is taken from the file stem.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let source = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    EmbeddingSet::from_bytes(&bytes, source)
}

pub fn save_embeddings(e: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, e.to_bytes()).map_err(|err| Error::io(path, err))
}

/// Parses the 12-byte `magic, u32, u32` header shared by EMB1 and SCM1.
pub(crate) fn read_header(bytes: &[u8], magic: &[u8; 4]) -> Result<(usize, usize)> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::Format {
            offset: 0,
            reason: format!("missing magic {:?}", String::from_utf8_lossy(magic)),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            reason: "truncated header".into(),
        });
    }
    let a = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let b = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    Ok((a, b))
}

/// Decodes exactly `count` little-endian `f32`s starting at `start`,
/// rejecting truncation, trailing bytes and non-finite values.
pub(crate) fn read_f32_payload(bytes: &[u8], start: usize, count: usize) -> Result<Vec<f32>> {
    let available = bytes.len().saturating_sub(start);
    let expected = count * 4;
    if available < expected {
        return Err(Error::Format {
            offset: (start + available / 4 * 4) as u64,
            reason: format!("truncated payload: expected {expected} bytes, found {available}"),
        });
    }
    if available > expected {
        return Err(Error::Format {
            offset: (start + expected) as u64,
            reason: format!("{} trailing bytes after payload", available - expected),
        });
    }
    bytes[start..]
        .chunks_exact(4)
        .enumerate()
        .map(|(i, c)| {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Format {
                    offset: (start + 4 * i) as u64,
                    reason: format!("non-finite value {v}"),
                })
            }
        })
        .collect()
}
