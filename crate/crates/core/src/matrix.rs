//! Query × gallery score matrices and the SCM1 interchange format.
//!
//! SCM1 is EMB1 with a polarity byte after the header: magic `SCM1`,
//! `u32` n_query, `u32` n_gallery, `u8` polarity (0 = similarity,
//! 1 = distance), then `f32` values row-major. Values are held as `f64` in
//! memory and narrowed to `f32` on write.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{read_f32_payload, read_header};
use crate::error::{Error, Result};

pub const SCM1_MAGIC: &[u8; 4] = b"SCM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Larger is closer.
    Similarity,
    /// Smaller is closer.
    Distance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n_query: usize,
    n_gallery: usize,
    values: Vec<f64>,
    polarity: Polarity,
}

impl ScoreMatrix {
    pub fn new(
        n_query: usize,
        n_gallery: usize,
        values: Vec<f64>,
        polarity: Polarity,
    ) -> Result<Self> {
        if values.len() != n_query * n_gallery {
            return Err(Error::Shape(format!(
                "expected {} values for {n_query}x{n_gallery}, got {}",
                n_query * n_gallery,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Param(format!(
                "non-finite score at ({}, {})",
                pos / n_gallery.max(1),
                pos % n_gallery.max(1)
            )));
        }
        Ok(Self {
            n_query,
            n_gallery,
            values,
            polarity,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], polarity: Polarity) -> Result<Self> {
        let n_gallery = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_gallery) {
            return Err(Error::Shape("ragged score rows".into()));
        }
        Self::new(rows.len(), n_gallery, rows.concat(), polarity)
    }

    /// Builds a matrix row by row; `f(i)` must return exactly `n_gallery` values.
    pub(crate) fn from_row_fn(
        n_query: usize,
        n_gallery: usize,
        polarity: Polarity,
        f: impl Fn(usize) -> Vec<f64> + Sync + Send,
    ) -> Self {
        use rayon::prelude::*;
        let rows: Vec<Vec<f64>> = (0..n_query).into_par_iter().map(f).collect();
        debug_assert!(rows.iter().all(|r| r.len() == n_gallery));
        Self {
            n_query,
            n_gallery,
            values: rows.concat(),
            polarity,
        }
    }

    pub fn n_query(&self) -> usize {
        self.n_query
    }

    pub fn n_gallery(&self) -> usize {
        self.n_gallery
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_query, self.n_gallery)
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_gallery + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_gallery + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_gallery..(i + 1) * self.n_gallery]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values
            .chunks_exact(self.n_gallery.max(1))
            .take(self.n_query)
    }

    pub fn min_value(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::min)
    }

    pub fn max_value(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::max)
    }

    pub fn transpose(&self) -> ScoreMatrix {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.n_gallery {
            values.extend((0..self.n_query).map(|i| self.get(i, j)));
        }
        ScoreMatrix {
            n_query: self.n_gallery,
            n_gallery: self.n_query,
            values,
            polarity: self.polarity,
        }
    }

    /// Converts to similarity polarity via `s = -d`; similarities pass through.
    pub fn into_similarity(self) -> ScoreMatrix {
        match self.polarity {
            Polarity::Similarity => self,
            Polarity::Distance => ScoreMatrix {
                values: self.values.into_iter().map(|d| -d).collect(),
                polarity: Polarity::Similarity,
                ..self
            },
        }
    }

    pub(crate) fn require_polarity(&self, expected: Polarity, op: &str) -> Result<()> {
        if self.polarity != expected {
            return Err(Error::Param(format!(
                "{op} expects a {expected:?} matrix, got {:?}",
                self.polarity
            )));
        }
        Ok(())
    }

    pub(crate) fn require_shape(&self, other: (usize, usize), op: &str) -> Result<()> {
        if self.shape() != other {
            return Err(Error::Shape(format!(
                "{op}: {:?} vs {:?}",
                self.shape(),
                other
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + 4 * self.values.len());
        out.extend_from_slice(SCM1_MAGIC);
        out.extend_from_slice(&(self.n_query as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_gallery as u32).to_le_bytes());
        out.push(match self.polarity {
            Polarity::Similarity => 0,
            Polarity::Distance => 1,
        });
        for &v in &self.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (n_query, n_gallery) = read_header(bytes, SCM1_MAGIC)?;
        let polarity = match bytes.get(12) {
            Some(0) => Polarity::Similarity,
            Some(1) => Polarity::Distance,
            Some(b) => {
                return Err(Error::Format {
                    offset: 12,
                    reason: format!("unknown polarity byte {b}"),
                })
            }
            None => {
                return Err(Error::Format {
                    offset: 12,
                    reason: "truncated header".into(),
                })
            }
        };
        let values = read_f32_payload(bytes, 13, n_query * n_gallery)?
            .into_iter()
            .map(f64::from)
            .collect();
        Ok(Self {
            n_query,
            n_gallery,
            values,
            polarity,
        })
    }
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ScoreMatrix::from_bytes(&bytes)
}

pub fn save_scores(m: &ScoreMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, m.to_bytes()).map_err(|e| Error::io(path, e))
}
