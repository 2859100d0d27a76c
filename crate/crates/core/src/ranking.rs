use std::collections::HashSet;

use crate::error::{Error, Result};

/// Per-query ordered gallery indices.
///
/// Every row holds distinct indices below `n_gallery`; a row may cover only
/// part of the gallery (e.g. a truncated submission).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankList {
    n_gallery: usize,
    rows: Vec<Vec<usize>>,
}

impl RankList {
    pub fn new(n_gallery: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        for (q, row) in rows.iter().enumerate() {
            let mut seen = HashSet::with_capacity(row.len());
            for &g in row {
                if g >= n_gallery {
                    return Err(Error::Shape(format!(
                        "query {q}: gallery index {g} out of range (n_gallery = {n_gallery})"
                    )));
                }
                if !seen.insert(g) {
                    return Err(Error::Shape(format!(
                        "query {q}: gallery index {g} repeated"
                    )));
                }
            }
        }
        Ok(Self { n_gallery, rows })
    }

    /// Skips validation; callers must only reorder already-valid rows.
    pub(crate) fn from_valid(n_gallery: usize, rows: Vec<Vec<usize>>) -> Self {
        debug_assert!(RankList::new(n_gallery, rows.clone()).is_ok());
        Self { n_gallery, rows }
    }

    pub fn n_query(&self) -> usize {
        self.rows.len()
    }

    pub fn n_gallery(&self) -> usize {
        self.n_gallery
    }

    pub fn row(&self, q: usize) -> &[usize] {
        &self.rows[q]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<usize>> {
        self.rows
    }
}
