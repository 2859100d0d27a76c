//! Pairwise scoring of embedding sets and weighted ensembling of score matrices.

use rayon::prelude::*;

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::matrix::{Polarity, ScoreMatrix};

fn check_dims(q: &EmbeddingSet, g: &EmbeddingSet) -> Result<()> {
    if q.dim() != g.dim() {
        return Err(Error::Shape(format!(
            "query dim {} != gallery dim {}",
            q.dim(),
            g.dim()
        )));
    }
    Ok(())
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// Dot products of row-normalized sets, i.e. cosine similarity.
pub fn cosine_similarity(q: &EmbeddingSet, g: &EmbeddingSet) -> Result<ScoreMatrix> {
    check_dims(q, g)?;
    Ok(ScoreMatrix::from_row_fn(
        q.n_images(),
        g.n_images(),
        Polarity::Similarity,
        |i| {
            let qi = q.row(i);
            g.rows().map(|gj| dot(qi, gj)).collect()
        },
    ))
}

pub fn euclidean_distance(q: &EmbeddingSet, g: &EmbeddingSet) -> Result<ScoreMatrix> {
    check_dims(q, g)?;
    Ok(ScoreMatrix::from_row_fn(
        q.n_images(),
        g.n_images(),
        Polarity::Distance,
        |i| {
            let qi = q.row(i);
            g.rows()
                .map(|gj| {
                    qi.iter()
                        .zip(gj)
                        .map(|(&a, &b)| {
                            let d = f64::from(a) - f64::from(b);
                            d * d
                        })
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        },
    ))
}

/// Affine map of all entries onto `[0, 1]`.
pub fn minmax_normalize(m: &ScoreMatrix) -> Result<ScoreMatrix> {
    let (lo, hi) = match (m.min_value(), m.max_value()) {
        (Some(lo), Some(hi)) if hi > lo => (lo, hi),
        _ => {
            return Err(Error::Param(
                "min-max normalization needs at least two distinct values".into(),
            ))
        }
    };
    let range = hi - lo;
    let values = m.values().par_iter().map(|&v| (v - lo) / range).collect();
    ScoreMatrix::new(m.n_query(), m.n_gallery(), values, m.polarity())
}

/// Same-shape similarity matrices paired with non-negative weights.
#[derive(Debug, Clone)]
pub struct EnsembleInput {
    matrices: Vec<ScoreMatrix>,
    weights: Vec<f64>,
}

impl EnsembleInput {
    pub fn new(matrices: Vec<ScoreMatrix>, weights: Vec<f64>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::Shape("ensemble needs at least one matrix".into()))?;
        let shape = first.shape();
        for (k, m) in matrices.iter().enumerate() {
            m.require_shape(shape, &format!("ensemble matrix {k}"))?;
            m.require_polarity(Polarity::Similarity, "ensemble_sum")?;
        }
        if weights.len() != matrices.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} matrices",
                weights.len(),
                matrices.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Param(
                "ensemble weights must be finite and >= 0".into(),
            ));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::Param(
                "at least one ensemble weight must be positive".into(),
            ));
        }
        Ok(Self { matrices, weights })
    }

    /// Equal unit weights.
    pub fn uniform(matrices: Vec<ScoreMatrix>) -> Result<Self> {
        let weights = vec![1.0; matrices.len()];
        Self::new(matrices, weights)
    }

    pub fn matrices(&self) -> &[ScoreMatrix] {
        &self.matrices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `Σ_k weights[k] · matrices[k]`, accumulated per element in ascending `k`.
pub fn ensemble_sum(input: &EnsembleInput) -> ScoreMatrix {
    let (n_query, n_gallery) = input.matrices[0].shape();
    let values = (0..n_query * n_gallery)
        .into_par_iter()
        .map(|e| {
            let mut acc = 0.0;
            for (m, &w) in input.matrices.iter().zip(&input.weights) {
                acc += w * m.values()[e];
            }
            acc
        })
        .collect();
    ScoreMatrix::new(n_query, n_gallery, values, Polarity::Similarity)
        .expect("weighted sum of finite values is finite")
}
