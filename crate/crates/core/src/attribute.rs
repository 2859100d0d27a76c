//! Brand/type match fusion and folded-orientation fusion.
//!
//! Orientation is folded with the double-angle embedding
//! `θ ↦ (cos 2θ, sin 2θ)`, which identifies a heading with its reverse:
//! front and back views land on the same vector, side views on its opposite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Polarity, ScoreMatrix};
use crate::metadata::{ImageRecord, MetadataTable};

pub const ORIENTATION_BINS: u32 = 36;
const BIN_WIDTH_DEG: f64 = 360.0 / ORIENTATION_BINS as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Brand,
    Type,
}

impl AttributeKind {
    pub fn of(self, r: &ImageRecord) -> Option<u32> {
        match self {
            AttributeKind::Brand => r.brand_id,
            AttributeKind::Type => r.type_id,
        }
    }
}

/// Binary `n_query × n_gallery` attribute agreement.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchMatrix {
    pub kind: AttributeKind,
    n_query: usize,
    n_gallery: usize,
    values: Vec<u8>,
}

impl MatchMatrix {
    pub fn shape(&self) -> (usize, usize) {
        (self.n_query, self.n_gallery)
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.values[i * self.n_gallery + j]
    }
}

/// 1 where both images carry `kind` and agree on it, else 0.
pub fn attribute_match_matrix(
    q: &MetadataTable,
    g: &MetadataTable,
    kind: AttributeKind,
) -> MatchMatrix {
    let mut values = Vec::with_capacity(q.len() * g.len());
    for qr in q {
        let a = kind.of(qr);
        values.extend(g.iter().map(|gr| match (a, kind.of(gr)) {
            (Some(x), Some(y)) if x == y => 1,
            _ => 0,
        }));
    }
    MatchMatrix {
        kind,
        n_query: q.len(),
        n_gallery: g.len(),
        values,
    }
}

/// `sim + w · match`.
pub fn fuse_attribute(sim: &ScoreMatrix, matches: &MatchMatrix, w: f64) -> Result<ScoreMatrix> {
    sim.require_polarity(Polarity::Similarity, "fuse_attribute")?;
    sim.require_shape(matches.shape(), "fuse_attribute")?;
    check_weight(w, "attribute weight")?;
    let values = sim
        .values()
        .iter()
        .zip(&matches.values)
        .map(|(&s, &m)| s + w * f64::from(m))
        .collect();
    ScoreMatrix::new(sim.n_query(), sim.n_gallery(), values, Polarity::Similarity)
}

/// Center of a 10° orientation class, in degrees.
pub fn bin_to_orientation(bin: u32) -> Result<f64> {
    if bin >= ORIENTATION_BINS {
        return Err(Error::Param(format!(
            "orientation bin {bin} outside [0, {ORIENTATION_BINS})"
        )));
    }
    Ok(f64::from(bin) * BIN_WIDTH_DEG + BIN_WIDTH_DEG / 2.0)
}

/// Inverse of [`bin_to_orientation`] for any heading in `[0, 360)`.
pub fn orientation_to_bin(theta: f64) -> Result<u32> {
    check_heading(theta)?;
    Ok(((theta / BIN_WIDTH_DEG) as u32).min(ORIENTATION_BINS - 1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldedOrientation(pub [f64; 2]);

impl FoldedOrientation {
    pub fn dot(&self, other: &FoldedOrientation) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1]
    }
}

fn check_heading(theta: f64) -> Result<()> {
    if !(0.0..360.0).contains(&theta) {
        return Err(Error::Param(format!(
            "orientation {theta} outside [0, 360)"
        )));
    }
    Ok(())
}

fn check_weight(w: f64, what: &str) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(Error::Param(format!(
            "{what} must be finite and >= 0, got {w}"
        )));
    }
    Ok(())
}

/// Double-angle embedding `(cos 2θ, sin 2θ)`.
///
/// θ is reduced modulo 180° before the trigonometry so that a heading and
/// its reverse produce bit-identical vectors.
pub fn fold_orientation(theta: f64) -> Result<FoldedOrientation> {
    check_heading(theta)?;
    let half_turn = if theta >= 180.0 { theta - 180.0 } else { theta };
    let doubled = (2.0 * half_turn).to_radians();
    Ok(FoldedOrientation([doubled.cos(), doubled.sin()]))
}

/// Dot products of folded orientations; 0 where either heading is absent.
pub fn orientation_similarity(q: &MetadataTable, g: &MetadataTable) -> Result<ScoreMatrix> {
    let fold_all = |t: &MetadataTable| -> Result<Vec<Option<FoldedOrientation>>> {
        t.iter()
            .map(|r| r.orientation_deg.map(fold_orientation).transpose())
            .collect()
    };
    let qf = fold_all(q)?;
    let gf = fold_all(g)?;
    let mut values = Vec::with_capacity(qf.len() * gf.len());
    for a in &qf {
        values.extend(gf.iter().map(|b| match (a, b) {
            (Some(a), Some(b)) => a.dot(b),
            _ => 0.0,
        }));
    }
    ScoreMatrix::new(qf.len(), gf.len(), values, Polarity::Similarity)
}

/// `sim − λ · orient`.
pub fn fuse_orientation(
    sim: &ScoreMatrix,
    orient: &ScoreMatrix,
    lambda: f64,
) -> Result<ScoreMatrix> {
    sim.require_polarity(Polarity::Similarity, "fuse_orientation")?;
    sim.require_shape(orient.shape(), "fuse_orientation")?;
    check_weight(lambda, "orientation weight")?;
    let values = sim
        .values()
        .iter()
        .zip(orient.values())
        .map(|(&s, &o)| s - lambda * o)
        .collect();
    ScoreMatrix::new(sim.n_query(), sim.n_gallery(), values, Polarity::Similarity)
}
