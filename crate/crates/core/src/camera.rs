//! Camera- and track-based rank adjustments.
//!
//! Matrix-level operations (`same_camera_demote`, `gallery_to_query_exclusion`)
//! push excluded pairs down by overwriting them with a finite sentinel,
//! `min(sim) - SENTINEL_GAP`. Rank-level operations reorder without ever
//! dropping an index, so every output row is a permutation of its input.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::Result;
use crate::matrix::{Polarity, ScoreMatrix};
use crate::metadata::{CameraId, MetadataTable, TrackId};
use crate::ranking::RankList;

pub const SENTINEL_GAP: f64 = 1000.0;

/// Per-image camera and (optional) track, projected from a [`MetadataTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct CameraAssignment {
    pub cameras: Vec<CameraId>,
    pub tracks: Vec<Option<TrackId>>,
}

impl CameraAssignment {
    pub fn new(cameras: Vec<CameraId>, tracks: Vec<Option<TrackId>>) -> Self {
        assert_eq!(
            cameras.len(),
            tracks.len(),
            "camera and track columns must align"
        );
        Self { cameras, tracks }
    }

    pub fn cameras_only(cameras: Vec<CameraId>) -> Self {
        let tracks = vec![None; cameras.len()];
        Self { cameras, tracks }
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }
}

impl From<&MetadataTable> for CameraAssignment {
    fn from(t: &MetadataTable) -> Self {
        Self {
            cameras: t.iter().map(|r| r.camera_id).collect(),
            tracks: t.iter().map(|r| r.track_id).collect(),
        }
    }
}

/// The value excluded entries are set to: `min(sim) - SENTINEL_GAP`.
pub fn sentinel_for(sim: &ScoreMatrix) -> f64 {
    sim.min_value().unwrap_or(0.0) - SENTINEL_GAP
}

/// Demotes every pair where query and gallery share a camera.
pub fn same_camera_demote(
    sim: &ScoreMatrix,
    q_cam: &CameraAssignment,
    g_cam: &CameraAssignment,
) -> Result<ScoreMatrix> {
    sim.require_polarity(Polarity::Similarity, "same_camera_demote")?;
    sim.require_shape((q_cam.len(), g_cam.len()), "same_camera_demote")?;
    let sentinel = sentinel_for(sim);
    let mut out = sim.clone();
    for (i, qc) in q_cam.cameras.iter().enumerate() {
        for (j, gc) in g_cam.cameras.iter().enumerate() {
            if qc == gc {
                out.set(i, j, sentinel);
            }
        }
    }
    Ok(out)
}

fn order_row(row: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx
}

/// Descending similarity; ties go to the lower gallery index.
pub fn rank_from_scores(sim: &ScoreMatrix) -> Result<RankList> {
    sim.require_polarity(Polarity::Similarity, "rank_from_scores")?;
    let rows = (0..sim.n_query())
        .into_par_iter()
        .map(|i| order_row(sim.row(i)))
        .collect();
    Ok(RankList::from_valid(sim.n_gallery(), rows))
}

fn merge_row(row: &[usize], tracks: &[Option<TrackId>]) -> Vec<usize> {
    let mut members: HashMap<TrackId, Vec<usize>> = HashMap::new();
    for &g in row {
        if let Some(t) = tracks[g] {
            members.entry(t).or_default().push(g);
        }
    }
    let mut out = Vec::with_capacity(row.len());
    for &g in row {
        match tracks[g] {
            None => out.push(g),
            Some(t) => {
                if let Some(group) = members.remove(&t) {
                    out.extend(group);
                }
            }
        }
    }
    out
}

/// Pulls every track's members up behind its best-ranked member.
pub fn track_merge(r: &RankList, g_tracks: &CameraAssignment) -> RankList {
    let rows = r
        .rows()
        .par_iter()
        .map(|row| merge_row(row, &g_tracks.tracks))
        .collect();
    RankList::from_valid(r.n_gallery(), rows)
}

fn exclude_row(row: &[usize], g: &CameraAssignment) -> Vec<usize> {
    // camera -> track of the unit that claimed it (None: a trackless image)
    let mut claimed: HashMap<CameraId, Option<TrackId>> = HashMap::new();
    let mut kept = Vec::with_capacity(row.len());
    let mut moved = Vec::new();
    for &idx in row {
        let track = g.tracks[idx];
        let keep = match claimed.get(&g.cameras[idx]) {
            None => {
                claimed.insert(g.cameras[idx], track);
                true
            }
            Some(owner) => owner.is_some() && *owner == track,
        };
        if keep {
            kept.push(idx);
        } else {
            moved.push(idx);
        }
    }
    kept.extend(moved);
    kept
}

/// Keeps the first retrieved unit per camera in place and moves every later
/// image from that camera, in order, behind the kept sequence.
///
/// A unit is a whole track when the first image carries a track id, so the
/// remaining members of that track stay in place; otherwise it is the single
/// image.
pub fn query_to_gallery_exclusion(r: &RankList, g_cam: &CameraAssignment) -> RankList {
    let rows = r
        .rows()
        .par_iter()
        .map(|row| exclude_row(row, g_cam))
        .collect();
    RankList::from_valid(r.n_gallery(), rows)
}

/// For each gallery column, among same-camera queries that all rank it
/// first, keeps only the most similar query and demotes the others.
pub fn gallery_to_query_exclusion(
    sim: &ScoreMatrix,
    q_cam: &CameraAssignment,
) -> Result<ScoreMatrix> {
    sim.require_polarity(Polarity::Similarity, "gallery_to_query_exclusion")?;
    sim.require_shape((q_cam.len(), sim.n_gallery()), "gallery_to_query_exclusion")?;
    let sentinel = sentinel_for(sim);

    let top1: Vec<Option<usize>> = (0..sim.n_query())
        .into_par_iter()
        .map(|i| {
            let row = sim.row(i);
            (0..row.len()).reduce(|best, j| if row[j] > row[best] { j } else { best })
        })
        .collect();

    // (gallery column, query camera) -> claimants in ascending query order
    let mut groups: HashMap<(usize, CameraId), Vec<usize>> = HashMap::new();
    for (i, best) in top1.iter().enumerate() {
        if let Some(j) = best {
            groups.entry((*j, q_cam.cameras[i])).or_default().push(i);
        }
    }

    let mut out = sim.clone();
    for ((j, _), claimants) in groups {
        if claimants.len() < 2 {
            continue;
        }
        let winner = claimants
            .iter()
            .copied()
            .reduce(|a, b| if sim.get(b, j) > sim.get(a, j) { b } else { a })
            .unwrap();
        for i in claimants.into_iter().filter(|&i| i != winner) {
            out.set(i, j, sentinel);
        }
    }
    Ok(out)
}
