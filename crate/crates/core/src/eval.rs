//! Retrieval metrics: average precision with a top-K cutoff, mAP and CMC.

use std::collections::HashSet;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::RankList;
use crate::synth::ScenarioTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub top_k_cutoff: usize,
    /// Drop gallery positives captured by the query's own camera.
    pub exclude_same_camera_positives: bool,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            top_k_cutoff: 100,
            exclude_same_camera_positives: true,
        }
    }
}

/// AP of one ranked row; `None` when there is nothing to find.
///
/// Positives ranked beyond the cutoff (or absent from the row) add nothing
/// to the sum but still count in the denominator.
pub fn average_precision(
    ranked: &[usize],
    positives: &HashSet<usize>,
    protocol: &EvalProtocol,
) -> Option<f64> {
    if positives.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, g) in ranked.iter().take(protocol.top_k_cutoff).enumerate() {
        if positives.contains(g) {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    Some(sum / positives.len() as f64)
}

/// Gallery indices that count as matches for query `q`.
pub fn positives_for(truth: &ScenarioTruth, q: usize, protocol: &EvalProtocol) -> HashSet<usize> {
    let query = &truth.query[q];
    truth
        .gallery
        .iter()
        .enumerate()
        .filter(|(_, g)| g.identity_id == query.identity_id)
        .filter(|(_, g)| {
            !(protocol.exclude_same_camera_positives && g.camera_id == query.camera_id)
        })
        .map(|(j, _)| j)
        .collect()
}

fn check_alignment(r: &RankList, truth: &ScenarioTruth) -> Result<()> {
    if r.n_query() != truth.query.len() || r.n_gallery() != truth.gallery.len() {
        return Err(Error::Shape(format!(
            "rank list is {}x{} but truth has {} queries and {} gallery images",
            r.n_query(),
            r.n_gallery(),
            truth.query.len(),
            truth.gallery.len()
        )));
    }
    Ok(())
}

/// Per-query AP, `None` for skipped queries.
pub fn per_query_ap(
    r: &RankList,
    truth: &ScenarioTruth,
    protocol: &EvalProtocol,
) -> Result<Vec<Option<f64>>> {
    check_alignment(r, truth)?;
    if protocol.top_k_cutoff == 0 {
        return Err(Error::Param("evaluation cutoff must be at least 1".into()));
    }
    Ok((0..r.n_query())
        .map(|q| {
            let ap = average_precision(r.row(q), &positives_for(truth, q, protocol), protocol);
            if ap.is_none() {
                warn!(
                    "query {} ({}) has no positives; skipped",
                    q, truth.query[q].image_id
                );
            }
            ap
        })
        .collect())
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Result<f64> {
    let (sum, count) = values
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        return Err(Error::Eval("every query was skipped".into()));
    }
    Ok(sum / count as f64)
}

pub fn mean_ap(r: &RankList, truth: &ScenarioTruth, protocol: &EvalProtocol) -> Result<f64> {
    mean_of(per_query_ap(r, truth, protocol)?.into_iter())
}

/// Fraction of evaluable queries with a positive in the first `k` entries.
pub fn cmc_at_k(
    r: &RankList,
    truth: &ScenarioTruth,
    k: usize,
    protocol: &EvalProtocol,
) -> Result<f64> {
    check_alignment(r, truth)?;
    if k == 0 {
        return Err(Error::Param("CMC rank must be at least 1".into()));
    }
    mean_of((0..r.n_query()).map(|q| {
        let positives = positives_for(truth, q, protocol);
        if positives.is_empty() {
            return None;
        }
        let hit = r.row(q).iter().take(k).any(|g| positives.contains(g));
        Some(if hit { 1.0 } else { 0.0 })
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub map: f64,
    pub rank1: f64,
    pub rank5: f64,
    pub per_query_ap: Vec<Option<f64>>,
    pub n_evaluated: usize,
    pub top_k_cutoff: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reproducibility_key: Option<String>,
}

impl MetricsReport {
    pub fn compute(r: &RankList, truth: &ScenarioTruth, protocol: &EvalProtocol) -> Result<Self> {
        let per_query_ap = per_query_ap(r, truth, protocol)?;
        Ok(Self {
            map: mean_of(per_query_ap.iter().copied())?,
            rank1: cmc_at_k(r, truth, 1, protocol)?,
            rank5: cmc_at_k(r, truth, 5, protocol)?,
            n_evaluated: per_query_ap.iter().flatten().count(),
            per_query_ap,
            top_k_cutoff: protocol.top_k_cutoff,
            reproducibility_key: None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "mAP@{}: {:.4}\nrank-1: {:.4}\nrank-5: {:.4}\nqueries: {}\n",
            self.top_k_cutoff, self.map, self.rank1, self.rank5, self.n_evaluated
        );
        if let Some(key) = &self.reproducibility_key {
            s.push_str(&format!("key: {key}\n"));
        }
        s
    }
}
