//! k-reciprocal re-ranking.
//!
//! Works on the dense pairwise distance matrix over the union of query and
//! gallery images (queries first). For each probe `p`:
//!
//! 1. `R(p, k1)`: the points `x` in the k1 nearest neighbours of `p` that
//!    also have `p` among their own k1 nearest neighbours. A point is never
//!    its own neighbour. Ties are broken by ascending index.
//! 2. Expansion: for each `x ∈ R(p, k1)`, `R(x, ⌈k1/2⌉)` is merged in when
//!    at least two thirds of it already lies in `R(p, k1)`.
//! 3. Encoding: `V_p[x] ∝ exp(-d(p, x))` over the expanded set plus `p`
//!    itself, normalized to sum to one.
//! 4. Local query expansion: `V_p` is replaced by the mean of the encodings
//!    of `p` and its `k2 - 1` nearest neighbours.
//! 5. `d_J(q, g) = 1 - Σ min(V_q, V_g) / Σ max(V_q, V_g)` and the output is
//!    `(1 - λ) d_J + λ d`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::euclidean_distance;
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::matrix::{Polarity, ScoreMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankParams {
    pub k1: usize,
    pub k2: usize,
    /// Weight of the original distance in the final blend.
    #[serde(rename = "lambda")]
    pub lambda_rr: f64,
}

impl Default for RerankParams {
    fn default() -> Self {
        Self {
            k1: 20,
            k2: 6,
            lambda_rr: 0.3,
        }
    }
}

impl RerankParams {
    /// Checks parameter ranges that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.k2 < 1 || self.k2 > self.k1 {
            return Err(Error::Param(format!(
                "re-ranking needs 1 <= k2 <= k1, got k1={} k2={}",
                self.k1, self.k2
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda_rr) {
            return Err(Error::Param(format!(
                "re-ranking lambda must lie in [0, 1], got {}",
                self.lambda_rr
            )));
        }
        Ok(())
    }

    fn validate_for(&self, n_total: usize) -> Result<()> {
        self.validate()?;
        if self.k1 >= n_total {
            return Err(Error::Param(format!(
                "re-ranking needs k1 < n_query + n_gallery = {n_total}, got {}",
                self.k1
            )));
        }
        Ok(())
    }
}

/// Half-neighbourhood size used by the expansion step.
pub fn half_k(k: usize) -> usize {
    k.div_ceil(2)
}

/// Nearest-neighbour lists over a square distance matrix, self excluded.
struct NeighborIndex {
    lists: Vec<Vec<usize>>,
}

impl NeighborIndex {
    fn build(dist: &ScoreMatrix, depth: usize) -> Self {
        let n = dist.n_query();
        let lists = (0..n)
            .into_par_iter()
            .map(|p| {
                let row = dist.row(p);
                let mut others: Vec<usize> = (0..n).filter(|&x| x != p).collect();
                let by_distance = |a: &usize, b: &usize| row[*a].total_cmp(&row[*b]).then(a.cmp(b));
                if depth < others.len() {
                    others.select_nth_unstable_by(depth, by_distance);
                    others.truncate(depth);
                }
                others.sort_unstable_by(by_distance);
                others
            })
            .collect();
        Self { lists }
    }

    fn top(&self, p: usize, k: usize) -> &[usize] {
        &self.lists[p][..k]
    }

    fn reciprocal(&self, p: usize, k: usize) -> Vec<usize> {
        self.top(p, k)
            .iter()
            .copied()
            .filter(|&x| self.top(x, k).contains(&p))
            .collect()
    }

    fn expanded(&self, p: usize, k: usize) -> Vec<usize> {
        let base = self.reciprocal(p, k);
        let half = half_k(k);
        let mut out = base.clone();
        for &x in &base {
            let cand = self.reciprocal(x, half);
            let shared = cand.iter().filter(|c| base.contains(c)).count();
            if 3 * shared >= 2 * cand.len() {
                out.extend(cand);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn check_union(dist: &ScoreMatrix) -> Result<()> {
    dist.require_polarity(Polarity::Distance, "re-ranking")?;
    if dist.n_query() != dist.n_gallery() {
        return Err(Error::Shape(format!(
            "union distance matrix must be square, got {:?}",
            dist.shape()
        )));
    }
    Ok(())
}

/// Expanded k-reciprocal neighbour set of `probe`, ascending by index.
pub fn k_reciprocal_neighbors(
    all_dist: &ScoreMatrix,
    probe: usize,
    k: usize,
) -> Result<Vec<usize>> {
    check_union(all_dist)?;
    let n = all_dist.n_query();
    if probe >= n {
        return Err(Error::Param(format!(
            "probe {probe} out of range for {n} points"
        )));
    }
    if k < 1 || k >= n {
        return Err(Error::Param(format!("k must lie in [1, {}), got {k}", n)));
    }
    let index = NeighborIndex::build(all_dist, k);
    Ok(index.expanded(probe, k))
}

type SparseRow = Vec<(usize, f64)>;

/// Re-ranks from a precomputed union distance matrix whose first `n_query`
/// rows/columns are the queries. Returns an `n_query × (n - n_query)`
/// distance matrix.
pub fn rerank_union(
    all_dist: &ScoreMatrix,
    n_query: usize,
    params: &RerankParams,
) -> Result<ScoreMatrix> {
    check_union(all_dist)?;
    let n = all_dist.n_query();
    if n_query > n {
        return Err(Error::Shape(format!("{n_query} queries in a union of {n}")));
    }
    params.validate_for(n)?;
    let n_gallery = n - n_query;
    let index = NeighborIndex::build(all_dist, params.k1);

    let encodings: Vec<SparseRow> = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut support = index.expanded(p, params.k1);
            if let Err(pos) = support.binary_search(&p) {
                support.insert(pos, p);
            }
            let row = all_dist.row(p);
            let weights: Vec<f64> = support.iter().map(|&x| (-row[x]).exp()).collect();
            let total: f64 = weights.iter().sum();
            support
                .into_iter()
                .zip(weights)
                .map(|(x, w)| (x, w / total))
                .collect()
        })
        .collect();

    let encodings: Vec<SparseRow> = if params.k2 > 1 {
        (0..n)
            .into_par_iter()
            .map(|p| {
                let members: Vec<usize> = std::iter::once(p)
                    .chain(index.top(p, params.k2 - 1).iter().copied())
                    .collect();
                let mut dense = vec![0.0; n];
                for &m in &members {
                    for &(x, v) in &encodings[m] {
                        dense[x] += v;
                    }
                }
                let scale = members.len() as f64;
                dense
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, v)| v != 0.0)
                    .map(|(x, v)| (x, v / scale))
                    .collect()
            })
            .collect()
    } else {
        encodings
    };

    // Inverted index over gallery encodings: column -> [(gallery row, weight)].
    let mut postings: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (j, enc) in encodings[n_query..].iter().enumerate() {
        for &(x, v) in enc {
            postings[x].push((j, v));
        }
    }
    let mass: Vec<f64> = encodings
        .iter()
        .map(|e| e.iter().map(|&(_, v)| v).sum())
        .collect();

    let lambda = params.lambda_rr;
    Ok(ScoreMatrix::from_row_fn(
        n_query,
        n_gallery,
        Polarity::Distance,
        |i| {
            let mut overlap = vec![0.0; n_gallery];
            for &(x, v) in &encodings[i] {
                for &(j, u) in &postings[x] {
                    overlap[j] += v.min(u);
                }
            }
            let original = &all_dist.row(i)[n_query..];
            overlap
                .into_iter()
                .enumerate()
                .map(|(j, min_sum)| {
                    // Σ max = Σ a + Σ b - Σ min
                    let max_sum = mass[i] + mass[n_query + j] - min_sum;
                    let jaccard = (1.0 - min_sum / max_sum).max(0.0);
                    (1.0 - lambda) * jaccard + lambda * original[j]
                })
                .collect()
        },
    ))
}

/// Re-ranks row-normalized query and gallery embeddings under Euclidean distance.
pub fn k_reciprocal_rerank(
    q: &EmbeddingSet,
    g: &EmbeddingSet,
    params: &RerankParams,
) -> Result<ScoreMatrix> {
    params.validate_for(q.n_images() + g.n_images())?;
    let all = q.concat(g)?;
    let dist = euclidean_distance(&all, &all)?;
    rerank_union(&dist, q.n_images(), params)
}
