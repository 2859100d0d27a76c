//! Naive reference implementations used as test oracles.
//!
//! Everything here is written for clarity over speed: dense vectors, full
//! sorts, literal loops. None of it calls into the library's algorithms.

#![allow(dead_code)]
// literal index loops are the point of a reference implementation
#![allow(clippy::needless_range_loop, clippy::manual_div_ceil)]

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use reid_core::metadata::{CameraId, ImageRecord, MetadataTable, TrackId};
use reid_core::synth::{ScenarioTruth, Split, TruthRecord};
use reid_core::EmbeddingSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rows of unit length, as `f32`. With `coarse`, coordinates are drawn from a
/// small grid and some rows are repeated so that distance ties occur.
pub fn unit_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize, coarse: bool) -> Vec<Vec<f32>> {
    let mut rows: Vec<Vec<f32>> = Vec::with_capacity(n);
    while rows.len() < n {
        if coarse && !rows.is_empty() && rng.gen_bool(0.2) {
            let i = rng.gen_range(0..rows.len());
            rows.push(rows[i].clone());
            continue;
        }
        let raw: Vec<f64> = (0..dim)
            .map(|_| {
                if coarse {
                    f64::from(rng.gen_range(-2i32..=2))
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        rows.push(raw.iter().map(|v| (v / norm) as f32).collect());
    }
    rows
}

pub fn embedding_set(rows: &[Vec<f32>]) -> EmbeddingSet {
    EmbeddingSet::from_rows(rows, "oracle").unwrap()
}

pub fn naive_dot(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] as f64 * b[i] as f64;
    }
    s
}

pub fn naive_euclid(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] as f64 - b[i] as f64;
        s += d * d;
    }
    s.sqrt()
}

fn top_k(d: &[Vec<f64>], p: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..d.len()).filter(|&x| x != p).collect();
    others.sort_by(|&a, &b| d[p][a].partial_cmp(&d[p][b]).unwrap().then(a.cmp(&b)));
    others.truncate(k);
    others
}

fn reciprocal(d: &[Vec<f64>], p: usize, k: usize) -> HashSet<usize> {
    let mut out = HashSet::new();
    for x in top_k(d, p, k) {
        if top_k(d, x, k).contains(&p) {
            out.insert(x);
        }
    }
    out
}

/// Expanded k-reciprocal set of `p` over a dense distance matrix.
pub fn naive_expanded(d: &[Vec<f64>], p: usize, k: usize) -> HashSet<usize> {
    let base = reciprocal(d, p, k);
    let half = (k + 1) / 2;
    let mut out = base.clone();
    for &x in &base {
        let cand = reciprocal(d, x, half);
        let shared = cand.intersection(&base).count() as f64;
        if shared >= 2.0 / 3.0 * cand.len() as f64 {
            out.extend(cand);
        }
    }
    out
}

/// Dense re-ranking reference: returns the `n_q × n_g` blended distance.
pub fn naive_rerank(
    q: &[Vec<f32>],
    g: &[Vec<f32>],
    k1: usize,
    k2: usize,
    lambda: f64,
) -> Vec<Vec<f64>> {
    let all: Vec<&Vec<f32>> = q.iter().chain(g.iter()).collect();
    let n = all.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = naive_euclid(all[i], all[j]);
        }
    }

    let mut v = vec![vec![0.0; n]; n];
    for p in 0..n {
        let mut support = naive_expanded(&d, p, k1);
        support.insert(p);
        let mut total = 0.0;
        for &x in &support {
            v[p][x] = (-d[p][x]).exp();
            total += v[p][x];
        }
        for x in 0..n {
            v[p][x] /= total;
        }
    }

    if k2 > 1 {
        let mut avg = vec![vec![0.0; n]; n];
        for p in 0..n {
            let mut members = vec![p];
            members.extend(top_k(&d, p, k2 - 1));
            for &m in &members {
                for x in 0..n {
                    avg[p][x] += v[m][x];
                }
            }
            for x in 0..n {
                avg[p][x] /= members.len() as f64;
            }
        }
        v = avg;
    }

    let nq = q.len();
    let mut out = vec![vec![0.0; g.len()]; nq];
    for i in 0..nq {
        for j in 0..g.len() {
            let gj = nq + j;
            let mut mins = 0.0;
            let mut maxs = 0.0;
            for x in 0..n {
                mins += v[i][x].min(v[gj][x]);
                maxs += v[i][x].max(v[gj][x]);
            }
            let jaccard = 1.0 - mins / maxs;
            out[i][j] = (1.0 - lambda) * jaccard + lambda * d[i][gj];
        }
    }
    out
}

/// Literal insertion simulation of track merging.
pub fn simulate_track_merge(row: &[usize], tracks: &[Option<u32>]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut done_tracks: Vec<u32> = Vec::new();
    for &g in row {
        if out.contains(&g) {
            continue;
        }
        out.push(g);
        if let Some(t) = tracks[g] {
            if !done_tracks.contains(&t) {
                done_tracks.push(t);
                for &h in row {
                    if h != g && tracks[h] == Some(t) && !out.contains(&h) {
                        out.push(h);
                    }
                }
            }
        }
    }
    out
}

/// Literal traversal of the query-to-gallery exclusion rule.
///
/// A camera is claimed by the first image seen from it; later images from that
/// camera stay in place only when they share the claiming image's track.
pub fn simulate_q2g(row: &[usize], cams: &[u32], tracks: &[Option<u32>]) -> Vec<usize> {
    let mut claim_cam: Vec<u32> = Vec::new();
    let mut claim_track: Vec<Option<u32>> = Vec::new();
    let mut kept = Vec::new();
    let mut tail = Vec::new();
    for &g in row {
        match claim_cam.iter().position(|&c| c == cams[g]) {
            None => {
                claim_cam.push(cams[g]);
                claim_track.push(tracks[g]);
                kept.push(g);
            }
            Some(k) => {
                if claim_track[k].is_some() && claim_track[k] == tracks[g] {
                    kept.push(g);
                } else {
                    tail.push(g);
                }
            }
        }
    }
    kept.extend(tail);
    kept
}

/// Column-by-column enumeration of the gallery-to-query exclusion rule.
pub fn brute_g2q(sim: &[Vec<f64>], q_cams: &[u32]) -> Vec<Vec<f64>> {
    let mut lo = f64::INFINITY;
    for row in sim {
        for &v in row {
            lo = lo.min(v);
        }
    }
    let sentinel = lo - 1000.0;
    let first = |row: &Vec<f64>| {
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        best
    };
    let mut out = sim.to_vec();
    for j in 0..sim[0].len() {
        let mut cams_seen: Vec<u32> = q_cams.to_vec();
        cams_seen.sort();
        cams_seen.dedup();
        for c in cams_seen {
            let group: Vec<usize> = (0..sim.len())
                .filter(|&i| q_cams[i] == c && first(&sim[i]) == j)
                .collect();
            if group.len() < 2 {
                continue;
            }
            let mut winner = group[0];
            for &i in &group[1..] {
                if sim[i][j] > sim[winner][j] {
                    winner = i;
                }
            }
            for &i in &group {
                if i != winner {
                    out[i][j] = sentinel;
                }
            }
        }
    }
    out
}

pub fn naive_ap(row: &[usize], positives: &[usize], cutoff: usize) -> Option<f64> {
    if positives.is_empty() {
        return None;
    }
    let mut precisions = Vec::new();
    for k in 0..row.len().min(cutoff) {
        if positives.contains(&row[k]) {
            let hits_so_far = row[..=k].iter().filter(|g| positives.contains(g)).count();
            precisions.push(hits_so_far as f64 / (k + 1) as f64);
        }
    }
    Some(precisions.iter().sum::<f64>() / positives.len() as f64)
}

pub fn naive_positives(truth: &ScenarioTruth, q: usize, exclude_same_camera: bool) -> Vec<usize> {
    let mut out = Vec::new();
    for (j, g) in truth.gallery.iter().enumerate() {
        if g.identity_id != truth.query[q].identity_id {
            continue;
        }
        if exclude_same_camera && g.camera_id == truth.query[q].camera_id {
            continue;
        }
        out.push(j);
    }
    out
}

pub fn naive_map(rows: &[Vec<usize>], truth: &ScenarioTruth, cutoff: usize, exclude: bool) -> f64 {
    let aps: Vec<f64> = (0..rows.len())
        .filter_map(|q| naive_ap(&rows[q], &naive_positives(truth, q, exclude), cutoff))
        .collect();
    aps.iter().sum::<f64>() / aps.len() as f64
}

pub fn naive_cmc(rows: &[Vec<usize>], truth: &ScenarioTruth, k: usize, exclude: bool) -> f64 {
    let mut hits = 0.0;
    let mut count = 0.0;
    for q in 0..rows.len() {
        let pos = naive_positives(truth, q, exclude);
        if pos.is_empty() {
            continue;
        }
        count += 1.0;
        if rows[q].iter().take(k).any(|g| pos.contains(g)) {
            hits += 1.0;
        }
    }
    hits / count
}

fn truth_record(id: String, split: Split, identity: u32, camera: u32) -> TruthRecord {
    TruthRecord {
        image_id: id,
        split,
        identity_id: identity,
        camera_id: CameraId(camera),
        track_id: None,
        brand_id: 0,
        type_id: 0,
        orientation_deg: 0.0,
    }
}

/// Random truth with at least one cross-camera positive for query 0.
pub fn random_truth(rng: &mut ChaCha8Rng, n_query: usize, n_gallery: usize) -> ScenarioTruth {
    let n_ids = (n_query / 2).max(2) as u32;
    let query: Vec<TruthRecord> = (0..n_query)
        .map(|i| {
            truth_record(
                format!("q{i}"),
                Split::Query,
                rng.gen_range(0..n_ids),
                rng.gen_range(0..4),
            )
        })
        .collect();
    let mut gallery: Vec<TruthRecord> = (0..n_gallery)
        .map(|j| {
            truth_record(
                format!("g{j}"),
                Split::Gallery,
                rng.gen_range(0..n_ids),
                rng.gen_range(0..4),
            )
        })
        .collect();
    gallery[0].identity_id = query[0].identity_id;
    gallery[0].camera_id = CameraId((query[0].camera_id.0 + 1) % 4);
    ScenarioTruth { query, gallery }
}

pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}

/// Random gallery cameras and tracks; tracks never span cameras.
pub fn random_gallery_layout(
    rng: &mut ChaCha8Rng,
    n: usize,
    n_cams: u32,
    with_tracks: bool,
) -> (Vec<u32>, Vec<Option<u32>>) {
    let cams: Vec<u32> = (0..n).map(|_| rng.gen_range(0..n_cams)).collect();
    let tracks = cams
        .iter()
        .map(|&c| {
            if with_tracks && rng.gen_bool(0.7) {
                // two possible tracks per camera
                Some(c * 2 + rng.gen_range(0..2))
            } else {
                None
            }
        })
        .collect();
    (cams, tracks)
}

pub fn metadata(cams: &[u32], tracks: &[Option<u32>]) -> MetadataTable {
    let records = cams
        .iter()
        .zip(tracks)
        .enumerate()
        .map(|(i, (&c, &t))| {
            let mut r = ImageRecord::new(format!("img{i}"), CameraId(c));
            r.track_id = t.map(TrackId);
            r
        })
        .collect();
    MetadataTable::new(records).unwrap()
}
