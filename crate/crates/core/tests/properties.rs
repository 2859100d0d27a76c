use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;

use reid_core::attribute::{
    attribute_match_matrix, fold_orientation, fuse_attribute, fuse_orientation,
    orientation_similarity, AttributeKind,
};
use reid_core::camera::rank_from_scores;
use reid_core::distance::{cosine_similarity, ensemble_sum, minmax_normalize, EnsembleInput};
use reid_core::embedding::EmbeddingSet;
use reid_core::eval::{cmc_at_k, mean_ap, EvalProtocol};
use reid_core::losses::{
    cosface_loss, gem_pool, triplet_loss, CosfaceParams, GemParams, TripletParams,
};
use reid_core::metadata::{CameraId, ImageRecord, MetadataTable};
use reid_core::synth::{ScenarioTruth, Split, TruthRecord};
use reid_core::{Polarity, RankList, ScoreMatrix};

fn rows(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    vec(vec(-5.0f32..5.0, dim), n).prop_filter("non-zero rows", |rs| {
        rs.iter()
            .all(|r| r.iter().map(|v| v * v).sum::<f32>() > 1e-3)
    })
}

fn matrix(nq: usize, ng: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    vec(vec(-1.0f64..1.0, ng), nq)
}

fn argsort(row: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx
}

fn records_with(f: impl Fn(usize, &mut ImageRecord), n: usize) -> MetadataTable {
    MetadataTable::new(
        (0..n)
            .map(|i| {
                let mut r = ImageRecord::new(format!("i{i}"), CameraId(0));
                f(i, &mut r);
                r
            })
            .collect(),
    )
    .unwrap()
}

fn truth_from(ids_q: &[u32], ids_g: &[u32], cams_g: &[u32]) -> ScenarioTruth {
    let rec = |i: usize, split, id: u32, cam: u32| TruthRecord {
        image_id: format!("{i}"),
        split,
        identity_id: id,
        camera_id: CameraId(cam),
        track_id: None,
        brand_id: 0,
        type_id: 0,
        orientation_deg: 0.0,
    };
    ScenarioTruth {
        query: ids_q
            .iter()
            .enumerate()
            .map(|(i, &id)| rec(i, Split::Query, id, 100))
            .collect(),
        gallery: ids_g
            .iter()
            .zip(cams_g)
            .enumerate()
            .map(|(i, (&id, &c))| rec(i, Split::Gallery, id, c))
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_is_idempotent(r in rows(5, 7)) {
        let e = EmbeddingSet::from_rows(&r, "p").unwrap().normalize_rows().unwrap();
        let twice = e.normalize_rows().unwrap();
        for (a, b) in e.data().iter().zip(twice.data()) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
        for row in e.rows() {
            let n: f64 = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn cosine_transpose(q in rows(4, 6), g in rows(7, 6)) {
        let q = EmbeddingSet::from_rows(&q, "q").unwrap().normalize_rows().unwrap();
        let g = EmbeddingSet::from_rows(&g, "g").unwrap().normalize_rows().unwrap();
        let qg = cosine_similarity(&q, &g).unwrap().transpose();
        let gq = cosine_similarity(&g, &q).unwrap();
        for (a, b) in qg.values().iter().zip(gq.values()) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn ensemble_is_linear(a in matrix(3, 5), b in matrix(3, 5), w in vec(0.0f64..2.0, 2), v in vec(0.0f64..2.0, 2)) {
        let ms = || vec![
            ScoreMatrix::from_rows(&a, Polarity::Similarity).unwrap(),
            ScoreMatrix::from_rows(&b, Polarity::Similarity).unwrap(),
        ];
        let left = ensemble_sum(&EnsembleInput::new(ms(), w.clone()).unwrap());
        let right = ensemble_sum(&EnsembleInput::new(ms(), v.clone()).unwrap());
        let both = ensemble_sum(&EnsembleInput::new(ms(), vec![w[0] + v[0], w[1] + v[1]]).unwrap());
        for k in 0..15 {
            prop_assert!((left.values()[k] + right.values()[k] - both.values()[k]).abs() <= 1e-6);
        }
    }

    #[test]
    fn minmax_keeps_row_order(m in matrix(4, 6)) {
        let s = ScoreMatrix::from_rows(&m, Polarity::Similarity).unwrap();
        prop_assume!(s.max_value() > s.min_value());
        let n = minmax_normalize(&s).unwrap();
        for i in 0..4 {
            prop_assert_eq!(argsort(s.row(i)), argsort(n.row(i)));
        }
        prop_assert_eq!(n.min_value(), Some(0.0));
        prop_assert_eq!(n.max_value(), Some(1.0));
    }

    #[test]
    fn orientation_similarity_is_symmetric(a in vec(0.0f64..360.0, 4), b in vec(0.0f64..360.0, 6)) {
        let ta = records_with(|i, r| r.orientation_deg = Some(a[i]), 4);
        let tb = records_with(|i, r| r.orientation_deg = Some(b[i]), 6);
        let ab = orientation_similarity(&ta, &tb).unwrap().transpose();
        let ba = orientation_similarity(&tb, &ta).unwrap();
        for (x, y) in ab.values().iter().zip(ba.values()) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn attribute_fusion_never_decreases(m in matrix(3, 5), brands in vec(0u32..3, 8), w in 0.0f64..1.0) {
        let q = records_with(|i, r| r.brand_id = Some(brands[i]), 3);
        let g = records_with(|i, r| r.brand_id = Some(brands[3 + i]), 5);
        let s = ScoreMatrix::from_rows(&m, Polarity::Similarity).unwrap();
        let out = fuse_attribute(&s, &attribute_match_matrix(&q, &g, AttributeKind::Brand), w).unwrap();
        for (a, b) in s.values().iter().zip(out.values()) {
            prop_assert!(b >= a);
        }
    }

    #[test]
    fn raising_w_only_helps_matching_items(row in vec(-1.0f64..1.0, 8), brands in vec(0u32..2, 8), w1 in 0.0f64..0.5, dw in 0.0f64..0.5) {
        let q = records_with(|_, r| r.brand_id = Some(0), 1);
        let g = records_with(|i, r| r.brand_id = Some(brands[i]), 8);
        let s = ScoreMatrix::from_rows(&[row], Polarity::Similarity).unwrap();
        let m = attribute_match_matrix(&q, &g, AttributeKind::Brand);
        let pos = |w: f64| {
            let order = argsort(fuse_attribute(&s, &m, w).unwrap().row(0));
            let mut p = vec![0; 8];
            for (rank, &j) in order.iter().enumerate() { p[j] = rank; }
            p
        };
        let (lo, hi) = (pos(w1), pos(w1 + dw));
        for a in 0..8 {
            for b in 0..8 {
                if brands[a] == 0 && brands[b] != 0 && lo[a] < lo[b] {
                    prop_assert!(hi[a] < hi[b]);
                }
            }
        }
    }

    #[test]
    fn orientation_fusion_penalizes_agreement(base in -1.0f64..1.0, lambda in 0.01f64..1.0, theta in 0.0f64..360.0) {
        // gallery 0 agrees with the query heading (after folding), gallery 1 is perpendicular
        let q = records_with(|_, r| r.orientation_deg = Some(theta), 1);
        let g = records_with(|i, r| {
            let h = if i == 0 { theta + 180.0 } else { theta + 90.0 };
            r.orientation_deg = Some(h % 360.0);
        }, 2);
        let s = ScoreMatrix::from_rows(&[vec![base, base]], Polarity::Similarity).unwrap();
        let o = orientation_similarity(&q, &g).unwrap();
        prop_assert!(o.get(0, 0) > 0.0 && o.get(0, 1) < 0.0);
        let out = fuse_orientation(&s, &o, lambda).unwrap();
        prop_assert!(out.get(0, 0) < out.get(0, 1));
    }

    #[test]
    fn cmc_non_decreasing_and_bounded(ids_g in vec(0u32..4, 12), cams in vec(0u32..3, 12), seed in any::<u64>()) {
        let ids_q = [0u32, 1, 2, 3];
        let truth = truth_from(&ids_q, &ids_g, &cams);
        prop_assume!(ids_q.iter().any(|q| ids_g.contains(q)));
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<usize>> = (0..4).map(|_| {
            let mut v: Vec<usize> = (0..12).collect();
            rand::seq::SliceRandom::shuffle(v.as_mut_slice(), &mut r);
            v
        }).collect();
        let ranks = RankList::new(12, rows).unwrap();
        let p = EvalProtocol { top_k_cutoff: 100, exclude_same_camera_positives: false };
        let mut last = 0.0;
        for k in 1..=12 {
            let c = cmc_at_k(&ranks, &truth, k, &p).unwrap();
            prop_assert!(c >= last && c <= 1.0);
            last = c;
        }
        let map = mean_ap(&ranks, &truth, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&map));
    }

    #[test]
    fn map_depends_only_on_order(m in matrix(3, 10), ids_g in vec(0u32..3, 10)) {
        let truth = truth_from(&[0, 1, 2], &ids_g, &[0; 10]);
        prop_assume!((0..3).any(|q| ids_g.contains(&q)));
        let p = EvalProtocol { top_k_cutoff: 100, exclude_same_camera_positives: false };
        let s = ScoreMatrix::from_rows(&m, Polarity::Similarity).unwrap();
        let t: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|x| 2.0 * x + 1.0).collect()).collect();
        let st = ScoreMatrix::from_rows(&t, Polarity::Similarity).unwrap();
        let a = mean_ap(&rank_from_scores(&s).unwrap(), &truth, &p).unwrap();
        let b = mean_ap(&rank_from_scores(&st).unwrap(), &truth, &p).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gem_bounds_and_monotone(xs in vec(0.0f64..10.0, 2..12), p1 in 1.0f64..20.0, dp in 0.0f64..20.0) {
        let f = |p: f64| gem_pool(std::slice::from_ref(&xs), &GemParams::shared(p)).unwrap()[0];
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let max = xs.iter().copied().fold(0.0, f64::max);
        let (a, b) = (f(p1), f(p1 + dp));
        prop_assert!(a <= b * (1.0 + 1e-12));
        prop_assert!(a >= mean * (1.0 - 1e-12) && a <= max * (1.0 + 1e-12));
    }

    #[test]
    fn triplet_is_lipschitz(dp in 0.0f64..3.0, dn in 0.0f64..3.0, eps in -1.0f64..1.0) {
        let p = TripletParams::default();
        let base = triplet_loss(dp, dn, &p).unwrap();
        prop_assert!(base >= 0.0);
        let shifted_p = triplet_loss((dp + eps).max(0.0), dn, &p).unwrap();
        let shifted_n = triplet_loss(dp, (dn + eps).max(0.0), &p).unwrap();
        prop_assert!((shifted_p - base).abs() <= ((dp + eps).max(0.0) - dp).abs() + 1e-12);
        prop_assert!((shifted_n - base).abs() <= ((dn + eps).max(0.0) - dn).abs() + 1e-12);
    }

    #[test]
    fn cosface_monotone_in_cosines(c in vec(-0.9f64..0.9, 5), y in 0usize..5, j in 0usize..5, h in 0.001f64..0.09) {
        let params = CosfaceParams::default();
        let out = cosface_loss(std::slice::from_ref(&c), &[y], &params).unwrap();
        let mut up = c.clone();
        up[j] += h;
        let moved = cosface_loss(&[up], &[y], &params).unwrap().loss;
        // strictness is only observable when the change exceeds rounding in the loss
        let resolvable = out.grad[0][j].abs() * h > 1e-12 * out.loss.max(1e-300);
        if j == y {
            prop_assert!(moved <= out.loss);
            prop_assert!(!resolvable || moved < out.loss);
        } else {
            prop_assert!(moved >= out.loss);
            prop_assert!(!resolvable || moved > out.loss);
        }
    }
}

#[test]
fn fold_on_degree_grid() {
    for deg in 0..360 {
        let theta = deg as f64;
        let back = (theta + 180.0) % 360.0;
        assert_eq!(
            fold_orientation(theta).unwrap(),
            fold_orientation(back).unwrap(),
            "{deg}"
        );
    }
}
