//! Synthetic multi-camera scenarios with ground truth.
//!
//! Each identity gets an appearance vector correlated with its brand and
//! type, and is seen once at each of `cameras_per_identity` distinct cameras.
//! Every sighting has a heading; an image's clean feature is
//!
//! ```text
//! identity_signal · v_id + orientation_signal · (cos 2θ · b0 + sin 2θ · b1)
//! ```
//!
//! with `b0, b1` a fixed orthonormal pair, so views that differ by a half turn
//! share the view component. Each simulated extractor ("source") adds its own
//! isotropic noise of total standard deviation `noise_sigma` (doubled for
//! blurred images) before L2 normalization.
//!
//! The first sighting of each identity contributes one query image; the
//! remaining sightings become gallery tracks of `images_per_sighting` images.

use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::attribute::{bin_to_orientation, orientation_to_bin, ORIENTATION_BINS};
use crate::embedding::{save_embeddings, EmbeddingSet};
use crate::error::{Error, Result};
use crate::metadata::{parse_cell, save_metadata, CameraId, ImageRecord, MetadataTable, TrackId};

/// Weight of the shared brand direction in an identity's appearance.
const BRAND_MIX: f64 = 0.5;
/// Weight of the shared type direction in an identity's appearance.
const TYPE_MIX: f64 = 0.3;
/// Blurred images get this multiple of the base noise.
const BLUR_NOISE_FACTOR: f64 = 2.0;
/// Spread of headings within one sighting, in degrees.
const HEADING_JITTER_DEG: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_identities: usize,
    pub cameras_per_identity: usize,
    pub images_per_sighting: usize,
    pub n_cameras: usize,
    pub dim: usize,
    pub identity_signal: f64,
    pub orientation_signal: f64,
    pub noise_sigma: f64,
    pub blur_fraction: f64,
    pub n_sources: usize,
    pub label_noise: f64,
    pub n_brands: usize,
    pub n_types: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_identities: 100,
            cameras_per_identity: 4,
            images_per_sighting: 3,
            n_cameras: 8,
            dim: 64,
            identity_signal: 1.0,
            orientation_signal: 0.5,
            noise_sigma: 0.6,
            blur_fraction: 0.3,
            n_sources: 4,
            label_noise: 0.1,
            n_brands: 10,
            n_types: 4,
            seed: 7,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_identities", self.n_identities),
            ("images_per_sighting", self.images_per_sighting),
            ("n_cameras", self.n_cameras),
            ("dim", self.dim),
            ("n_sources", self.n_sources),
            ("n_brands", self.n_brands),
            ("n_types", self.n_types),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.cameras_per_identity < 2 {
            return Err(Error::Config(
                "cameras_per_identity must be at least 2 (one query sighting plus a gallery sighting)".into(),
            ));
        }
        if self.cameras_per_identity > self.n_cameras {
            return Err(Error::Config(format!(
                "cameras_per_identity ({}) exceeds n_cameras ({})",
                self.cameras_per_identity, self.n_cameras
            )));
        }
        for (name, v) in [
            ("blur_fraction", self.blur_fraction),
            ("label_noise", self.label_noise),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("identity_signal", self.identity_signal),
            ("orientation_signal", self.orientation_signal),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Query,
    Gallery,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub image_id: String,
    pub split: Split,
    pub identity_id: u32,
    pub camera_id: CameraId,
    pub track_id: Option<TrackId>,
    pub brand_id: u32,
    pub type_id: u32,
    pub orientation_deg: f64,
}

pub const TRUTH_HEADER: [&str; 8] = [
    "image_id",
    "split",
    "identity_id",
    "camera_id",
    "track_id",
    "brand_id",
    "type_id",
    "orientation_deg",
];

/// Ground truth, row-aligned with the query and gallery sets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioTruth {
    pub query: Vec<TruthRecord>,
    pub gallery: Vec<TruthRecord>,
}

impl ScenarioTruth {
    /// True when every query has a gallery match on another camera.
    pub fn is_cross_camera_evaluable(&self) -> bool {
        self.query.iter().all(|q| {
            self.gallery
                .iter()
                .any(|g| g.identity_id == q.identity_id && g.camera_id != q.camera_id)
        })
    }

    /// Rows are written queries first, then gallery, each in set order.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(TRUTH_HEADER)?;
        for r in self.query.iter().chain(&self.gallery) {
            w.write_record([
                r.image_id.clone(),
                match r.split {
                    Split::Query => "query".into(),
                    Split::Gallery => "gallery".into(),
                },
                r.identity_id.to_string(),
                r.camera_id.0.to_string(),
                r.track_id.map(|t| t.0.to_string()).unwrap_or_default(),
                r.brand_id.to_string(),
                r.type_id.to_string(),
                r.orientation_deg.to_string(),
            ])?;
        }
        w.into_inner()
            .map_err(|e| Error::Shape(format!("csv flush: {e}")))
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        if rdr.headers()?.iter().ne(TRUTH_HEADER.iter().copied()) {
            return Err(Error::Schema {
                row: 0,
                reason: format!("expected header {}", TRUTH_HEADER.join(",")),
            });
        }
        let mut truth = ScenarioTruth::default();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let required = |col: usize| -> Result<&str> {
                match rec.get(col) {
                    Some(v) if !v.is_empty() => Ok(v),
                    _ => Err(Error::Schema {
                        row,
                        reason: format!("{} is required", TRUTH_HEADER[col]),
                    }),
                }
            };
            let num = |col: usize| -> Result<u32> {
                parse_cell(required(col)?, row, TRUTH_HEADER[col]).map(|v| v.unwrap())
            };
            let split = match required(1)? {
                "query" => Split::Query,
                "gallery" => Split::Gallery,
                other => {
                    return Err(Error::Schema {
                        row,
                        reason: format!("unknown split {other:?}"),
                    })
                }
            };
            let record = TruthRecord {
                image_id: required(0)?.to_string(),
                split,
                identity_id: num(2)?,
                camera_id: CameraId(num(3)?),
                track_id: parse_cell::<u32>(rec.get(4).unwrap_or(""), row, "track_id")?
                    .map(TrackId),
                brand_id: num(5)?,
                type_id: num(6)?,
                orientation_deg: parse_cell(required(7)?, row, "orientation_deg")?.unwrap(),
            };
            match split {
                Split::Query => truth.query.push(record),
                Split::Gallery => truth.gallery.push(record),
            }
        }
        Ok(truth)
    }
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<ScenarioTruth> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ScenarioTruth::from_csv_reader(file)
}

pub fn save_truth(truth: &ScenarioTruth, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, truth.to_csv_bytes()?).map_err(|e| Error::io(path, e))
}

/// One generated scenario: per-source embeddings plus observable metadata
/// (noisy attribute labels, no identities) and the hidden truth.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub query_sources: Vec<EmbeddingSet>,
    pub gallery_sources: Vec<EmbeddingSet>,
    pub query_meta: MetadataTable,
    pub gallery_meta: MetadataTable,
    pub truth: ScenarioTruth,
}

impl Scenario {
    /// Writes `query_s{k}.emb`, `gallery_s{k}.emb`, `query.csv`, `gallery.csv`
    /// and `truth.csv` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (k, (q, g)) in self
            .query_sources
            .iter()
            .zip(&self.gallery_sources)
            .enumerate()
        {
            save_embeddings(q, dir.join(format!("query_s{k}.emb")))?;
            save_embeddings(g, dir.join(format!("gallery_s{k}.emb")))?;
        }
        save_metadata(&self.query_meta, dir.join("query.csv"))?;
        save_metadata(&self.gallery_meta, dir.join("gallery.csv"))?;
        save_truth(&self.truth, dir.join("truth.csv"))
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn orthonormal_pair(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let a = unit(gaussian_vec(rng, dim));
    if dim == 1 {
        return (a, vec![0.0]);
    }
    let b = gaussian_vec(rng, dim);
    let proj: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let b = unit(b.iter().zip(&a).map(|(y, x)| y - proj * x).collect());
    (a, b)
}

/// Label that is wrong with probability `noise`, replaced by a uniformly
/// drawn different class.
fn noisy_label(rng: &mut ChaCha8Rng, truth: u32, n_classes: usize, noise: f64) -> u32 {
    let flip = rng.gen::<f64>() < noise;
    let other = rng.gen_range(0..n_classes.max(2) as u32 - 1);
    if !flip || n_classes < 2 {
        truth
    } else if other >= truth {
        other + 1
    } else {
        other
    }
}

struct ImageDraft {
    identity: u32,
    camera: CameraId,
    track: Option<TrackId>,
    heading: f64,
    blurred: bool,
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.dim;

    let brand_dirs: Vec<Vec<f64>> = (0..cfg.n_brands)
        .map(|_| unit(gaussian_vec(&mut rng, dim)))
        .collect();
    let type_dirs: Vec<Vec<f64>> = (0..cfg.n_types)
        .map(|_| unit(gaussian_vec(&mut rng, dim)))
        .collect();
    let (view_a, view_b) = orthonormal_pair(&mut rng, dim);

    let mut appearance = Vec::with_capacity(cfg.n_identities);
    let mut brands = Vec::with_capacity(cfg.n_identities);
    let mut types = Vec::with_capacity(cfg.n_identities);
    let mut queries = Vec::new();
    let mut gallery = Vec::new();
    let mut next_track = 0u32;

    for id in 0..cfg.n_identities {
        let brand = rng.gen_range(0..cfg.n_brands);
        let ty = rng.gen_range(0..cfg.n_types);
        let own = unit(gaussian_vec(&mut rng, dim));
        let v: Vec<f64> = (0..dim)
            .map(|d| BRAND_MIX * brand_dirs[brand][d] + TYPE_MIX * type_dirs[ty][d] + own[d])
            .collect();
        appearance.push(unit(v));
        brands.push(brand as u32);
        types.push(ty as u32);

        let cameras = sample(&mut rng, cfg.n_cameras, cfg.cameras_per_identity);
        for (s, cam) in cameras.iter().enumerate() {
            let heading = rng.gen::<f64>() * 360.0;
            let is_query = s == 0;
            let track = if is_query {
                None
            } else {
                next_track += 1;
                Some(TrackId(next_track - 1))
            };
            let n_images = if is_query { 1 } else { cfg.images_per_sighting };
            for _ in 0..n_images {
                let jitter = rng.sample::<f64, _>(StandardNormal) * HEADING_JITTER_DEG;
                let mut theta = (heading + jitter).rem_euclid(360.0);
                if theta >= 360.0 {
                    theta = 0.0;
                }
                let draft = ImageDraft {
                    identity: id as u32,
                    camera: CameraId(cam as u32),
                    track,
                    heading: theta,
                    blurred: rng.gen::<f64>() < cfg.blur_fraction,
                };
                if is_query {
                    queries.push(draft);
                } else {
                    gallery.push(draft);
                }
            }
        }
    }
    gallery.shuffle(&mut rng);

    let per_coord = 1.0 / (dim as f64).sqrt();
    let mut render = |drafts: &[ImageDraft],
                      split: Split,
                      prefix: &str|
     -> Result<(Vec<EmbeddingSet>, MetadataTable, Vec<TruthRecord>)> {
        let mut raw: Vec<Vec<f32>> = vec![Vec::with_capacity(drafts.len() * dim); cfg.n_sources];
        let mut records = Vec::with_capacity(drafts.len());
        let mut truth = Vec::with_capacity(drafts.len());
        for (i, d) in drafts.iter().enumerate() {
            let doubled = (2.0 * d.heading).to_radians();
            let (c, s) = (doubled.cos(), doubled.sin());
            let v = &appearance[d.identity as usize];
            let clean: Vec<f64> = (0..dim)
                .map(|k| {
                    cfg.identity_signal * v[k]
                        + cfg.orientation_signal * (c * view_a[k] + s * view_b[k])
                })
                .collect();
            let sigma =
                cfg.noise_sigma * if d.blurred { BLUR_NOISE_FACTOR } else { 1.0 } * per_coord;
            for source in raw.iter_mut() {
                source.extend(clean.iter().map(|&x| {
                    let n: f64 = rng.sample(StandardNormal);
                    (x + sigma * n) as f32
                }));
            }

            let brand = brands[d.identity as usize];
            let ty = types[d.identity as usize];
            let image_id = format!("{prefix}{i:05}");
            let brand_label = noisy_label(&mut rng, brand, cfg.n_brands, cfg.label_noise);
            let type_label = noisy_label(&mut rng, ty, cfg.n_types, cfg.label_noise);
            let true_bin = orientation_to_bin(d.heading)?;
            let bin = noisy_label(
                &mut rng,
                true_bin,
                ORIENTATION_BINS as usize,
                cfg.label_noise,
            );

            let mut rec = ImageRecord::new(image_id.clone(), d.camera);
            rec.track_id = d.track;
            rec.brand_id = Some(brand_label);
            rec.type_id = Some(type_label);
            rec.orientation_deg = Some(bin_to_orientation(bin)?);
            records.push(rec);
            truth.push(TruthRecord {
                image_id,
                split,
                identity_id: d.identity,
                camera_id: d.camera,
                track_id: d.track,
                brand_id: brand,
                type_id: ty,
                orientation_deg: d.heading,
            });
        }
        let sets = raw
            .into_iter()
            .enumerate()
            .map(|(k, data)| {
                EmbeddingSet::new(drafts.len(), dim, data, format!("s{k}"))?.normalize_rows()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((sets, MetadataTable::new(records)?, truth))
    };

    let (query_sources, query_meta, query_truth) = render(&queries, Split::Query, "q")?;
    let (gallery_sources, gallery_meta, gallery_truth) = render(&gallery, Split::Gallery, "g")?;
    Ok(Scenario {
        query_sources,
        gallery_sources,
        query_meta,
        gallery_meta,
        truth: ScenarioTruth {
            query: query_truth,
            gallery: gallery_truth,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            n_identities: 12,
            n_cameras: 5,
            cameras_per_identity: 3,
            dim: 16,
            n_sources: 2,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn shapes_and_invariants() {
        let s = generate_scenario(&small()).unwrap();
        assert_eq!(s.query_sources.len(), 2);
        assert_eq!(s.query_meta.len(), 12);
        assert_eq!(s.gallery_meta.len(), 12 * 2 * 3);
        assert!(s.truth.is_cross_camera_evaluable());
        for e in s.query_sources.iter().chain(&s.gallery_sources) {
            for row in e.rows() {
                let n: f64 = row
                    .iter()
                    .map(|&v| f64::from(v).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((n - 1.0).abs() < 1e-6);
            }
        }
        // an identity never appears twice at one camera
        let mut seen = std::collections::HashSet::new();
        for r in s.truth.query.iter().chain(&s.truth.gallery) {
            seen.insert((r.identity_id, r.camera_id, r.track_id));
        }
        let mut per_cam = std::collections::HashMap::new();
        for (id, cam, track) in seen {
            per_cam
                .entry((id, cam))
                .or_insert_with(Vec::new)
                .push(track);
        }
        assert!(per_cam.values().all(|v| v.len() == 1));
        // metadata hides identities
        assert!(s.gallery_meta.iter().all(|r| r.identity_id.is_none()));
    }

    #[test]
    fn truth_csv_round_trip() {
        let s = generate_scenario(&small()).unwrap();
        let bytes = s.truth.to_csv_bytes().unwrap();
        assert_eq!(
            ScenarioTruth::from_csv_reader(bytes.as_slice()).unwrap(),
            s.truth
        );
    }

    #[test]
    fn infeasible_configs() {
        let too_many = ScenarioConfig {
            cameras_per_identity: 9,
            ..ScenarioConfig::default()
        };
        assert!(matches!(
            generate_scenario(&too_many),
            Err(Error::Config(_))
        ));
        let single = ScenarioConfig {
            cameras_per_identity: 1,
            ..ScenarioConfig::default()
        };
        assert!(generate_scenario(&single).is_err());
        let bad_blur = ScenarioConfig {
            blur_fraction: 1.5,
            ..ScenarioConfig::default()
        };
        assert!(generate_scenario(&bad_blur).is_err());
    }

    #[test]
    fn noisy_label_never_repeats_truth_when_flipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert_ne!(noisy_label(&mut rng, 3, 5, 1.0), 3);
            assert_eq!(noisy_label(&mut rng, 3, 5, 0.0), 3);
        }
    }
}
