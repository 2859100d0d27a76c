//! The end-to-end testing pipeline, stage plans, ablations and submission files.
//!
//! A [`StagePlan`] runs in four phases:
//!
//! 1. source: `normalize`, `score`, `rerank`, `ensemble` turn the per-source
//!    embeddings into one similarity matrix on a `[0, 1]` scale;
//! 2. matrix: `same_camera_filter`, `attr_fuse`, `orient_fuse`,
//!    `g2q_exclusion` adjust that matrix in plan order;
//! 3. `rank`;
//! 4. list: `track_merge`, `q2g_exclusion` reorder the rank list in plan order.
//!
//! Without an `ensemble` stage only the first source is scored. With one,
//! `rerank` before `ensemble` re-ranks each source and then sums; `rerank`
//! after `ensemble` sums the union cosine matrices and re-ranks once.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attribute::{
    attribute_match_matrix, fuse_attribute, fuse_orientation, orientation_similarity, AttributeKind,
};
use crate::camera::{
    gallery_to_query_exclusion, query_to_gallery_exclusion, rank_from_scores, same_camera_demote,
    track_merge, CameraAssignment,
};
use crate::config::PipelineConfig;
use crate::distance::{cosine_similarity, ensemble_sum, minmax_normalize, EnsembleInput};
use crate::embedding::{load_embeddings, EmbeddingSet};
use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::matrix::{Polarity, ScoreMatrix};
use crate::metadata::{load_metadata, MetadataTable};
use crate::ranking::RankList;
use crate::rerank::{k_reciprocal_rerank, rerank_union};
use crate::synth::{load_truth, Scenario, ScenarioTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Normalize,
    Score,
    Rerank,
    Ensemble,
    SameCameraFilter,
    AttrFuse(AttributeKind),
    OrientFuse,
    #[serde(rename = "g2q_exclusion")]
    G2qExclusion,
    Rank,
    TrackMerge,
    #[serde(rename = "q2g_exclusion")]
    Q2gExclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Source,
    Matrix,
    Rank,
    List,
}

impl Stage {
    fn phase(self) -> Phase {
        match self {
            Stage::Normalize | Stage::Score | Stage::Rerank | Stage::Ensemble => Phase::Source,
            Stage::SameCameraFilter
            | Stage::AttrFuse(_)
            | Stage::OrientFuse
            | Stage::G2qExclusion => Phase::Matrix,
            Stage::Rank => Phase::Rank,
            Stage::TrackMerge | Stage::Q2gExclusion => Phase::List,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::AttrFuse(AttributeKind::Brand) => write!(f, "attr_fuse(brand)"),
            Stage::AttrFuse(AttributeKind::Type) => write!(f, "attr_fuse(type)"),
            other => {
                let s = serde_json::to_string(other).expect("stage serializes");
                write!(f, "{}", s.trim_matches('"'))
            }
        }
    }
}

/// A validated, ordered list of stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagePlan {
    stages: Vec<Stage>,
}

impl StagePlan {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        for (i, s) in stages.iter().enumerate() {
            if stages[..i].contains(s) {
                return Err(Error::Config(format!("stage {s} listed twice")));
            }
        }
        if !stages.contains(&Stage::Rank) {
            return Err(Error::Config("plan needs exactly one rank stage".into()));
        }
        if !stages.contains(&Stage::Score) {
            return Err(Error::Config("plan needs a score stage".into()));
        }
        for w in stages.windows(2) {
            if w[0].phase() > w[1].phase() {
                return Err(Error::Config(format!(
                    "stage {} cannot follow {}: source stages, then matrix stages, then rank, then list stages",
                    w[1], w[0]
                )));
            }
        }
        let pos = |s: Stage| stages.iter().position(|&x| x == s);
        let score = pos(Stage::Score).unwrap();
        if let Some(n) = pos(Stage::Normalize) {
            if n > score {
                return Err(Error::Config("normalize must precede score".into()));
            }
        }
        for later in [Stage::Rerank, Stage::Ensemble] {
            if pos(later).is_some_and(|p| p < score) {
                return Err(Error::Config(format!("{later} must follow score")));
            }
        }
        Ok(Self { stages })
    }

    /// Every stage, in the default order.
    pub fn full() -> Self {
        Self::from_toggles(&Toggles::all())
    }

    /// `normalize, score, rank`: plain cosine retrieval on the first source.
    pub fn baseline() -> Self {
        Self::from_toggles(&Toggles::default())
    }

    pub fn from_toggles(t: &Toggles) -> Self {
        let mut stages = vec![Stage::Normalize, Stage::Score];
        if t.rerank {
            stages.push(Stage::Rerank);
        }
        if t.ensemble {
            stages.push(Stage::Ensemble);
        }
        if t.camera_mutex {
            stages.push(Stage::SameCameraFilter);
        }
        if t.attribute {
            stages.extend([
                Stage::OrientFuse,
                Stage::AttrFuse(AttributeKind::Brand),
                Stage::AttrFuse(AttributeKind::Type),
            ]);
        }
        if t.camera_mutex {
            stages.push(Stage::G2qExclusion);
        }
        stages.push(Stage::Rank);
        if t.camera_mutex {
            stages.extend([Stage::TrackMerge, Stage::Q2gExclusion]);
        }
        Self { stages }
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn contains(&self, s: Stage) -> bool {
        self.stages.contains(&s)
    }

    fn rerank_after_ensemble(&self) -> bool {
        let pos = |s| self.stages.iter().position(|&x| x == s);
        matches!((pos(Stage::Rerank), pos(Stage::Ensemble)), (Some(r), Some(e)) if r > e)
    }
}

/// Post-processing switches of an ablation row.
///
/// `camera_mutex` bundles the same-camera filter, both exclusion directions
/// and track merging; `attribute` bundles brand, type and orientation fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Toggles {
    pub rerank: bool,
    pub attribute: bool,
    pub camera_mutex: bool,
    pub ensemble: bool,
}

impl Toggles {
    pub fn all() -> Self {
        Self {
            rerank: true,
            attribute: true,
            camera_mutex: true,
            ensemble: true,
        }
    }

    /// Parses `baseline` or a `+`-joined subset of
    /// `rerank`, `attribute`, `camera_mutex`, `ensemble` (or `all`).
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "baseline" {
            return Ok(Self::default());
        }
        if text == "all" {
            return Ok(Self::all());
        }
        let mut t = Self::default();
        for part in text.split('+').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "rerank" => t.rerank = true,
                "attribute" => t.attribute = true,
                "camera_mutex" => t.camera_mutex = true,
                "ensemble" => t.ensemble = true,
                other => return Err(Error::Config(format!("unknown toggle {other:?}"))),
            }
        }
        if t == Self::default() {
            return Err(Error::Config(format!("empty toggle set {text:?}")));
        }
        Ok(t)
    }

    pub fn label(&self) -> String {
        let names: Vec<&str> = [
            (self.rerank, "rerank"),
            (self.attribute, "attribute"),
            (self.camera_mutex, "camera_mutex"),
            (self.ensemble, "ensemble"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            "baseline".into()
        } else {
            names.join("+")
        }
    }

    /// The seven standard post-processing toggle combinations.
    pub fn table_columns() -> Vec<Toggles> {
        let t = |rerank, attribute, camera_mutex, ensemble| Toggles {
            rerank,
            attribute,
            camera_mutex,
            ensemble,
        };
        vec![
            t(false, false, false, false),
            t(true, false, false, false),
            t(false, true, false, false),
            t(false, false, true, false),
            t(true, true, false, false),
            t(true, false, true, false),
            t(true, true, true, true),
        ]
    }
}

/// Everything a pipeline run reads. Query and gallery sources are paired by
/// position and row-aligned with the metadata tables.
#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub query_sources: Vec<EmbeddingSet>,
    pub gallery_sources: Vec<EmbeddingSet>,
    pub query_meta: MetadataTable,
    pub gallery_meta: MetadataTable,
    pub truth: Option<ScenarioTruth>,
}

#[derive(Debug, Clone, Default)]
pub struct InputPaths {
    pub query_emb: Vec<PathBuf>,
    pub gallery_emb: Vec<PathBuf>,
    pub query_meta: PathBuf,
    pub gallery_meta: PathBuf,
    pub truth: Option<PathBuf>,
}

impl PipelineInputs {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            query_sources: s.query_sources.clone(),
            gallery_sources: s.gallery_sources.clone(),
            query_meta: s.query_meta.clone(),
            gallery_meta: s.gallery_meta.clone(),
            truth: Some(s.truth.clone()),
        }
    }

    pub fn load(paths: &InputPaths) -> Result<Self> {
        let load_all = |ps: &[PathBuf]| ps.iter().map(load_embeddings).collect::<Result<Vec<_>>>();
        Ok(Self {
            query_sources: load_all(&paths.query_emb)?,
            gallery_sources: load_all(&paths.gallery_emb)?,
            query_meta: load_metadata(&paths.query_meta)?,
            gallery_meta: load_metadata(&paths.gallery_meta)?,
            truth: paths.truth.as_ref().map(load_truth).transpose()?,
        })
    }

    fn check(&self) -> Result<()> {
        if self.query_sources.is_empty() {
            return Err(Error::Config(
                "at least one embedding source is required".into(),
            ));
        }
        if self.query_sources.len() != self.gallery_sources.len() {
            return Err(Error::Config(format!(
                "{} query sources but {} gallery sources",
                self.query_sources.len(),
                self.gallery_sources.len()
            )));
        }
        for (k, (q, g)) in self
            .query_sources
            .iter()
            .zip(&self.gallery_sources)
            .enumerate()
        {
            if q.n_images() != self.query_meta.len() || g.n_images() != self.gallery_meta.len() {
                return Err(Error::Shape(format!(
                    "source {k}: {}x{} embeddings vs {}/{} metadata rows",
                    q.n_images(),
                    g.n_images(),
                    self.query_meta.len(),
                    self.gallery_meta.len()
                )));
            }
        }
        if let Some(t) = &self.truth {
            if t.query.len() != self.query_meta.len() || t.gallery.len() != self.gallery_meta.len()
            {
                return Err(Error::Shape(
                    "truth does not align with the query/gallery sets".into(),
                ));
            }
        }
        Ok(())
    }

    /// Hash of the config and a canonical serialization of every input.
    pub fn reproducibility_key(&self, cfg: &PipelineConfig) -> Result<String> {
        let mut h = Sha256::new();
        h.update(cfg.to_canonical_json().as_bytes());
        for e in self.query_sources.iter().chain(&self.gallery_sources) {
            h.update(e.to_bytes());
        }
        h.update(self.query_meta.to_csv_bytes()?);
        h.update(self.gallery_meta.to_csv_bytes()?);
        if let Some(t) = &self.truth {
            h.update(t.to_csv_bytes()?);
        }
        Ok(format!("{:x}", h.finalize()))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub ranks: RankList,
    pub metrics: Option<MetricsReport>,
}

fn require_attribute(
    stage: Stage,
    inputs: &PipelineInputs,
    has: impl Fn(&crate::ImageRecord) -> bool,
) -> Result<()> {
    let q = inputs.query_meta.iter().any(&has);
    let g = inputs.gallery_meta.iter().any(&has);
    if !(q && g) {
        return Err(Error::Config(format!(
            "stage {stage} needs the corresponding metadata column in both query and gallery tables"
        )));
    }
    Ok(())
}

fn check_plan_inputs(
    cfg: &PipelineConfig,
    plan: &StagePlan,
    inputs: &PipelineInputs,
) -> Result<()> {
    for &stage in plan.stages() {
        match stage {
            Stage::AttrFuse(kind) => require_attribute(stage, inputs, |r| kind.of(r).is_some())?,
            Stage::OrientFuse => require_attribute(stage, inputs, |r| r.orientation_deg.is_some())?,
            Stage::TrackMerge => {
                if !inputs.gallery_meta.iter().any(|r| r.track_id.is_some()) {
                    return Err(Error::Config(format!(
                        "stage {stage} needs gallery track ids"
                    )));
                }
            }
            Stage::Ensemble => {
                if let Some(w) = &cfg.ensemble_weights {
                    if w.len() != inputs.query_sources.len() {
                        return Err(Error::Config(format!(
                            "{} ensemble weights for {} sources",
                            w.len(),
                            inputs.query_sources.len()
                        )));
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Ensemble weights scaled to sum to one, so fused scores stay on `[0, 1]`.
fn normalized_weights(cfg: &PipelineConfig, n: usize) -> Vec<f64> {
    let raw = cfg.ensemble_weights.clone().unwrap_or_else(|| vec![1.0; n]);
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Source phase: embeddings to one `[0, 1]` similarity matrix.
fn source_matrix(
    cfg: &PipelineConfig,
    plan: &StagePlan,
    inputs: &PipelineInputs,
) -> Result<ScoreMatrix> {
    let n_sources = if plan.contains(Stage::Ensemble) {
        inputs.query_sources.len()
    } else {
        1
    };
    let prepare = |e: &EmbeddingSet| {
        if plan.contains(Stage::Normalize) {
            e.normalize_rows()
        } else {
            Ok(e.clone())
        }
    };
    let query: Vec<EmbeddingSet> = inputs.query_sources[..n_sources]
        .iter()
        .map(prepare)
        .collect::<Result<_>>()?;
    let gallery: Vec<EmbeddingSet> = inputs.gallery_sources[..n_sources]
        .iter()
        .map(prepare)
        .collect::<Result<_>>()?;

    if plan.contains(Stage::Rerank) && plan.rerank_after_ensemble() {
        let weights = normalized_weights(cfg, n_sources);
        let unions: Vec<ScoreMatrix> = query
            .iter()
            .zip(&gallery)
            .map(|(q, g)| {
                let all = q.concat(g)?;
                cosine_similarity(&all, &all)
            })
            .collect::<Result<_>>()?;
        let mean = ensemble_sum(&EnsembleInput::new(unions, weights)?);
        let n = mean.n_query();
        let dist = ScoreMatrix::new(
            n,
            n,
            mean.values()
                .iter()
                .map(|s| (2.0 - 2.0 * s).max(0.0).sqrt())
                .collect(),
            Polarity::Distance,
        )?;
        let reranked = rerank_union(&dist, inputs.query_meta.len(), &cfg.rerank)?;
        return minmax_normalize(&reranked.into_similarity());
    }

    let per_source: Vec<ScoreMatrix> = query
        .iter()
        .zip(&gallery)
        .map(|(q, g)| {
            let m = if plan.contains(Stage::Rerank) {
                k_reciprocal_rerank(q, g, &cfg.rerank)?.into_similarity()
            } else {
                cosine_similarity(q, g)?
            };
            minmax_normalize(&m)
        })
        .collect::<Result<_>>()?;

    if plan.contains(Stage::Ensemble) {
        let weights = normalized_weights(cfg, n_sources);
        Ok(ensemble_sum(&EnsembleInput::new(per_source, weights)?))
    } else {
        Ok(per_source.into_iter().next().expect("one source"))
    }
}

/// Runs the configured plan in the current rayon pool.
pub fn run_pipeline(cfg: &PipelineConfig, inputs: &PipelineInputs) -> Result<PipelineOutput> {
    cfg.validate()?;
    let plan = cfg.plan()?;
    inputs.check()?;
    check_plan_inputs(cfg, &plan, inputs)?;

    let q_cam = CameraAssignment::from(&inputs.query_meta);
    let g_cam = CameraAssignment::from(&inputs.gallery_meta);

    let mut sim = source_matrix(cfg, &plan, inputs)?;
    let mut ranks: Option<RankList> = None;
    for &stage in plan.stages() {
        match stage {
            Stage::Normalize | Stage::Score | Stage::Rerank | Stage::Ensemble => {}
            Stage::SameCameraFilter => sim = same_camera_demote(&sim, &q_cam, &g_cam)?,
            Stage::AttrFuse(kind) => {
                let m = attribute_match_matrix(&inputs.query_meta, &inputs.gallery_meta, kind);
                sim = fuse_attribute(&sim, &m, cfg.w_attr)?;
            }
            Stage::OrientFuse => {
                let o = orientation_similarity(&inputs.query_meta, &inputs.gallery_meta)?;
                sim = fuse_orientation(&sim, &o, cfg.lambda_orient)?;
            }
            Stage::G2qExclusion => sim = gallery_to_query_exclusion(&sim, &q_cam)?,
            Stage::Rank => ranks = Some(rank_from_scores(&sim)?),
            Stage::TrackMerge => ranks = ranks.map(|r| track_merge(&r, &g_cam)),
            Stage::Q2gExclusion => ranks = ranks.map(|r| query_to_gallery_exclusion(&r, &g_cam)),
        }
        info!("stage {stage} done");
    }
    let ranks = ranks.expect("validated plan has a rank stage");

    let metrics = match &inputs.truth {
        Some(truth) => {
            let mut report = MetricsReport::compute(&ranks, truth, &cfg.protocol())?;
            report.reproducibility_key = Some(inputs.reproducibility_key(cfg)?);
            Some(report)
        }
        None => None,
    };
    Ok(PipelineOutput { ranks, metrics })
}

/// Runs `f` on a dedicated pool of `workers` threads (the global pool when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::Config("worker count must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Writes `ranklist.txt` and, when metrics exist, `metrics.json`.
pub fn write_outputs(
    out_dir: impl AsRef<Path>,
    cfg: &PipelineConfig,
    out: &PipelineOutput,
) -> Result<()> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_submission(&out.ranks, cfg.top_k, dir.join("ranklist.txt"))?;
    if let Some(m) = &out.metrics {
        write_metrics(m, dir.join("metrics.json"))?;
    }
    Ok(())
}

pub fn write_metrics(m: &MetricsReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One line per query: the first `top_k` gallery indices, 1-based, space separated.
pub fn format_submission(r: &RankList, top_k: usize) -> Result<String> {
    let mut out = String::new();
    for (q, row) in r.rows().iter().enumerate() {
        if row.len() < top_k {
            return Err(Error::Shape(format!(
                "query {q} has {} ranked items, fewer than top_k = {top_k}",
                row.len()
            )));
        }
        let line: Vec<String> = row[..top_k].iter().map(|g| (g + 1).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_submission(r: &RankList, top_k: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format_submission(r, top_k)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Parses a submission file back into 0-based rank rows.
pub fn parse_submission(text: &str, n_gallery: usize) -> Result<RankList> {
    let rows = text
        .lines()
        .enumerate()
        .map(|(line, l)| {
            l.split_whitespace()
                .map(|tok| match tok.parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v - 1),
                    _ => Err(Error::Schema {
                        row: line,
                        reason: format!("bad gallery index {tok:?}"),
                    }),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    RankList::new(n_gallery, rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub toggles: Toggles,
    pub map: f64,
    pub rank1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("config\trerank\tattribute\tcamera_mutex\tensemble\tmAP\trank1\n");
        let mark = |b: bool| if b { "x" } else { "" };
        for r in &self.rows {
            let t = &r.toggles;
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.4}\n",
                t.label(),
                mark(t.rerank),
                mark(t.attribute),
                mark(t.camera_mutex),
                mark(t.ensemble),
                r.map,
                r.rank1
            ));
        }
        s
    }
}

/// Evaluates one plan per toggle set; `cfg.stages` is ignored.
pub fn run_ablation(
    cfg: &PipelineConfig,
    inputs: &PipelineInputs,
    toggles: &[Toggles],
) -> Result<AblationTable> {
    if toggles.is_empty() {
        return Err(Error::Config(
            "ablation needs at least one toggle set".into(),
        ));
    }
    if inputs.truth.is_none() {
        return Err(Error::Config("ablation needs ground truth".into()));
    }
    let rows = toggles
        .iter()
        .map(|t| {
            let cfg = PipelineConfig {
                stages: StagePlan::from_toggles(t).stages().to_vec(),
                ..cfg.clone()
            };
            let m = run_pipeline(&cfg, inputs)?.metrics.expect("truth supplied");
            info!(
                "ablation {}: mAP {:.4} rank-1 {:.4}",
                t.label(),
                m.map,
                m.rank1
            );
            Ok(AblationRow {
                toggles: *t,
                map: m.map,
                rank1: m.rank1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_json_names() {
        let json = serde_json::to_string(&StagePlan::full().stages()).unwrap();
        assert_eq!(
            json,
            r#"["normalize","score","rerank","ensemble","same_camera_filter","orient_fuse",{"attr_fuse":"brand"},{"attr_fuse":"type"},"g2q_exclusion","rank","track_merge","q2g_exclusion"]"#
        );
        assert_eq!(
            Stage::AttrFuse(AttributeKind::Type).to_string(),
            "attr_fuse(type)"
        );
        assert_eq!(Stage::G2qExclusion.to_string(), "g2q_exclusion");
    }

    #[test]
    fn plan_ordering_rules() {
        use Stage::*;
        assert!(StagePlan::new(vec![Normalize, Score, Rank]).is_ok());
        assert!(StagePlan::new(vec![Normalize, Score, Ensemble, Rerank, Rank]).is_ok());
        let bad = [
            vec![Normalize, Score],
            vec![Score, Rank, Rank],
            vec![Score, Rank, G2qExclusion],
            vec![Score, TrackMerge, Rank],
            vec![Score, SameCameraFilter, Ensemble, Rank],
            vec![Score, Normalize, Rank],
            vec![Rerank, Score, Rank],
            vec![Normalize, Rank],
        ];
        for stages in bad {
            assert!(
                matches!(StagePlan::new(stages.clone()), Err(Error::Config(_))),
                "{stages:?}"
            );
        }
    }

    #[test]
    fn toggles_parse_and_label() {
        assert_eq!(Toggles::parse("baseline").unwrap(), Toggles::default());
        let t = Toggles::parse("rerank+camera_mutex").unwrap();
        assert!(t.rerank && t.camera_mutex && !t.attribute && !t.ensemble);
        assert_eq!(t.label(), "rerank+camera_mutex");
        assert_eq!(Toggles::parse("all").unwrap(), Toggles::all());
        assert!(Toggles::parse("turbo").is_err());
        assert!(Toggles::parse("").is_err());
        assert_eq!(
            StagePlan::baseline().stages(),
            &[Stage::Normalize, Stage::Score, Stage::Rank]
        );
    }

    #[test]
    fn submission_format_and_parse_back() {
        let r = RankList::new(3, vec![vec![0, 2, 1]]).unwrap();
        assert_eq!(format_submission(&r, 3).unwrap(), "1 3 2\n");
        let two = RankList::new(3, vec![vec![0, 2, 1], vec![2, 1, 0]]).unwrap();
        let text = format_submission(&two, 2).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(
            parse_submission(&text, 3).unwrap().rows(),
            &[vec![0, 2], vec![2, 1]]
        );
        assert!(matches!(format_submission(&r, 4), Err(Error::Shape(_))));
        assert!(parse_submission("0 1\n", 3).is_err());
    }
}
