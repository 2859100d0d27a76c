//! `reid`: command-line driver for the re-identification post-processing pipeline.
//!
//! Exit codes: 0 on success, 2 for configuration errors (including bad
//! flags), 3 for data errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use reid_core::attribute::{
    attribute_match_matrix, fuse_attribute, fuse_orientation, orientation_similarity, AttributeKind,
};
use reid_core::camera::{
    gallery_to_query_exclusion, query_to_gallery_exclusion, rank_from_scores, same_camera_demote,
    track_merge, CameraAssignment,
};
use reid_core::distance::{
    cosine_similarity, ensemble_sum, euclidean_distance, minmax_normalize, EnsembleInput,
};
use reid_core::embedding::load_embeddings;
use reid_core::eval::MetricsReport;
use reid_core::matrix::{load_scores, save_scores};
use reid_core::metadata::load_metadata;
use reid_core::pipeline::{
    parse_submission, run_ablation, run_pipeline, with_workers, write_metrics, write_outputs,
    write_submission, InputPaths, PipelineInputs, Toggles,
};
use reid_core::rerank::{k_reciprocal_rerank, RerankParams};
use reid_core::synth::{generate_scenario, load_truth, ScenarioConfig};
use reid_core::{Error, PipelineConfig, Polarity};

#[derive(Parser)]
#[command(
    name = "reid",
    version,
    about = "Vehicle re-identification post-processing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-camera scenario with ground truth.
    Synth(SynthArgs),
    /// Score query embeddings against gallery embeddings.
    Score(ScoreArgs),
    /// k-reciprocal re-ranking of one embedding source.
    Rerank(RerankArgs),
    /// Ensemble score matrices and apply metadata-based adjustments.
    Fuse(FuseArgs),
    /// Turn a score matrix into a rank list.
    Rank(RankArgs),
    /// Evaluate a rank list against ground truth.
    Eval(EvalArgs),
    /// Run the full configured pipeline.
    Pipeline(PipelineArgs),
    /// Run the pipeline once per toggle set and tabulate mAP / rank-1.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario JSON; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Cosine,
    Euclidean,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    query_emb: PathBuf,
    #[arg(long)]
    gallery_emb: PathBuf,
    #[arg(long, value_enum, default_value = "cosine")]
    metric: Metric,
    /// L2-normalize rows before scoring.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RerankArgs {
    #[arg(long)]
    query_emb: PathBuf,
    #[arg(long)]
    gallery_emb: PathBuf,
    #[arg(long, default_value_t = 20)]
    k1: usize,
    #[arg(long, default_value_t = 6)]
    k2: usize,
    #[arg(long = "lambda-rr", default_value_t = 0.3)]
    lambda_rr: f64,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    /// Score matrices; each is min-max normalized before the weighted mean.
    #[arg(long, num_args = 1.., required = true)]
    scores: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    query_meta: Option<PathBuf>,
    #[arg(long)]
    gallery_meta: Option<PathBuf>,
    #[arg(long)]
    same_camera: bool,
    #[arg(long)]
    brand: bool,
    #[arg(long = "type")]
    vehicle_type: bool,
    #[arg(long)]
    orient: bool,
    #[arg(long)]
    g2q: bool,
    #[arg(long, default_value_t = 0.05)]
    w_attr: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda_orient: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Needed for --track-merge and --q2g.
    #[arg(long)]
    gallery_meta: Option<PathBuf>,
    #[arg(long)]
    track_merge: bool,
    #[arg(long)]
    q2g: bool,
    #[arg(long, default_value_t = 100)]
    top_k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ranklist: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 100)]
    top_k: usize,
    /// Keep same-camera gallery images as positives.
    #[arg(long)]
    include_same_camera: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, num_args = 1.., required = true)]
    query_emb: Vec<PathBuf>,
    #[arg(long, num_args = 1.., required = true)]
    gallery_emb: Vec<PathBuf>,
    #[arg(long)]
    query_meta: PathBuf,
    #[arg(long)]
    gallery_meta: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    w_attr: Option<f64>,
    #[arg(long)]
    lambda_orient: Option<f64>,
    #[arg(long)]
    k1: Option<usize>,
    #[arg(long)]
    k2: Option<usize>,
    #[arg(long = "lambda-rr")]
    lambda_rr: Option<f64>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    inputs: InputArgs,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// Toggle sets such as `baseline`, `rerank`, `rerank+camera_mutex`, `all`.
    /// Defaults to the seven standard combinations.
    #[arg(long, num_args = 1..)]
    toggles: Option<Vec<String>>,
}

impl InputArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.top_k {
            cfg.top_k = v;
        }
        if let Some(v) = self.w_attr {
            cfg.w_attr = v;
        }
        if let Some(v) = self.lambda_orient {
            cfg.lambda_orient = v;
        }
        if let Some(v) = self.k1 {
            cfg.rerank.k1 = v;
        }
        if let Some(v) = self.k2 {
            cfg.rerank.k2 = v;
        }
        if let Some(v) = self.lambda_rr {
            cfg.rerank.lambda_rr = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn paths(&self) -> InputPaths {
        InputPaths {
            query_emb: self.query_emb.clone(),
            gallery_emb: self.gallery_emb.clone(),
            query_meta: self.query_meta.clone(),
            gallery_meta: self.gallery_meta.clone(),
            truth: self.truth.clone(),
        }
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("invalid scenario config: {e}")))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.noise_sigma {
        cfg.noise_sigma = s;
    }
    let scenario = generate_scenario(&cfg)?;
    scenario.write_to(&a.out)?;
    info!(
        "wrote {} queries, {} gallery images, {} sources to {}",
        scenario.query_meta.len(),
        scenario.gallery_meta.len(),
        scenario.query_sources.len(),
        a.out.display()
    );
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let mut q = load_embeddings(&a.query_emb)?;
    let mut g = load_embeddings(&a.gallery_emb)?;
    if a.normalize {
        q = q.normalize_rows()?;
        g = g.normalize_rows()?;
    }
    let m = match a.metric {
        Metric::Cosine => cosine_similarity(&q, &g)?,
        Metric::Euclidean => euclidean_distance(&q, &g)?,
    };
    create_parent(&a.out)?;
    save_scores(&m, &a.out)?;
    Ok(())
}

fn rerank(a: RerankArgs) -> Result<()> {
    let mut q = load_embeddings(&a.query_emb)?;
    let mut g = load_embeddings(&a.gallery_emb)?;
    if a.normalize {
        q = q.normalize_rows()?;
        g = g.normalize_rows()?;
    }
    let params = RerankParams {
        k1: a.k1,
        k2: a.k2,
        lambda_rr: a.lambda_rr,
    };
    let d = k_reciprocal_rerank(&q, &g, &params)?;
    create_parent(&a.out)?;
    save_scores(&d, &a.out)?;
    Ok(())
}

fn as_similarity(m: reid_core::ScoreMatrix) -> reid_core::ScoreMatrix {
    match m.polarity() {
        Polarity::Similarity => m,
        Polarity::Distance => m.into_similarity(),
    }
}

fn fuse(a: FuseArgs) -> Result<()> {
    let matrices = a
        .scores
        .iter()
        .map(|p| Ok(minmax_normalize(&as_similarity(load_scores(p)?))?))
        .collect::<Result<Vec<_>>>()?;
    let n = matrices.len();
    let raw = a.weights.clone().unwrap_or_else(|| vec![1.0; n]);
    let total: f64 = raw.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Config("ensemble weights must sum to a positive value".into()).into());
    }
    let weights = raw.iter().map(|w| w / total).collect();
    let mut sim = ensemble_sum(&EnsembleInput::new(matrices, weights)?);

    let needs_meta = a.same_camera || a.brand || a.vehicle_type || a.orient || a.g2q;
    if needs_meta {
        let (Some(qp), Some(gp)) = (&a.query_meta, &a.gallery_meta) else {
            return Err(Error::Config(
                "metadata stages need --query-meta and --gallery-meta".into(),
            )
            .into());
        };
        let qm = load_metadata(qp)?;
        let gm = load_metadata(gp)?;
        let q_cam = CameraAssignment::from(&qm);
        if a.same_camera {
            sim = same_camera_demote(&sim, &q_cam, &CameraAssignment::from(&gm))?;
        }
        if a.orient {
            sim = fuse_orientation(&sim, &orientation_similarity(&qm, &gm)?, a.lambda_orient)?;
        }
        for (on, kind) in [
            (a.brand, AttributeKind::Brand),
            (a.vehicle_type, AttributeKind::Type),
        ] {
            if on {
                sim = fuse_attribute(&sim, &attribute_match_matrix(&qm, &gm, kind), a.w_attr)?;
            }
        }
        if a.g2q {
            sim = gallery_to_query_exclusion(&sim, &q_cam)?;
        }
    }
    create_parent(&a.out)?;
    save_scores(&sim, &a.out)?;
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    let sim = as_similarity(load_scores(&a.scores)?);
    let mut ranks = rank_from_scores(&sim)?;
    if a.track_merge || a.q2g {
        let Some(gp) = &a.gallery_meta else {
            return Err(Error::Config("--track-merge and --q2g need --gallery-meta".into()).into());
        };
        let g_cam = CameraAssignment::from(&load_metadata(gp)?);
        if a.track_merge {
            ranks = track_merge(&ranks, &g_cam);
        }
        if a.q2g {
            ranks = query_to_gallery_exclusion(&ranks, &g_cam);
        }
    }
    create_parent(&a.out)?;
    write_submission(&ranks, a.top_k, &a.out)?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let truth = load_truth(&a.truth)?;
    let text = std::fs::read_to_string(&a.ranklist)
        .with_context(|| format!("reading {}", a.ranklist.display()))?;
    let ranks = parse_submission(&text, truth.gallery.len())?;
    let cfg = PipelineConfig {
        top_k: a.top_k,
        exclude_same_camera_positives: !a.include_same_camera,
        ..PipelineConfig::default()
    };
    let report = MetricsReport::compute(&ranks, &truth, &cfg.protocol())?;
    print!("{}", report.to_text());
    if let Some(out) = &a.out {
        create_parent(out)?;
        write_metrics(&report, out)?;
    }
    Ok(())
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let cfg = a.inputs.config()?;
    let inputs = PipelineInputs::load(&a.inputs.paths())?;
    let out = with_workers(a.inputs.workers, || run_pipeline(&cfg, &inputs))??;
    write_outputs(&a.inputs.out, &cfg, &out)?;
    if let Some(m) = &out.metrics {
        print!("{}", m.to_text());
    }
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let cfg = a.inputs.config()?;
    let toggles = match &a.toggles {
        Some(sets) => sets
            .iter()
            .map(|s| Toggles::parse(s))
            .collect::<Result<Vec<_>, _>>()?,
        None => Toggles::table_columns(),
    };
    let inputs = PipelineInputs::load(&a.inputs.paths())?;
    let table = with_workers(a.inputs.workers, || run_ablation(&cfg, &inputs, &toggles))??;
    let dir = &a.inputs.out;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tsv = table.to_tsv();
    std::fs::write(dir.join("ablation.tsv"), &tsv)
        .with_context(|| format!("writing {}", dir.display()))?;
    print!("{tsv}");
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_config() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Score(a) => score(a),
        Command::Rerank(a) => rerank(a),
        Command::Fuse(a) => fuse(a),
        Command::Rank(a) => rank(a),
        Command::Eval(a) => eval(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Ablate(a) => ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
