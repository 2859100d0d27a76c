//! Post-processing toolkit for vehicle re-identification retrieval.
//!
//! Everything operates on precomputed embeddings and per-image metadata:
//!
//! ```text
//! embeddings ─▶ score / re-rank ─▶ ensemble ─▶ camera filter + attribute fusion
//!            ─▶ gallery→query exclusion ─▶ rank ─▶ track merge ─▶ query→gallery exclusion
//! ```
//!
//! The [`synth`] module generates multi-camera scenarios with ground truth so
//! every stage can be validated end to end, and [`losses`] carries reference
//! implementations of the training losses and GeM pooling.

pub mod attribute;
pub mod camera;
pub mod config;
pub mod distance;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod losses;
pub mod matrix;
pub mod metadata;
pub mod pipeline;
pub mod ranking;
pub mod rerank;
pub mod synth;

pub use config::PipelineConfig;
pub use embedding::EmbeddingSet;
pub use error::{Error, Result};
pub use matrix::{Polarity, ScoreMatrix};
pub use metadata::{CameraId, ImageRecord, MetadataTable, TrackId};
pub use ranking::RankList;
