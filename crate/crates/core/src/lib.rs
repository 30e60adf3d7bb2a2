//! Citation-derived periodical classification schemes and their evaluation.
//!
//! The crate covers the whole batch flow: ingesting paper-level citation
//! data, building periodical matrices and random-walk corpora, training
//! skip-gram embeddings, clustering periodicals into schemes, and scoring
//! each scheme against paper abstracts (hashed Complement Naive Bayes
//! classification plus LDA topic agreement).

pub mod classify;
pub mod cluster;
pub mod data;
pub mod embed;
pub mod error;
pub mod matrices;
pub mod metrics;
pub mod pipeline;
pub mod topics;
pub mod walks;

mod io_util;

pub use classify::{CnbModel, FoldPlan, HashedVector};
pub use cluster::{KmeansConfig, KmeansResult, SchemeLabeling};
pub use data::{AsjcArea, CitationEdge, CitationGraph, PaperRecord, PeriodicalRegistry};
pub use embed::{EmbeddingMatrix, SgnsConfig};
pub use error::{Error, Result};
pub use matrices::{MatrixKind, PeriodicalMatrix};
pub use pipeline::config::PipelineConfig;
pub use topics::{LdaConfig, LdaModel};
pub use walks::{TrailCorpus, WalkConfig};
