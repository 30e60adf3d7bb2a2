//! End-to-end orchestration, analysis exports and synthetic corpora.

pub mod config;
pub mod map;
pub mod run;
pub mod sankey;
pub mod synth;

pub use config::{PipelineConfig, SchemeKind};
pub use map::{export_similarity_map, pca_coordinates};
pub use run::{run_pipeline, run_pipeline_with, RunOptions, RunSummary, STAGES};
pub use sankey::{export_sankey, flow_threshold, SankeyFlowTable};
pub use synth::{generate_synthetic_corpus, SynthSpec};
