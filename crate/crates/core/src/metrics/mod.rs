//! Evaluation mathematics: classification, ranking, curve, partition
//! agreement and spatial interpolation metrics.

pub mod classification;
pub mod curves;
pub mod element_centric;
pub mod idw;
pub mod partition;
pub mod ranking;

pub use classification::{prf_scores, ClassScores, PrfReport};
pub use curves::{macro_average, pr_roc_curves, BinaryCurves};
pub use element_centric::{element_centric_similarity, ElementSimilarityField};
pub use idw::{idw_at, idw_interpolate, Grid, GridSpec};
pub use partition::{agreement, ari, fmi, nmi, AgreementReport};
pub use ranking::{ranking_average_precision, ranking_loss, RankedPrediction};
