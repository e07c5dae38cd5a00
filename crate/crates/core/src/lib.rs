//! Mining, weak labeling, and reranking of static-analysis warnings.
//!
//! The pipeline: parse Infer/Flawfinder reports into canonical warning
//! records ([`adapters`], [`warning`]); mine git histories for warnings that
//! vanished, via merge-stripped linearization and per-history bisection
//! ([`miner`]); score each candidate fix commit semantically and
//! structurally into a weak VTB/LTB/UTB label ([`labeler`], [`diff`]);
//! extract encoder inputs ([`features`], [`csyntax`], [`encoder`]); train a
//! two-stage reranker and score warnings for recommendation ([`reranker`],
//! [`checkpoint`]); and measure ranking quality ([`eval`]).
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix the default precision used by the command-line
//! pipeline.

pub mod adapters;
pub mod checkpoint;
pub mod csyntax;
pub mod dataset;
pub mod diff;
pub mod encoder;
pub mod eval;
pub mod features;
pub mod labeler;
pub mod miner;
pub mod reranker;
pub mod scalar;
pub mod synth;
pub mod warning;

pub use scalar::Scalar;

/// Default scalar for the pipeline.
pub type DefaultScalar = f64;

/// Model parameters at the default precision.
pub type ModelParams = reranker::ModelParams<DefaultScalar>;
/// Model parameters in single precision.
pub type ModelParamsF32 = reranker::ModelParams<f32>;
/// Encoded vector at the default precision.
pub type SparseVec = encoder::SparseVec<DefaultScalar>;
/// Ranked entry at the default precision.
pub type RankedWarning = reranker::RankedWarning<DefaultScalar>;
