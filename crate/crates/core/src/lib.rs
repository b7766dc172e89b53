//! Measurement and intervention toolkit for chunk-boundary artifacts in
//! action-chunked generative policies.
//!
//! The metric and statistics layers are generic over the floating-point
//! scalar ([`Scalar`]); the synthetic testbed, the noise-conditioned chunk
//! generator and the experiment runners work in `f64`.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod policy;
pub mod rng;
pub mod rollout;
pub mod scalar;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Tool name embedded in every output file.
pub const TOOL_NAME: &str = "chunkscope";
/// Tool version embedded in every output file.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Trace = trace::RolloutTrace<f64>;
pub type Trace32 = trace::RolloutTrace<f32>;
pub type Actions = trace::ActionMatrix<f64>;
pub type Actions32 = trace::ActionMatrix<f32>;
pub type Chunk = trace::ActionChunk<f64>;
pub type Profile = metrics::PhaseProfile<f64>;
pub type Profile32 = metrics::PhaseProfile<f32>;
pub type Summary = metrics::ArtifactSummary<f64>;
pub type Summary32 = metrics::ArtifactSummary<f32>;
pub type Interval = stats::IntervalEstimate<f64>;
pub type Permutation = stats::PermutationResult<f64>;
