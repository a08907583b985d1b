//! Vector-space models of English nominal pluralization.
//!
//! Shift-vector analysis, analogy-based pluralizers (Only-B, 3CosAdd,
//! 3CosAvg, CosClassAvg), linear singular→plural maps, and a
//! form-to-meaning comprehension model over triphone cues, together with
//! the statistics used to evaluate them.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix the scalar
//! to `f64`, which is what the CLI uses.

pub mod analogy;
pub mod classify;
pub mod dlcomp;
pub mod error;
pub mod fracss;
pub mod knn;
pub mod pipeline;
pub mod scalar;
pub mod shifts;
pub mod stats;
pub mod synth;
pub mod vecspace;

pub use error::{Error, Result};
pub use knn::{CandidatePool, Metric, RankResult, TopN};
pub use scalar::Real;
pub use vecspace::AxisRef;

pub type EmbeddingTable = vecspace::Embeddings<f64>;
pub type EmbeddingTableF32 = vecspace::Embeddings<f32>;
pub type LinearMap = fracss::LinearMap<f64>;
pub type LdaModel = classify::LdaModel<f64>;
pub type Pluralizer = analogy::Pluralizer<f64>;
pub type ClassShiftTable = shifts::ClassShiftTable<f64>;
pub type SemanticTargets = dlcomp::SemanticTargets<f64>;
pub type SynthData = synth::SynthData<f64>;
pub type LexiconData = synth::LexiconData<f64>;
