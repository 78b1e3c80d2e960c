//! Storyboard prior: a token-sequence model of movie storyboards.
//!
//! Storyboards (synopses, character boxes and whole-body keypoints with
//! persistent ids, film-set boxes) are quantized and written as structured
//! prompt sequences, modelled with a causal transformer, sampled, parsed
//! back and scored.

pub mod codec;
pub mod eval;
pub mod ingest;
pub mod io;
pub mod keypoints;
pub mod lm;
pub mod render;
pub mod scalar;
pub mod types;
pub mod validate;

pub use codec::{
    build_vocabulary, parse, serialize, PromptSequence, QuantizerConfig, SerializerConfig,
    TokenSequence, Vocabulary,
};
pub use keypoints::KeypointScheme;
pub use scalar::Scalar;
pub use types::*;
pub use validate::{validate, ValidationReport, Violation, ViolationKind};

pub use eval::EvalReport;
pub use lm::{ModelConfig, SamplerConfig, TrainConfig};

/// Single-precision model, the default for training and sampling.
pub type Model32 = lm::Model<f32>;
/// Double-precision model, used for gradient checks.
pub type Model64 = lm::Model<f64>;
pub type Checkpoint32 = lm::Checkpoint<f32>;
pub type Checkpoint64 = lm::Checkpoint<f64>;
pub type FeatureExtractor32 = eval::LayoutFeatureExtractor<f32>;
pub type FeatureExtractor64 = eval::LayoutFeatureExtractor<f64>;
