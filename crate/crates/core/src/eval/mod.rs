//! Perplexity, Rouge-L, layout FID and decoding success rate.

mod encoding;
mod extractor;
mod fid;
mod report;
mod success;
mod text;

use thiserror::Error;

use crate::lm::LmError;

pub use encoding::{category_bucket, layout_encoding, shot_encoding, ENCODING_DIM};
pub use extractor::{ExtractorConfig, LayoutFeatureExtractor};
pub use fid::{fid, FID_RIDGE};
pub use report::EvalReport;
pub use success::{
    decoding_success_rate, perplexity, success_over_texts, SampleFailure, SuccessReport, TRUNCATED,
};
pub use text::{embedding_score, lcs_len, rouge_l, rouge_l_mean, EmbeddingProvider, Prf};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("no samples")]
    NoSamples,
    #[error("feature vectors have inconsistent dimensions")]
    DimensionMismatch,
    #[error("non-finite feature value")]
    NonFinite,
    #[error("malformed extractor file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Model(#[from] LmError),
}
