use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::codec::{parse, QuantizerConfig, Vocabulary};
use crate::lm::{sample, LmError, Model, SamplerConfig, StopReason};
use crate::scalar::Scalar;

/// Error label for samples that never emitted the end token.
pub const TRUNCATED: &str = "truncated";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: usize,
    /// Parse error kind, or `truncated`.
    pub kind: String,
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub n: usize,
    pub valid: usize,
    pub rate: f64,
    /// Failure count per error kind.
    pub errors: BTreeMap<String, usize>,
    pub failures: Vec<SampleFailure>,
}

impl SuccessReport {
    fn build(n: usize, failures: Vec<SampleFailure>) -> Self {
        let mut errors = BTreeMap::new();
        for f in &failures {
            *errors.entry(f.kind.clone()).or_insert(0) += 1;
        }
        let valid = n - failures.len();
        Self {
            n,
            valid,
            rate: valid as f64 / n as f64,
            errors,
            failures,
        }
    }
}

/// Parses every text; valid means the parse succeeds.
pub fn success_over_texts<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    q: &QuantizerConfig,
) -> Result<SuccessReport, EvalError> {
    let mut n = 0;
    let mut failures = Vec::new();
    for (index, text) in texts.into_iter().enumerate() {
        n += 1;
        if let Err(e) = parse(text, q) {
            failures.push(SampleFailure {
                index,
                kind: e.kind.as_str().to_string(),
                position: e.position,
                message: e.message,
            });
        }
    }
    if n == 0 {
        return Err(EvalError::NoSamples);
    }
    Ok(SuccessReport::build(n, failures))
}

/// Draws `n` samples from `prefix` (sample `i` uses seed `cfg.seed + i`),
/// detokenizes and parses each. Returns the report and the sample texts.
pub fn decoding_success_rate<T: Scalar>(
    model: &Model<T>,
    vocab: &Vocabulary,
    prefix: &[u32],
    n: usize,
    cfg: &SamplerConfig,
    q: &QuantizerConfig,
) -> Result<(SuccessReport, Vec<String>), EvalError> {
    if n == 0 {
        return Err(EvalError::NoSamples);
    }
    let mut texts = Vec::with_capacity(n);
    let mut failures = Vec::new();
    for index in 0..n {
        let scfg = SamplerConfig {
            seed: cfg.seed.wrapping_add(index as u64),
            ..cfg.clone()
        };
        let g = sample(model, prefix, &scfg, vocab.end_id())?;
        let text = vocab.detokenize(&g.tokens);
        if g.stop != StopReason::EndToken {
            failures.push(SampleFailure {
                index,
                kind: TRUNCATED.into(),
                position: g.tokens.len(),
                message: format!("generation stopped without end token ({:?})", g.stop),
            });
        } else if let Err(e) = parse(&text, q) {
            failures.push(SampleFailure {
                index,
                kind: e.kind.as_str().to_string(),
                position: e.position,
                message: e.message,
            });
        }
        texts.push(text);
    }
    Ok((SuccessReport::build(n, failures), texts))
}

/// exp of the token-weighted mean NLL.
pub fn perplexity<T: Scalar>(model: &Model<T>, corpus: &[Vec<u32>]) -> Result<f64, EvalError> {
    let refs: Vec<&[u32]> = corpus.iter().map(|s| s.as_slice()).collect();
    match model.corpus_nll(&refs) {
        Ok(nll) => Ok(nll.exp()),
        Err(LmError::EmptyCorpus) => Err(EvalError::NoSamples),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::ModelConfig;

    #[test]
    fn end_only_model_scores_zero() {
        let vocab = Vocabulary::base(16);
        let cfg = ModelConfig {
            n_layers: 1,
            n_heads: 1,
            d_model: 4,
            d_ff: 4,
            context: 8,
            vocab_size: vocab.len(),
            dropout: 0.0,
        };
        let mut m: Model<f64> = Model::new(cfg, 0).unwrap();
        m.params.head_b.data[vocab.end_id() as usize] = 100.0;
        let scfg = SamplerConfig::default();
        let (r, texts) =
            decoding_success_rate(&m, &vocab, &[vocab.start_id()], 5, &scfg, &QuantizerConfig::default()).unwrap();
        assert_eq!((r.valid, r.rate), (0, 0.0));
        assert_eq!(texts[0], "<start> <end>");
        assert_eq!(r.errors.values().sum::<usize>(), 5);
    }

    #[test]
    fn uniform_model_perplexity_is_vocab_size() {
        let cfg = ModelConfig {
            n_layers: 1,
            n_heads: 1,
            d_model: 4,
            d_ff: 4,
            context: 8,
            vocab_size: 23,
            dropout: 0.0,
        };
        let mut m: Model<f64> = Model::new(cfg, 0).unwrap();
        m.params.head_w.data.iter_mut().for_each(|v| *v = 0.0);
        let p = perplexity(&m, &[vec![1, 2, 3], vec![4, 5]]).unwrap();
        assert!((p - 23.0).abs() < 1e-9);
        assert!(matches!(perplexity(&m, &[]), Err(EvalError::NoSamples)));
    }
}
