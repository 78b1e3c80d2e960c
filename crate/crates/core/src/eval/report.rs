use serde::{Deserialize, Serialize};

use super::text::Prf;

/// Metrics of one evaluation run. Metrics that were not computed are `null`.
///
/// JSON keys: `perplexity`, `rouge_l` (`precision`, `recall`, `f1`), `fid`,
/// `decoding_success_rate`, `n_samples`, `sampler_config_digest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub perplexity: Option<f64>,
    pub rouge_l: Option<Prf>,
    pub fid: Option<f64>,
    pub decoding_success_rate: Option<f64>,
    pub n_samples: usize,
    pub sampler_config_digest: String,
}

impl EvalReport {
    /// Every present value is finite and the rate lies in [0, 1].
    pub fn is_consistent(&self) -> bool {
        let fin = |v: Option<f64>| v.is_none_or(f64::is_finite);
        fin(self.perplexity)
            && fin(self.fid)
            && self.rouge_l.is_none_or(|r| {
                [r.precision, r.recall, r.f1].iter().all(|v| (0.0..=1.0).contains(v))
            })
            && self
                .decoding_success_rate
                .is_none_or(|r| (0.0..=1.0).contains(&r))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
