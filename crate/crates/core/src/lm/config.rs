use serde::{Deserialize, Serialize};

/// Transformer sizes and context window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    /// Context window `k`; also the position-embedding length.
    pub context: usize,
    pub vocab_size: usize,
    #[serde(default)]
    pub dropout: f64,
}

impl ModelConfig {
    /// Two layers, width 128, full 2,560-token context.
    pub fn tiny(vocab_size: usize) -> Self {
        Self {
            n_layers: 2,
            n_heads: 4,
            d_model: 128,
            d_ff: 512,
            context: 2560,
            vocab_size,
            dropout: 0.0,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// `min_vocab` is the number of reserved vocabulary words (bins + specials).
    pub fn check(&self, min_vocab: usize) -> Result<(), String> {
        if self.n_layers == 0 || self.n_heads == 0 || self.d_model == 0 || self.d_ff == 0 {
            return Err("model sizes must be positive".into());
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.context < 1 {
            return Err("context window must be >= 1".into());
        }
        if self.vocab_size < min_vocab {
            return Err(format!(
                "vocab_size {} below reserved word count {min_vocab}",
                self.vocab_size
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    /// Trainable scalar count.
    pub fn parameter_count(&self) -> usize {
        let d = self.d_model;
        let per_layer = 2 * d + d * 3 * d + 3 * d + d * d + d + 2 * d + d * self.d_ff + self.d_ff + self.d_ff * d + d;
        self.vocab_size * d
            + self.context * d
            + self.n_layers * per_layer
            + 2 * d
            + d * self.vocab_size
            + self.vocab_size
    }
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr_max: f64,
    pub lr_min: f64,
    pub total_iterations: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    #[serde(default)]
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_max: 5e-5,
            lr_min: 5e-6,
            total_iterations: 2000,
            batch_size: 8,
            weight_decay: 0.01,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            grad_clip: Some(1.0),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Linear decay from `lr_max` at iteration 0 to `lr_min` at the final iteration.
    pub fn learning_rate(&self, iteration: usize) -> f64 {
        if self.total_iterations <= 1 {
            return self.lr_max;
        }
        let t = iteration.min(self.total_iterations - 1) as f64 / (self.total_iterations - 1) as f64;
        self.lr_max + (self.lr_min - self.lr_max) * t
    }

    pub fn check(&self) -> Result<(), String> {
        if self.total_iterations == 0 || self.batch_size == 0 {
            return Err("total_iterations and batch_size must be positive".into());
        }
        if !(self.lr_max > 0.0 && self.lr_min >= 0.0) {
            return Err("learning rates must be positive".into());
        }
        Ok(())
    }
}

/// Autoregressive sampling settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub temperature: f64,
    #[serde(default)]
    pub top_k: Option<usize>,
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_k: Some(50),
            max_new_tokens: 2560,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn check(&self) -> Result<(), String> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(format!("temperature must be > 0, got {}", self.temperature));
        }
        if self.top_k == Some(0) {
            return Err("top_k must be >= 1".into());
        }
        Ok(())
    }

    /// Stable digest of the settings, recorded next to every metric.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("sampler config serializes");
        let h = Sha256::digest(json.as_bytes());
        h.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
