//! Run configuration: one TOML file, every section optional.
//!
//! ```toml
//! seed = 0
//!
//! [quantizer]
//! bins = 512
//! canvas = 512.0
//!
//! [serializer]
//! max_tokens = 2560
//! max_shots_with_keypoints = 4
//! max_shots_box_only = 10
//!
//! [corpus]
//! min_count = 1
//! instruction_weight = 0.0
//! instruction_slot = "scene"
//!
//! [model]
//! n_layers = 2
//! n_heads = 4
//! d_model = 128
//! d_ff = 512
//! context = 2560
//! dropout = 0.0
//! init_std = 0.02
//!
//! [train]
//! lr_max = 5e-5
//! lr_min = 5e-6
//! total_iterations = 2000
//! batch_size = 8
//! weight_decay = 0.01
//! grad_clip = 1.0
//! checkpoint_every = 0
//!
//! [sampler]
//! temperature = 1.0
//! top_k = 50
//! max_new_tokens = 2560
//!
//! [eval]
//! n_samples = 200
//! rouge_samples = 20
//!
//! [synthetic]
//! count = 100
//! ```
//!
//! `seed` seeds training, sampling and generation unless a section sets its own.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use storyprior::eval::ExtractorConfig;
use storyprior::ingest::SyntheticConfig;
use storyprior::lm::{ModelConfig, SamplerConfig, TemplateSlot, TrainConfig};
use storyprior::{KeypointScheme, QuantizerConfig, SerializerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SerializerSettings {
    pub max_tokens: usize,
    pub max_shots_with_keypoints: usize,
    pub max_shots_box_only: usize,
}

impl Default for SerializerSettings {
    fn default() -> Self {
        let d = SerializerConfig::default();
        Self {
            max_tokens: d.max_tokens,
            max_shots_with_keypoints: d.max_shots_with_keypoints,
            max_shots_box_only: d.max_shots_box_only,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSettings {
    pub min_count: usize,
    pub instruction_weight: f64,
    pub instruction_slot: TemplateSlot,
}

impl Default for CorpusSettings {
    fn default() -> Self {
        Self {
            min_count: 1,
            instruction_weight: 0.0,
            instruction_slot: TemplateSlot::Scene,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub context: usize,
    pub dropout: f64,
    pub init_std: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let t = ModelConfig::tiny(0);
        Self {
            n_layers: t.n_layers,
            n_heads: t.n_heads,
            d_model: t.d_model,
            d_ff: t.d_ff,
            context: t.context,
            dropout: t.dropout,
            init_std: 0.02,
        }
    }
}

impl ModelSettings {
    pub fn with_vocab(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_model: self.d_model,
            d_ff: self.d_ff,
            context: self.context,
            vocab_size,
            dropout: self.dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub lr_max: f64,
    pub lr_min: f64,
    pub total_iterations: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Non-positive disables clipping.
    pub grad_clip: f64,
    /// Also write `model-<iteration>.ckpt` every this many iterations; 0 disables.
    pub checkpoint_every: usize,
    pub seed: Option<u64>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            lr_max: d.lr_max,
            lr_min: d.lr_min,
            total_iterations: d.total_iterations,
            batch_size: d.batch_size,
            weight_decay: d.weight_decay,
            beta1: d.beta1,
            beta2: d.beta2,
            eps: d.eps,
            grad_clip: d.grad_clip.unwrap_or(0.0),
            checkpoint_every: 0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub temperature: f64,
    /// 0 disables top-k filtering.
    pub top_k: usize,
    pub max_new_tokens: usize,
    pub seed: Option<u64>,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            temperature: d.temperature,
            top_k: d.top_k.unwrap_or(0),
            max_new_tokens: d.max_new_tokens,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub n_samples: usize,
    /// Instruction-conditioned samples scored with Rouge-L.
    pub rouge_samples: usize,
    pub extractor: ExtractorConfig,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            n_samples: 200,
            rouge_samples: 20,
            extractor: ExtractorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub quantizer: QuantizerConfig,
    pub serializer: SerializerSettings,
    pub corpus: CorpusSettings,
    pub model: ModelSettings,
    pub train: TrainSettings,
    pub sampler: SamplerSettings,
    pub eval: EvalSettings,
    pub synthetic: Option<SyntheticConfig>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let mut table: toml::Table =
                    toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                let seed = table.get("seed").cloned();
                if let (Some(seed), Some(toml::Value::Table(syn))) = (seed, table.get_mut("synthetic")) {
                    syn.entry("seed").or_insert(seed);
                }
                toml::Value::Table(table)
                    .try_into()
                    .with_context(|| format!("parsing {}", p.display()))?
            }
        };
        Ok(cfg)
    }

    /// Applies `key=value` overrides addressed by dotted paths, e.g. `train.lr_max=1e-3`.
    pub fn apply_overrides(self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut value = toml::Value::try_from(&self).context("encoding config")?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .with_context(|| format!("override {o:?} is not key=value"))?;
            let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
                Ok(mut t) => t.remove("v").unwrap(),
                Err(_) => toml::Value::String(raw.to_string()),
            };
            let mut slot = &mut value;
            let parts: Vec<&str> = key.trim().split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let table = slot
                    .as_table_mut()
                    .with_context(|| format!("override {key}: {part} is not a table"))?;
                if i + 1 == parts.len() {
                    table.insert(part.to_string(), parsed.clone());
                    break;
                }
                slot = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()));
            }
        }
        let cfg: RunConfig = value.try_into().context("applying overrides")?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        self.quantizer.check().map_err(|e| anyhow::anyhow!("quantizer: {e}"))?;
        if self.serializer.max_tokens == 0 {
            bail!("serializer.max_tokens must be positive");
        }
        if !(0.0..=1.0).contains(&self.corpus.instruction_weight) {
            bail!("corpus.instruction_weight must lie in [0, 1]");
        }
        self.model
            .with_vocab(usize::MAX)
            .check(0)
            .map_err(|e| anyhow::anyhow!("model: {e}"))?;
        if !(self.model.init_std > 0.0) {
            bail!("model.init_std must be positive");
        }
        self.train_config().check().map_err(|e| anyhow::anyhow!("train: {e}"))?;
        self.sampler_config().check().map_err(|e| anyhow::anyhow!("sampler: {e}"))?;
        if let Some(s) = &self.synthetic {
            s.check().map_err(|e| anyhow::anyhow!("synthetic: {e}"))?;
        }
        Ok(())
    }

    pub fn serializer_config(&self) -> SerializerConfig {
        SerializerConfig {
            max_tokens: self.serializer.max_tokens,
            max_shots_with_keypoints: self.serializer.max_shots_with_keypoints,
            max_shots_box_only: self.serializer.max_shots_box_only,
            keypoints: KeypointScheme::default(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            lr_max: t.lr_max,
            lr_min: t.lr_min,
            total_iterations: t.total_iterations,
            batch_size: t.batch_size,
            weight_decay: t.weight_decay,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            grad_clip: (t.grad_clip > 0.0).then_some(t.grad_clip),
            seed: t.seed.unwrap_or(self.seed),
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            temperature: s.temperature,
            top_k: (s.top_k > 0).then_some(s.top_k),
            max_new_tokens: s.max_new_tokens,
            seed: s.seed.unwrap_or(self.seed),
        }
    }

    pub fn synthetic_config(&self) -> SyntheticConfig {
        match &self.synthetic {
            Some(s) => s.clone(),
            None => SyntheticConfig {
                seed: self.seed,
                ..Default::default()
            },
        }
    }
}
