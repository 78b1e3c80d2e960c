//! Causal transformer language model over prompt token ids.

mod checkpoint;
pub mod config;
mod instruct;
pub mod kernels;
mod model;
mod optim;
mod params;
mod sample;
mod train;

pub use config::{ModelConfig, SamplerConfig, TrainConfig};
pub use model::{target_count, LmError, Logits, Model, PAD_ID};
pub use params::{LayerParams, Params, Tensor};
pub use optim::{clip_grad_norm, grad_norm, AdamW};
pub use sample::{argmax, draw, greedy, sample, sample_with_rng, Decoder, Generation, StopReason};
pub use train::{train, BatchSampler, StepRecord};
pub use checkpoint::{read_header, Checkpoint, CheckpointError, CheckpointHeader, TensorEntry, FORMAT_VERSION, MAGIC};
pub use instruct::{encode_corpus, EncodedCorpus, instruction_prefix, instruction_text, make_instruction_pair, InstructError, InstructionPair, TemplateSlot};
