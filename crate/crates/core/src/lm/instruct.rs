//! Instruction-storyboard pairs built from summative annotations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::lexer::{escape_text, SEP, START};
use crate::codec::{serialize, PromptSequence, QuantizerConfig, SerializeError, SerializerConfig};
use crate::types::{Storyboard, SummativeAnnotation};

#[derive(Debug, Error)]
pub enum InstructError {
    #[error("storyboard {0:?} has no summative annotation")]
    MissingSummative(String),
    #[error("summative annotation has no usable scene, genre or emotion")]
    NoSlot,
    #[error(transparent)]
    Serialize(#[from] SerializeError),
}

/// Which summative field fills the template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TemplateSlot {
    #[default]
    Scene,
    Genre,
    Emotion,
}

fn with_article(noun: &str) -> String {
    let lower = noun.to_ascii_lowercase();
    if ["a ", "an ", "the "].iter().any(|p| lower.starts_with(p)) {
        return noun.to_string();
    }
    let article = match lower.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    };
    format!("{article} {noun}")
}

/// Fills the template for `slot`. An empty scene falls back to the genre
/// template, an empty genre to the emotion template.
pub fn instruction_text(s: &SummativeAnnotation, slot: TemplateSlot) -> Result<String, InstructError> {
    let scene = s.scene.trim();
    let genre = s.genre.trim();
    let emotion = s.emotion.trim();
    let order: &[TemplateSlot] = match slot {
        TemplateSlot::Scene => &[TemplateSlot::Scene, TemplateSlot::Genre, TemplateSlot::Emotion],
        TemplateSlot::Genre => &[TemplateSlot::Genre, TemplateSlot::Scene, TemplateSlot::Emotion],
        TemplateSlot::Emotion => &[TemplateSlot::Emotion, TemplateSlot::Genre, TemplateSlot::Scene],
    };
    for s in order {
        match s {
            TemplateSlot::Scene if !scene.is_empty() => {
                return Ok(format!(
                    "Could you please develop a movie storyboard that takes place in {}?",
                    with_article(scene)
                ))
            }
            TemplateSlot::Genre if !genre.is_empty() => {
                return Ok(format!(
                    "Could you please develop {} movie storyboard?",
                    with_article(genre)
                ))
            }
            TemplateSlot::Emotion if !emotion.is_empty() => {
                return Ok(format!(
                    "Could you please develop a movie storyboard with a {emotion} mood?"
                ))
            }
            _ => {}
        }
    }
    Err(InstructError::NoSlot)
}

/// Sampling prefix for instruction-conditioned generation: `<start>instruction <sep>`.
pub fn instruction_prefix(instruction: &str) -> String {
    format!("{START}{} {SEP}", escape_text(instruction))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstructionPair {
    pub instruction: String,
    pub target: PromptSequence,
    /// Instruction and target joined by the separator, for training.
    pub combined: PromptSequence,
}

pub fn make_instruction_pair(
    sb: &Storyboard,
    slot: TemplateSlot,
    q: &QuantizerConfig,
    cfg: &SerializerConfig,
) -> Result<InstructionPair, InstructError> {
    let summ = sb
        .summative
        .as_ref()
        .ok_or_else(|| InstructError::MissingSummative(sb.id.clone()))?;
    let instruction = instruction_text(summ, slot)?;
    let target = serialize(sb, q, cfg)?;
    let combined = PromptSequence::with_instruction(&instruction, &target);
    Ok(InstructionPair {
        instruction,
        target,
        combined,
    })
}

/// Serialized corpus plus per-record failures (record index, message).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EncodedCorpus {
    pub sequences: Vec<PromptSequence>,
    pub errors: Vec<(usize, String)>,
}

/// Serializes every board, then appends instruction pairs for a seeded
/// `instruction_weight` fraction of the boards that carry summative annotations.
pub fn encode_corpus(
    boards: &[Storyboard],
    q: &QuantizerConfig,
    cfg: &SerializerConfig,
    instruction_weight: f64,
    slot: TemplateSlot,
    seed: u64,
) -> EncodedCorpus {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let mut out = EncodedCorpus::default();
    let mut ok = Vec::new();
    for (i, sb) in boards.iter().enumerate() {
        match serialize(sb, q, cfg) {
            Ok(s) => {
                out.sequences.push(s);
                ok.push(i);
            }
            Err(e) => out.errors.push((i, e.to_string())),
        }
    }
    let mut eligible: Vec<usize> = ok
        .into_iter()
        .filter(|&i| {
            boards[i]
                .summative
                .as_ref()
                .is_some_and(|s| instruction_text(s, slot).is_ok())
        })
        .collect();
    let take = (eligible.len() as f64 * instruction_weight.clamp(0.0, 1.0)).round() as usize;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    eligible.truncate(take);
    eligible.sort_unstable();
    for i in eligible {
        match make_instruction_pair(&boards[i], slot, q, cfg) {
            Ok(p) => out.sequences.push(p.combined),
            Err(e) => out.errors.push((i, e.to_string())),
        }
    }
    out
}
