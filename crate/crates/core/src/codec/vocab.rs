use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::lexer::{lex, END, PAD, SEP, SPECIALS, START, UNK};
use super::serialize::PromptSequence;

/// Punctuation and key words every prompt uses.
pub const STRUCTURAL: [&str; 12] = [
    "{", "}", "[", "]", ":", ",", "'", "#", "synopses", "objects", "main", "characters",
];

#[derive(Debug, Error, PartialEq)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary file is malformed: {0}")]
    Malformed(String),
}

/// Token ids of a sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
}

impl TokenSequence {
    pub fn new(ids: Vec<u32>) -> Self {
        Self { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Word-level vocabulary. Ids are dense: specials, structural words, the
/// hidden-keypoint word `0`, bin words `1..=m`, then corpus words.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    bins: u32,
    words: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    bins: u32,
    words: Vec<String>,
}

impl Vocabulary {
    fn from_words(bins: u32, words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Self { bins, words, index }
    }

    /// Vocabulary without corpus words.
    pub fn base(bins: u32) -> Self {
        let mut words: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        words.extend(STRUCTURAL.iter().map(|s| s.to_string()));
        words.extend((0..=bins).map(|b| b.to_string()));
        Self::from_words(bins, words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn bins(&self) -> u32 {
        self.bins
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(|s| s.as_str())
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn pad_id(&self) -> u32 {
        self.index[PAD]
    }

    pub fn unk_id(&self) -> u32 {
        self.index[UNK]
    }

    pub fn start_id(&self) -> u32 {
        self.index[START]
    }

    pub fn end_id(&self) -> u32 {
        self.index[END]
    }

    pub fn sep_id(&self) -> u32 {
        self.index[SEP]
    }

    pub fn encode(&self, text: &str) -> TokenSequence {
        let unk = self.unk_id();
        TokenSequence::new(
            lex(text)
                .into_iter()
                .map(|l| self.id(l.text).unwrap_or(unk))
                .collect(),
        )
    }

    pub fn tokenize(&self, seq: &PromptSequence) -> TokenSequence {
        self.encode(&seq.text)
    }

    /// Space-joined words; ids outside the vocabulary render as `<unk>`.
    pub fn detokenize(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&i| self.word(i).unwrap_or(UNK))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// SHA-256 over the bin count and ordered word list, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.bins.to_le_bytes());
        for w in &self.words {
            h.update(w.as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&VocabFile {
            bins: self.bins,
            words: self.words.clone(),
        })
        .expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, VocabError> {
        let f: VocabFile = serde_json::from_str(text).map_err(|e| VocabError::Malformed(e.to_string()))?;
        let base = Self::base(f.bins);
        if f.words.len() < base.len() || f.words[..base.len()] != base.words[..] {
            return Err(VocabError::Malformed("reserved words missing or reordered".into()));
        }
        let v = Self::from_words(f.bins, f.words);
        if v.index.len() != v.words.len() {
            return Err(VocabError::Malformed("duplicate words".into()));
        }
        Ok(v)
    }
}

/// Reserved words plus every corpus word seen at least `min_count` times,
/// ordered by descending frequency then lexicographically.
pub fn build_vocabulary(
    corpus: &[PromptSequence],
    min_count: usize,
    bins: u32,
) -> Result<Vocabulary, VocabError> {
    if corpus.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }
    let base = Vocabulary::base(bins);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for seq in corpus {
        for l in lex(&seq.text) {
            if base.id(l.text).is_none() {
                *counts.entry(l.text).or_default() += 1;
            }
        }
    }
    let mut extra: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_count.max(1))
        .collect();
    extra.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut words = base.words;
    words.extend(extra.into_iter().map(|(w, _)| w.to_string()));
    Ok(Vocabulary::from_words(bins, words))
}
