//! Quantization, prompt serialization, word-level tokenization and parsing.

pub mod lexer;
mod parse;
mod quantize;
mod serialize;
mod vocab;

pub use parse::{parse, synopsis_prefix_len, ParseError, ParseErrorKind};
pub use quantize::{dequantize, quantize, QuantizeError, QuantizerConfig};
pub use serialize::{
    serialize, shot_cap, synopses_entry, synopsis_prefix, PromptSequence, SerializeError,
    SerializerConfig, KEY_CHARACTERS, KEY_OBJECTS, KEY_SYNOPSES,
};
pub use vocab::{build_vocabulary, TokenSequence, VocabError, Vocabulary, STRUCTURAL};
