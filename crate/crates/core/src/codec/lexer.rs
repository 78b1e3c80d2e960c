//! Word-level lexer shared by the tokenizer and the prompt parser.
//!
//! A lexeme is one of: a reserved special (`<start>` ...), an escape
//! (`\'`, `\\`), a run of alphanumeric characters, or any other single
//! non-whitespace character. Whitespace only separates lexemes, so joining
//! lexemes with single spaces and lexing again yields the same lexemes.

pub const START: &str = "<start>";
pub const END: &str = "<end>";
pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const SEP: &str = "<sep>";

pub const SPECIALS: [&str; 5] = [PAD, UNK, START, END, SEP];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lexeme<'a> {
    pub text: &'a str,
    /// Byte offset into the source string.
    pub offset: usize,
}

impl Lexeme<'_> {
    pub fn is_special(&self) -> bool {
        SPECIALS.contains(&self.text)
    }

    /// Decimal integer lexeme (ASCII digits only).
    pub fn is_integer(&self) -> bool {
        !self.text.is_empty() && self.text.bytes().all(|b| b.is_ascii_digit())
    }
}

pub fn lex(src: &str) -> Vec<Lexeme<'_>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut chars = src.char_indices().peekable();
    while let Some(&(i, ch)) = chars.peek() {
        if ch.is_whitespace() {
            chars.next();
            continue;
        }
        if ch == '<' {
            if let Some(sp) = SPECIALS.iter().find(|s| src[i..].starts_with(**s)) {
                out.push(Lexeme {
                    text: &src[i..i + sp.len()],
                    offset: i,
                });
                while chars.peek().is_some_and(|&(j, _)| j < i + sp.len()) {
                    chars.next();
                }
                continue;
            }
        }
        if ch == '\\' && matches!(bytes.get(i + 1), Some(b'\'') | Some(b'\\')) {
            out.push(Lexeme {
                text: &src[i..i + 2],
                offset: i,
            });
            chars.next();
            chars.next();
            continue;
        }
        if ch.is_alphanumeric() {
            let mut end = i;
            while let Some(&(j, c)) = chars.peek() {
                if c.is_alphanumeric() {
                    end = j + c.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Lexeme {
                text: &src[i..end],
                offset: i,
            });
            continue;
        }
        out.push(Lexeme {
            text: &src[i..i + ch.len_utf8()],
            offset: i,
        });
        chars.next();
    }
    out
}

/// Escapes a free-text string for placement between single quotes.
pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            c if c.is_whitespace() => out.push(' '),
            c => out.push(c),
        }
    }
    // Structural specials may not appear inside text; `<unk>` may.
    for sp in [START, END, PAD, SEP] {
        if out.contains(sp) {
            out = out.replace(sp, &format!("< {}", &sp[1..]));
        }
    }
    out
}
