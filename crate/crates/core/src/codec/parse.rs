//! Recursive-descent parser from prompt text back to a storyboard layout.
//!
//! ```text
//! <seq>        ::= START [ <instruction> SEP ] "{" <synopses> "," <objects> "," <characters> "}" END
//! <synopses>   ::= "'synopses'" ":" ( <string> | "[" <string> { "," <string> } "]" )
//! <objects>    ::= "'objects'" ":" <shots>
//! <characters> ::= "'main characters'" ":" <shots>
//! <shots>      ::= "[" <shot> { "," <shot> } "]"
//! <shot>       ::= "[" [ <entry> { "," <entry> } ] "]"
//! <entry>      ::= "{" <string> ":" "[" { <int> } "]" "}"
//! ```
//!
//! Film sets carry 4 integers. Characters carry 4 (box), 34 (17 keypoints)
//! or 186 (93 keypoints); keypoint pairs are either both in `[1, m]` or
//! `0 0` for a hidden point.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::lexer::{lex, Lexeme, END, SEP, START, UNK};
use super::quantize::{dequantize, QuantizerConfig};
use super::serialize::{KEY_CHARACTERS, KEY_OBJECTS, KEY_SYNOPSES};
use crate::types::{
    BoundingBox, CharacterAnnotation, FilmSetAnnotation, Keypoint, KeypointLayout, KeypointSet,
    Provenance, RepresentationTier, Shot, Storyboard, Synopsis,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParseErrorKind {
    MissingStart,
    UnexpectedToken,
    UnexpectedEnd,
    WrongArity,
    BinOutOfRange,
    InvertedBox,
    ShotCountMismatch,
    NoShots,
    TrailingInput,
}

impl ParseErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorKind::MissingStart => "missing_start",
            ParseErrorKind::UnexpectedToken => "unexpected_token",
            ParseErrorKind::UnexpectedEnd => "unexpected_end",
            ParseErrorKind::WrongArity => "wrong_arity",
            ParseErrorKind::BinOutOfRange => "bin_out_of_range",
            ParseErrorKind::InvertedBox => "inverted_box",
            ParseErrorKind::ShotCountMismatch => "shot_count_mismatch",
            ParseErrorKind::NoShots => "no_shots",
            ParseErrorKind::TrailingInput => "trailing_input",
        }
    }
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at token {position} (byte {offset}): {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Lexeme index of the first violation.
    pub position: usize,
    /// Byte offset of that lexeme in the input.
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy)]
struct IntAtom {
    value: u64,
    pos: usize,
}

struct Entry {
    key: String,
    key_pos: usize,
    ints: Vec<IntAtom>,
    open_pos: usize,
}

struct Parser<'a> {
    lex: Vec<Lexeme<'a>>,
    pos: usize,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            lex: lex(src),
            pos: 0,
            src_len: src.len(),
        }
    }

    fn err_at(&self, kind: ParseErrorKind, pos: usize, message: impl Into<String>) -> ParseError {
        let offset = self.lex.get(pos).map_or(self.src_len, |l| l.offset);
        ParseError {
            kind,
            position: pos,
            offset,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&str> {
        self.lex.get(self.pos).map(|l| l.text)
    }

    fn bump(&mut self) -> Result<Lexeme<'a>, ParseError> {
        match self.lex.get(self.pos) {
            Some(l) => {
                self.pos += 1;
                Ok(*l)
            }
            None => Err(self.err_at(ParseErrorKind::UnexpectedEnd, self.pos, "input ended early")),
        }
    }

    fn expect(&mut self, want: &str) -> Result<(), ParseError> {
        let at = self.pos;
        let got = self.bump()?;
        if got.text == want {
            Ok(())
        } else {
            Err(self.err_at(
                ParseErrorKind::UnexpectedToken,
                at,
                format!("expected '{want}', found '{}'", got.text),
            ))
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        self.expect("'")?;
        let mut words: Vec<String> = Vec::new();
        loop {
            let at = self.pos;
            let l = self.bump()?;
            match l.text {
                "'" => break,
                t if l.is_special() && t != UNK => {
                    return Err(self.err_at(
                        ParseErrorKind::UnexpectedToken,
                        at,
                        format!("'{t}' inside a string"),
                    ))
                }
                "\\'" => words.push("'".into()),
                "\\\\" => words.push("\\".into()),
                t => words.push(t.to_string()),
            }
        }
        Ok(words.join(" "))
    }

    fn key(&mut self, name: &str) -> Result<(), ParseError> {
        let at = self.pos;
        let k = self.string()?;
        if k != name {
            return Err(self.err_at(
                ParseErrorKind::UnexpectedToken,
                at,
                format!("expected key '{name}', found '{k}'"),
            ));
        }
        self.expect(":")
    }

    fn int_list(&mut self) -> Result<Vec<IntAtom>, ParseError> {
        self.expect("[")?;
        let mut out = Vec::new();
        loop {
            let at = self.pos;
            let l = self.bump()?;
            if l.text == "]" {
                return Ok(out);
            }
            if !l.is_integer() || (l.text.len() > 1 && l.text.starts_with('0')) {
                return Err(self.err_at(
                    ParseErrorKind::UnexpectedToken,
                    at,
                    format!("expected integer or ']', found '{}'", l.text),
                ));
            }
            let value = l.text.parse::<u64>().unwrap_or(u64::MAX);
            out.push(IntAtom { value, pos: at });
        }
    }

    fn entry(&mut self) -> Result<Entry, ParseError> {
        let open_pos = self.pos;
        self.expect("{")?;
        let key_pos = self.pos;
        let key = self.string()?;
        self.expect(":")?;
        let ints = self.int_list()?;
        self.expect("}")?;
        Ok(Entry {
            key,
            key_pos,
            ints,
            open_pos,
        })
    }

    /// `[ [entry, ...], [...] ]`, returning the opening position of each shot.
    fn shots(&mut self) -> Result<Vec<(usize, Vec<Entry>)>, ParseError> {
        let list_pos = self.pos;
        self.expect("[")?;
        if self.peek() == Some("]") {
            return Err(self.err_at(ParseErrorKind::NoShots, list_pos, "shot list is empty"));
        }
        let mut shots = Vec::new();
        loop {
            let shot_pos = self.pos;
            self.expect("[")?;
            let mut entries = Vec::new();
            if self.peek() == Some("]") {
                self.bump()?;
            } else {
                loop {
                    entries.push(self.entry()?);
                    let at = self.pos;
                    match self.bump()?.text {
                        "," => continue,
                        "]" => break,
                        t => {
                            return Err(self.err_at(
                                ParseErrorKind::UnexpectedToken,
                                at,
                                format!("expected ',' or ']', found '{t}'"),
                            ))
                        }
                    }
                }
            }
            shots.push((shot_pos, entries));
            let at = self.pos;
            match self.bump()?.text {
                "," => continue,
                "]" => return Ok(shots),
                t => {
                    return Err(self.err_at(
                        ParseErrorKind::UnexpectedToken,
                        at,
                        format!("expected ',' or ']', found '{t}'"),
                    ))
                }
            }
        }
    }

    /// Consumes `START [instruction SEP] "{"`, returning the instruction text.
    fn head(&mut self) -> Result<Option<String>, ParseError> {
        if self.peek() != Some(START) {
            let found = self.peek().unwrap_or("end of input").to_string();
            return Err(self.err_at(
                ParseErrorKind::MissingStart,
                self.pos,
                format!("expected '{START}', found '{found}'"),
            ));
        }
        self.bump()?;
        let mut instruction = None;
        if self.peek() != Some("{") {
            let begin = self.pos;
            while let Some(t) = self.peek() {
                if t == SEP {
                    break;
                }
                if t == START || t == END {
                    return Err(self.err_at(
                        ParseErrorKind::UnexpectedToken,
                        self.pos,
                        format!("expected '{{' or instruction text, found '{t}'"),
                    ));
                }
                self.pos += 1;
            }
            if self.peek().is_none() {
                return Err(self.err_at(
                    ParseErrorKind::UnexpectedEnd,
                    self.pos,
                    "instruction without separator",
                ));
            }
            let words: Vec<&str> = self.lex[begin..self.pos].iter().map(|l| l.text).collect();
            instruction = Some(words.join(" "));
            self.bump()?;
        }
        self.expect("{")?;
        Ok(instruction)
    }

    fn synopses(&mut self) -> Result<(Synopsis, usize), ParseError> {
        let at = self.pos;
        self.key(KEY_SYNOPSES)?;
        if self.peek() == Some("[") {
            self.bump()?;
            let mut texts = Vec::new();
            loop {
                texts.push(self.string()?);
                let p = self.pos;
                match self.bump()?.text {
                    "," => continue,
                    "]" => break,
                    t => {
                        return Err(self.err_at(
                            ParseErrorKind::UnexpectedToken,
                            p,
                            format!("expected ',' or ']', found '{t}'"),
                        ))
                    }
                }
            }
            Ok((Synopsis::shot_by_shot(texts), at))
        } else {
            Ok((Synopsis::condensed(self.string()?), at))
        }
    }
}

/// Number of leading lexemes forming the synopsis-conditioning prefix
/// (`<start> ... {'synopses': ..., `), or `None` if `text` has no such prefix.
pub fn synopsis_prefix_len(text: &str) -> Option<usize> {
    let mut p = Parser::new(text);
    p.head().ok()?;
    p.synopses().ok()?;
    p.expect(",").ok()?;
    Some(p.pos)
}

struct Decoder<'q> {
    q: &'q QuantizerConfig,
}

impl Decoder<'_> {
    fn check_bin(&self, p: &Parser, a: IntAtom) -> Result<u32, ParseError> {
        if a.value < 1 || a.value > self.q.bins as u64 {
            return Err(p.err_at(
                ParseErrorKind::BinOutOfRange,
                a.pos,
                format!("bin {} outside [1, {}]", a.value, self.q.bins),
            ));
        }
        Ok(a.value as u32)
    }

    fn coord(&self, bin: u32) -> f64 {
        dequantize(bin, self.q.canvas, self.q).expect("bin checked")
    }

    /// Corner pair for bins `lo <= hi`; equal bins get a quarter-bin margin
    /// so the box stays non-degenerate and requantizes to the same bins.
    fn span(&self, lo: u32, hi: u32) -> (f64, f64) {
        if lo < hi {
            (self.coord(lo), self.coord(hi))
        } else {
            let quarter = 0.25 * self.q.canvas / self.q.bins as f64;
            let c = self.coord(lo);
            (c - quarter, c + quarter)
        }
    }

    fn bbox(&self, p: &Parser, e: &Entry) -> Result<BoundingBox, ParseError> {
        let b: Vec<u32> = e
            .ints
            .iter()
            .map(|a| self.check_bin(p, *a))
            .collect::<Result<_, _>>()?;
        if b[0] > b[2] || b[1] > b[3] {
            return Err(p.err_at(
                ParseErrorKind::InvertedBox,
                e.ints[0].pos,
                format!("box [{} {} {} {}] has min > max", b[0], b[1], b[2], b[3]),
            ));
        }
        let (x0, x1) = self.span(b[0], b[2]);
        let (y0, y1) = self.span(b[1], b[3]);
        Ok(BoundingBox::new(x0, y0, x1, y1))
    }

    fn keypoints(&self, p: &Parser, e: &Entry, layout: KeypointLayout) -> Result<KeypointSet, ParseError> {
        let mut pts = Vec::with_capacity(e.ints.len() / 2);
        for pair in e.ints.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.value == 0 && b.value == 0 {
                pts.push(Keypoint::hidden());
                continue;
            }
            let bx = self.check_bin(p, a)?;
            let by = self.check_bin(p, b)?;
            pts.push(Keypoint::visible(self.coord(bx), self.coord(by)));
        }
        Ok(KeypointSet::new(layout, pts).expect("arity checked"))
    }

    /// Tight box around visible keypoints, or the whole canvas if none are.
    fn keypoint_box(&self, kps: &KeypointSet) -> BoundingBox {
        let c = self.q.canvas;
        let vis: Vec<&Keypoint> = kps.points().iter().filter(|p| p.visible).collect();
        if vis.is_empty() {
            return BoundingBox::new(0.0, 0.0, c, c);
        }
        let quarter = 0.25 * c / self.q.bins as f64;
        let fold = |f: fn(f64, f64) -> f64, init: f64, g: fn(&Keypoint) -> f64| {
            vis.iter().map(|p| g(p)).fold(init, f)
        };
        BoundingBox::new(
            (fold(f64::min, f64::INFINITY, |p| p.x) - quarter).max(0.0),
            (fold(f64::min, f64::INFINITY, |p| p.y) - quarter).max(0.0),
            (fold(f64::max, f64::NEG_INFINITY, |p| p.x) + quarter).min(c),
            (fold(f64::max, f64::NEG_INFINITY, |p| p.y) + quarter).min(c),
        )
    }
}

/// Strips a trailing `#k` disambiguator from a parsed key.
fn base_mention(key: &str) -> &str {
    if let Some((base, suffix)) = key.rsplit_once(" # ") {
        if !base.is_empty() && !suffix.is_empty() && suffix.bytes().all(|b| b.is_ascii_digit()) {
            return base;
        }
    }
    key
}

/// Parses prompt text into a storyboard on the `canvas × canvas` frame.
pub fn parse(text: &str, q: &QuantizerConfig) -> Result<Storyboard, ParseError> {
    let mut p = Parser::new(text);
    p.head()?;
    let (synopsis, syn_pos) = p.synopses()?;
    p.expect(",")?;
    p.key(KEY_OBJECTS)?;
    let objects = p.shots()?;
    p.expect(",")?;
    let chars_pos = p.pos;
    p.key(KEY_CHARACTERS)?;
    let characters = p.shots()?;
    p.expect("}")?;
    p.expect(END)?;
    if p.pos < p.lex.len() {
        return Err(p.err_at(
            ParseErrorKind::TrailingInput,
            p.pos,
            format!("unexpected '{}' after end token", p.lex[p.pos].text),
        ));
    }

    if objects.len() != characters.len() {
        return Err(p.err_at(
            ParseErrorKind::ShotCountMismatch,
            chars_pos,
            format!(
                "'objects' has {} shots, 'main characters' has {}",
                objects.len(),
                characters.len()
            ),
        ));
    }
    if synopsis.kind == crate::types::SynopsisKind::ShotByShot && synopsis.texts.len() != objects.len() {
        return Err(p.err_at(
            ParseErrorKind::ShotCountMismatch,
            syn_pos,
            format!(
                "{} shot descriptions for {} shots",
                synopsis.texts.len(),
                objects.len()
            ),
        ));
    }

    let dec = Decoder { q };
    let canvas = q.canvas;
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut shots = Vec::with_capacity(objects.len());
    for ((_, objs), (_, chars)) in objects.iter().zip(&characters) {
        let mut shot = Shot::empty(canvas, canvas);
        for e in objs {
            if e.ints.len() != 4 {
                return Err(p.err_at(
                    ParseErrorKind::WrongArity,
                    e.open_pos,
                    format!("film set '{}' has {} integers, expected 4", e.key, e.ints.len()),
                ));
            }
            if e.key.trim().is_empty() {
                return Err(p.err_at(ParseErrorKind::UnexpectedToken, e.key_pos, "empty category"));
            }
            shot.film_sets.push(FilmSetAnnotation {
                category: e.key.clone(),
                bbox: dec.bbox(&p, e)?,
            });
        }
        for e in chars {
            let tier = RepresentationTier::from_word_count(e.ints.len()).ok_or_else(|| {
                p.err_at(
                    ParseErrorKind::WrongArity,
                    e.open_pos,
                    format!(
                        "character '{}' has {} integers, expected 4, 34 or 186",
                        e.key,
                        e.ints.len()
                    ),
                )
            })?;
            let mention = base_mention(&e.key).to_string();
            if mention.trim().is_empty() {
                return Err(p.err_at(ParseErrorKind::UnexpectedToken, e.key_pos, "empty mention"));
            }
            let next = ids.len() as u32;
            let id = *ids.entry(e.key.clone()).or_insert(next);
            let (bbox, keypoints) = match tier.emitted_layout() {
                None => (dec.bbox(&p, e)?, None),
                Some(layout) => {
                    let kps = dec.keypoints(&p, e, layout)?;
                    (dec.keypoint_box(&kps), Some(kps))
                }
            };
            shot.characters.push(CharacterAnnotation {
                character_id: id,
                mention,
                bbox,
                keypoints,
                tier,
            });
        }
        shots.push(shot);
    }

    Ok(Storyboard {
        id: "decoded".into(),
        shots,
        synopsis,
        summative: None,
        provenance: Provenance::Decoded,
    })
}
