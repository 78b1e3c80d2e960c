use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexer::{self, lex, END, SEP, START};
use super::quantize::{quantize, QuantizeError, QuantizerConfig};
use crate::keypoints::{project_keypoints, KeypointError, KeypointScheme};
use crate::types::{
    BoundingBox, CharacterAnnotation, KeypointLayout, KeypointSet, RepresentationTier, Shot,
    Storyboard, Synopsis, SynopsisKind,
};
use crate::validate::{validate, ValidationReport};

pub const KEY_SYNOPSES: &str = "synopses";
pub const KEY_OBJECTS: &str = "objects";
pub const KEY_CHARACTERS: &str = "main characters";

#[derive(Debug, Error)]
pub enum SerializeError {
    #[error("storyboard fails validation: {}", .0.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(ValidationReport),
    #[error("first shot alone needs {tokens} tokens, budget is {budget}")]
    OverBudget { tokens: usize, budget: usize },
    #[error(transparent)]
    Keypoint(#[from] KeypointError),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
}

/// Budgets and keypoint subsets applied when writing prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerializerConfig {
    pub max_tokens: usize,
    pub max_shots_with_keypoints: usize,
    pub max_shots_box_only: usize,
    #[serde(default)]
    pub keypoints: KeypointScheme,
}

impl Default for SerializerConfig {
    fn default() -> Self {
        Self {
            max_tokens: 2560,
            max_shots_with_keypoints: 4,
            max_shots_box_only: 10,
            keypoints: KeypointScheme::default(),
        }
    }
}

/// A serialized storyboard, delimited by `<start>` and `<end>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptSequence {
    pub text: String,
}

impl PromptSequence {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    pub fn token_count(&self) -> usize {
        lex(&self.text).len()
    }

    pub fn lexemes(&self) -> Vec<&str> {
        lex(&self.text).into_iter().map(|l| l.text).collect()
    }

    /// `<start> instruction <sep> {...} <end>`.
    pub fn with_instruction(instruction: &str, target: &PromptSequence) -> Self {
        let body = target.text.strip_prefix(START).unwrap_or(&target.text);
        Self {
            text: format!("{START}{} {SEP}{body}", lexer::escape_text(instruction)),
        }
    }
}

fn quote(out: &mut String, s: &str) {
    out.push('\'');
    out.push_str(&lexer::escape_text(s));
    out.push('\'');
}

fn push_bins(out: &mut String, bins: &[u32]) {
    out.push('[');
    for (i, b) in bins.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{b}").unwrap();
    }
    out.push(']');
}

/// `'synopses': ...` entry for the first `n_shots` shots.
pub fn synopses_entry(synopsis: &Synopsis, n_shots: usize) -> String {
    let mut out = String::new();
    quote(&mut out, KEY_SYNOPSES);
    out.push_str(": ");
    match synopsis.kind {
        SynopsisKind::Condensed => quote(&mut out, synopsis.texts.first().map_or("", |s| s.as_str())),
        SynopsisKind::ShotByShot => {
            out.push('[');
            for (i, t) in synopsis.texts.iter().take(n_shots).enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                quote(&mut out, t);
            }
            out.push(']');
        }
    }
    out
}

/// The synopsis-conditioning prefix: `<start>{'synopses': ..., `.
pub fn synopsis_prefix(synopsis: &Synopsis, n_shots: usize) -> String {
    format!("{START}{{{}, ", synopses_entry(synopsis, n_shots))
}

fn box_bins(b: &BoundingBox, w: f64, h: f64, q: &QuantizerConfig) -> Result<[u32; 4], QuantizeError> {
    Ok([
        quantize(b.x_min, w, q)?,
        quantize(b.y_min, h, q)?,
        quantize(b.x_max, w, q)?,
        quantize(b.y_max, h, q)?,
    ])
}

fn emitted_keypoints(
    ch: &CharacterAnnotation,
    scheme: &KeypointScheme,
) -> Result<Option<KeypointSet>, KeypointError> {
    let Some(target) = ch.tier.emitted_layout() else {
        return Ok(None);
    };
    let Some(kps) = &ch.keypoints else {
        return Ok(None);
    };
    if kps.layout() == target {
        return Ok(Some(kps.clone()));
    }
    if kps.layout() == KeypointLayout::WholeBody133 {
        return project_keypoints(kps, &scheme.indices(target)).map(Some);
    }
    Err(KeypointError::WrongInputLayout(kps.layout()))
}

/// Integer words for one character, by tier.
fn character_bins(
    ch: &CharacterAnnotation,
    w: f64,
    h: f64,
    q: &QuantizerConfig,
    scheme: &KeypointScheme,
) -> Result<Vec<u32>, SerializeError> {
    if ch.tier == RepresentationTier::BoxOnly {
        return Ok(box_bins(&ch.bbox, w, h, q)?.to_vec());
    }
    let kps = emitted_keypoints(ch, scheme)?
        .ok_or(KeypointError::UnsupportedLength(0))?;
    let mut out = Vec::with_capacity(kps.points().len() * 2);
    for p in kps.points() {
        if p.visible {
            out.push(quantize(p.x, w, q)?);
            out.push(quantize(p.y, h, q)?);
        } else {
            out.push(0);
            out.push(0);
        }
    }
    Ok(out)
}

struct ShotFragments {
    objects: String,
    characters: String,
}

fn shot_fragments(
    shot: &Shot,
    q: &QuantizerConfig,
    scheme: &KeypointScheme,
) -> Result<ShotFragments, SerializeError> {
    let (w, h) = (shot.frame_width, shot.frame_height);
    let mut objects = String::from("[");
    for (i, fs) in shot.film_sets.iter().enumerate() {
        if i > 0 {
            objects.push_str(", ");
        }
        objects.push('{');
        quote(&mut objects, &fs.category);
        objects.push_str(": ");
        push_bins(&mut objects, &box_bins(&fs.bbox, w, h, q)?);
        objects.push('}');
    }
    objects.push(']');

    let mut characters = String::from("[");
    let mut emitted: Vec<String> = Vec::new();
    for (i, ch) in shot.characters.iter().enumerate() {
        if i > 0 {
            characters.push_str(", ");
        }
        // Compare mentions as the parser will see them.
        let norm = lex(&lexer::escape_text(&ch.mention))
            .iter()
            .map(|l| l.text)
            .collect::<Vec<_>>()
            .join(" ");
        let dup = emitted.iter().filter(|m| **m == norm).count();
        emitted.push(norm);
        let key = if dup == 0 {
            ch.mention.clone()
        } else {
            format!("{}#{dup}", ch.mention)
        };
        characters.push('{');
        quote(&mut characters, &key);
        characters.push_str(": ");
        push_bins(&mut characters, &character_bins(ch, w, h, q, scheme)?);
        characters.push('}');
    }
    characters.push(']');
    Ok(ShotFragments { objects, characters })
}

fn assemble(synopsis: &Synopsis, frags: &[ShotFragments]) -> String {
    let mut out = synopsis_prefix(synopsis, frags.len());
    quote(&mut out, KEY_OBJECTS);
    out.push_str(": [");
    for (i, f) in frags.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&f.objects);
    }
    out.push_str("], ");
    quote(&mut out, KEY_CHARACTERS);
    out.push_str(": [");
    for (i, f) in frags.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&f.characters);
    }
    out.push_str("]}");
    out.push_str(END);
    out
}

/// Number of leading shots eligible before the token budget is applied.
pub fn shot_cap(sb: &Storyboard, cfg: &SerializerConfig) -> usize {
    let cap = if sb.has_keypoints() {
        cfg.max_shots_with_keypoints
    } else {
        cfg.max_shots_box_only
    };
    sb.shots.len().min(cap)
}

/// Writes a storyboard as a prompt sequence. Trailing shots are dropped
/// whole until the sequence fits `max_tokens`.
pub fn serialize(
    sb: &Storyboard,
    q: &QuantizerConfig,
    cfg: &SerializerConfig,
) -> Result<PromptSequence, SerializeError> {
    let report = validate(sb);
    if !report.is_valid() {
        return Err(SerializeError::Invalid(report));
    }
    let n = shot_cap(sb, cfg);
    let frags = sb.shots[..n]
        .iter()
        .map(|s| shot_fragments(s, q, &cfg.keypoints))
        .collect::<Result<Vec<_>, _>>()?;

    let mut keep = frags.len();
    loop {
        let text = assemble(&sb.synopsis, &frags[..keep]);
        let tokens = lex(&text).len();
        if tokens <= cfg.max_tokens {
            return Ok(PromptSequence { text });
        }
        if keep == 1 {
            return Err(SerializeError::OverBudget {
                tokens,
                budget: cfg.max_tokens,
            });
        }
        keep -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::*;

    fn fork_shot() -> Shot {
        let mut s = Shot::empty(512.0, 512.0);
        s.film_sets.push(FilmSetAnnotation {
            category: "fork".into(),
            bbox: BoundingBox::new(127.2, 109.5, 182.9, 239.0),
        });
        s
    }

    fn board(shots: Vec<Shot>) -> Storyboard {
        Storyboard {
            id: "t".into(),
            shots,
            synopsis: Synopsis::condensed("he picks up the fork"),
            summative: None,
            provenance: Provenance::Annotated,
        }
    }

    fn whole_body_char(id: u32, mention: &str) -> CharacterAnnotation {
        let mut pts: Vec<Keypoint> = (0..133)
            .map(|i| Keypoint::visible(200.0 + (i % 10) as f64, 150.0 + (i / 10) as f64))
            .collect();
        pts[0] = Keypoint::visible(337.5, 204.5);
        pts[1] = Keypoint::hidden();
        pts[2] = Keypoint::visible(390.2, 279.9);
        let kps = KeypointSet::new(KeypointLayout::WholeBody133, pts).unwrap();
        CharacterAnnotation::new(id, mention, BoundingBox::new(150.0, 100.0, 450.0, 500.0), Some(kps))
            .unwrap()
    }

    #[test]
    fn film_set_fragment() {
        let p = serialize(&board(vec![fork_shot()]), &QuantizerConfig::default(), &SerializerConfig::default())
            .unwrap();
        assert!(p.text.contains("{'fork': [128 110 183 240]}"), "{}", p.text);
        assert!(p.text.starts_with("<start>{'synopses': 'he picks up the fork', 'objects': [["));
        assert!(p.text.ends_with("]]}<end>"));
    }

    #[test]
    fn whole_body_fragment_has_186_integers() {
        let mut shot = fork_shot();
        shot.characters.push(whole_body_char(0, "he"));
        let p = serialize(&board(vec![shot]), &QuantizerConfig::default(), &SerializerConfig::default())
            .unwrap();
        let start = p.text.find("{'he': [").unwrap() + "{'he': [".len();
        let end = start + p.text[start..].find(']').unwrap();
        let ints: Vec<&str> = p.text[start..end].split(' ').collect();
        assert_eq!(ints.len(), 186);
        assert_eq!(&ints[..6], ["338", "205", "0", "0", "391", "280"]);
    }

    #[test]
    fn keypoint_board_capped_at_four_shots() {
        let mut shots: Vec<Shot> = (0..6).map(|_| fork_shot()).collect();
        shots[1].characters.push(whole_body_char(0, "he"));
        let p = serialize(&board(shots), &QuantizerConfig::default(), &SerializerConfig::default())
            .unwrap();
        let parsed = super::super::parse(&p.text, &QuantizerConfig::default()).unwrap();
        assert_eq!(parsed.shots.len(), 4);
    }

    #[test]
    fn box_only_board_capped_at_ten_shots() {
        let shots: Vec<Shot> = (0..12).map(|_| fork_shot()).collect();
        let p = serialize(&board(shots), &QuantizerConfig::default(), &SerializerConfig::default())
            .unwrap();
        assert_eq!(p.text.matches("{'fork'").count(), 10);
    }

    #[test]
    fn budget_drops_tail_shots() {
        let mut shots: Vec<Shot> = (0..4).map(|_| fork_shot()).collect();
        for s in &mut shots {
            s.characters.push(whole_body_char(0, "he"));
        }
        let cfg = SerializerConfig {
            max_tokens: 500,
            ..Default::default()
        };
        let p = serialize(&board(shots.clone()), &QuantizerConfig::default(), &cfg).unwrap();
        assert!(p.token_count() <= 500);
        assert_eq!(p.text.matches("'he'").count(), 2);

        let tiny = SerializerConfig {
            max_tokens: 100,
            ..Default::default()
        };
        assert!(matches!(
            serialize(&board(shots), &QuantizerConfig::default(), &tiny),
            Err(SerializeError::OverBudget { .. })
        ));
    }

    #[test]
    fn mention_collisions_get_suffixes() {
        let mut shot = fork_shot();
        for id in 0..3 {
            shot.characters.push(
                CharacterAnnotation::new(
                    id,
                    "he",
                    BoundingBox::new(10.0 * id as f64, 0.0, 10.0 * id as f64 + 5.0, 5.0),
                    None,
                )
                .unwrap(),
            );
        }
        let p = serialize(&board(vec![shot]), &QuantizerConfig::default(), &SerializerConfig::default())
            .unwrap();
        assert!(p.text.contains("{'he': ["));
        assert!(p.text.contains("{'he#1': ["));
        assert!(p.text.contains("{'he#2': ["));
    }

    #[test]
    fn invalid_board_rejected() {
        let mut b = board(vec![fork_shot()]);
        b.shots[0].film_sets[0].bbox.x_max = 10.0;
        assert!(matches!(
            serialize(&b, &QuantizerConfig::default(), &SerializerConfig::default()),
            Err(SerializeError::Invalid(_))
        ));
    }

    #[test]
    fn instruction_pair_layout() {
        let target = PromptSequence::new("<start>{'synopses': 'x', 'objects': [[]], 'main characters': [[]]}<end>");
        let pair = PromptSequence::with_instruction("Could you please develop a movie storyboard?", &target);
        assert!(pair.text.starts_with("<start>Could you"));
        assert!(pair.text.contains("? <sep>{'synopses'"));
    }
}
