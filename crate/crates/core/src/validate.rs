//! Invariant checks over storyboards. Violations are reported as data.

use std::collections::HashMap;
use std::fmt;

use crate::types::{
    area, tier_of_area, BoundingBox, CharacterAnnotation, KeypointLayout, Provenance,
    RepresentationTier, Storyboard, SynopsisKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    NoShots,
    SynopsisArity,
    FrameExtent,
    InvalidBox,
    KeypointOutOfFrame,
    KeypointLayout,
    TierMismatch,
    KeypointPresence,
    EmptyMention,
    ReservedCharacter,
    IdConsistency,
    DuplicateCharacter,
    EmptyCategory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Path to the offending field, e.g. `shots[1].characters[0].bbox`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    fn push(&mut self, kind: ViolationKind, path: String, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            path,
            message: message.into(),
        });
    }
}

pub fn validate(sb: &Storyboard) -> ValidationReport {
    let mut report = ValidationReport::default();

    if sb.shots.is_empty() {
        report.push(ViolationKind::NoShots, "shots".into(), "storyboard has no shots");
    }
    match sb.synopsis.kind {
        SynopsisKind::Condensed if sb.synopsis.texts.len() != 1 => report.push(
            ViolationKind::SynopsisArity,
            "synopsis.texts".into(),
            format!("condensed synopsis needs 1 text, has {}", sb.synopsis.texts.len()),
        ),
        SynopsisKind::ShotByShot if sb.synopsis.texts.len() != sb.shots.len() => report.push(
            ViolationKind::SynopsisArity,
            "synopsis.texts".into(),
            format!(
                "shot-by-shot synopsis has {} texts for {} shots",
                sb.synopsis.texts.len(),
                sb.shots.len()
            ),
        ),
        _ => {}
    }

    // character_id -> (mention, first path)
    let mut cast: HashMap<u32, (&str, String)> = HashMap::new();

    for (si, shot) in sb.shots.iter().enumerate() {
        let w = shot.frame_width;
        let h = shot.frame_height;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            report.push(
                ViolationKind::FrameExtent,
                format!("shots[{si}]"),
                format!("frame extent {w}x{h} must be positive"),
            );
            continue;
        }

        let mut seen_in_shot: Vec<u32> = Vec::new();
        for (ci, ch) in shot.characters.iter().enumerate() {
            let path = format!("shots[{si}].characters[{ci}]");
            check_box(&mut report, &ch.bbox, w, h, &path);
            check_character(&mut report, ch, w, h, &path, sb.provenance);

            if seen_in_shot.contains(&ch.character_id) {
                report.push(
                    ViolationKind::DuplicateCharacter,
                    format!("{path}.character_id"),
                    format!("character {} appears twice in one shot", ch.character_id),
                );
            }
            seen_in_shot.push(ch.character_id);

            match cast.get(&ch.character_id) {
                Some((mention, first)) if *mention != ch.mention => report.push(
                    ViolationKind::IdConsistency,
                    format!("{path}.mention"),
                    format!(
                        "character {} is '{}' here but '{}' at {}",
                        ch.character_id, ch.mention, mention, first
                    ),
                ),
                Some(_) => {}
                None => {
                    cast.insert(ch.character_id, (&ch.mention, path.clone()));
                }
            }
        }

        for (fi, fs) in shot.film_sets.iter().enumerate() {
            let path = format!("shots[{si}].film_sets[{fi}]");
            check_box(&mut report, &fs.bbox, w, h, &path);
            if fs.category.trim().is_empty() {
                report.push(
                    ViolationKind::EmptyCategory,
                    format!("{path}.category"),
                    "film-set category is empty",
                );
            }
        }
    }

    report
}

fn check_box(report: &mut ValidationReport, b: &BoundingBox, w: f64, h: f64, path: &str) {
    if !b.is_valid_in(w, h) {
        report.push(
            ViolationKind::InvalidBox,
            format!("{path}.bbox"),
            format!(
                "box [{} {} {} {}] is degenerate or outside {w}x{h}",
                b.x_min, b.y_min, b.x_max, b.y_max
            ),
        );
    }
}

fn check_character(
    report: &mut ValidationReport,
    ch: &CharacterAnnotation,
    w: f64,
    h: f64,
    path: &str,
    provenance: Provenance,
) {
    if ch.mention.trim().is_empty() {
        report.push(ViolationKind::EmptyMention, format!("{path}.mention"), "mention is empty");
    } else if ch.mention.contains('#') {
        report.push(
            ViolationKind::ReservedCharacter,
            format!("{path}.mention"),
            "'#' is reserved for mention disambiguation",
        );
    }

    let expected = match provenance {
        Provenance::Annotated => tier_of_area(area(&ch.bbox)).ok(),
        Provenance::Decoded => Some(match ch.keypoints.as_ref().map(|k| k.layout()) {
            Some(KeypointLayout::Sparse17) => RepresentationTier::Sparse17,
            Some(_) => RepresentationTier::WholeBody93,
            None => RepresentationTier::BoxOnly,
        }),
    };
    if let Some(t) = expected {
        if t != ch.tier {
            report.push(
                ViolationKind::TierMismatch,
                format!("{path}.tier"),
                format!("tier {:?} but area/arity implies {:?}", ch.tier, t),
            );
        }
    }

    match (&ch.keypoints, ch.tier.has_keypoints()) {
        (None, true) => report.push(
            ViolationKind::KeypointPresence,
            format!("{path}.keypoints"),
            format!("tier {:?} requires keypoints", ch.tier),
        ),
        (Some(_), false) => report.push(
            ViolationKind::KeypointPresence,
            format!("{path}.keypoints"),
            "box-only character carries keypoints",
        ),
        _ => {}
    }

    if let Some(kps) = &ch.keypoints {
        let usable = kps.layout() == KeypointLayout::WholeBody133
            || Some(kps.layout()) == ch.tier.emitted_layout();
        if !usable {
            report.push(
                ViolationKind::KeypointLayout,
                format!("{path}.keypoints.layout"),
                format!("layout {:?} cannot be emitted for tier {:?}", kps.layout(), ch.tier),
            );
        }
        for (ki, p) in kps.points().iter().enumerate() {
            if p.visible
                && !(p.x.is_finite()
                    && p.y.is_finite()
                    && (0.0..=w).contains(&p.x)
                    && (0.0..=h).contains(&p.y))
            {
                report.push(
                    ViolationKind::KeypointOutOfFrame,
                    format!("{path}.keypoints.points[{ki}]"),
                    format!("visible keypoint ({}, {}) outside {w}x{h}", p.x, p.y),
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::*;

    fn board() -> Storyboard {
        let mut s1 = Shot::empty(640.0, 360.0);
        s1.characters.push(
            CharacterAnnotation::new(3, "he", BoundingBox::new(10.0, 10.0, 20.0, 30.0), None)
                .unwrap(),
        );
        s1.film_sets.push(FilmSetAnnotation {
            category: "fork".into(),
            bbox: BoundingBox::new(100.0, 100.0, 120.0, 110.0),
        });
        let mut s2 = Shot::empty(640.0, 360.0);
        s2.characters.push(
            CharacterAnnotation::new(3, "he", BoundingBox::new(30.0, 10.0, 40.0, 30.0), None)
                .unwrap(),
        );
        Storyboard {
            id: "b0".into(),
            shots: vec![s1, s2],
            synopsis: Synopsis::condensed("he eats"),
            summative: None,
            provenance: Provenance::Annotated,
        }
    }

    #[test]
    fn well_formed_is_empty() {
        assert!(validate(&board()).is_valid());
    }

    #[test]
    fn inverted_box_is_named() {
        let mut b = board();
        b.shots[0].film_sets[0].bbox = BoundingBox::new(130.0, 100.0, 120.0, 110.0);
        let r = validate(&b);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::InvalidBox);
        assert_eq!(r.violations[0].path, "shots[0].film_sets[0].bbox");
    }

    #[test]
    fn id_relabel_is_flagged() {
        let mut b = board();
        b.shots[1].characters[0].mention = "Edward".into();
        let r = validate(&b);
        assert_eq!(r.count(ViolationKind::IdConsistency), 1);
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn shot_by_shot_arity() {
        let mut b = board();
        b.synopsis = Synopsis::shot_by_shot(["one"]);
        assert_eq!(validate(&b).count(ViolationKind::SynopsisArity), 1);
        b.synopsis = Synopsis::shot_by_shot(["one", "two"]);
        assert!(validate(&b).is_valid());
    }

    #[test]
    fn missing_keypoints_for_rich_tier() {
        let mut b = board();
        b.shots[0].characters[0] =
            CharacterAnnotation::new(3, "he", BoundingBox::new(0.0, 0.0, 200.0, 200.0), None)
                .unwrap();
        assert_eq!(validate(&b).count(ViolationKind::KeypointPresence), 1);
    }

    #[test]
    fn no_shots() {
        let mut b = board();
        b.shots.clear();
        assert_eq!(validate(&b).count(ViolationKind::NoShots), 1);
    }
}
