//! Storyboard domain model: shots, characters, film sets and synopses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower edge of the sparse-keypoint tier, in source pixels squared (32²).
pub const SPARSE_MIN_AREA: f64 = 1024.0;
/// Upper edge of the sparse-keypoint tier, in source pixels squared (96²).
pub const SPARSE_MAX_AREA: f64 = 9216.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("area must be strictly positive, got {0}")]
    NonPositiveArea(f64),
    #[error("keypoint set has {got} points, layout {layout:?} needs {expected}")]
    KeypointCount {
        layout: KeypointLayout,
        expected: usize,
        got: usize,
    },
}

/// Axis-aligned box in the owning shot's pixel frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// True when the box is non-degenerate and lies inside `[0, w] × [0, h]`.
    pub fn is_valid_in(&self, width: f64, height: f64) -> bool {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        finite
            && self.x_min < self.x_max
            && self.y_min < self.y_max
            && self.x_min >= 0.0
            && self.y_min >= 0.0
            && self.x_max <= width
            && self.y_max <= height
    }
}

pub fn area(bbox: &BoundingBox) -> f64 {
    bbox.width() * bbox.height()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

impl Keypoint {
    pub fn visible(x: f64, y: f64) -> Self {
        Self { x, y, visible: true }
    }

    pub fn hidden() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            visible: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeypointLayout {
    WholeBody133,
    Sampled93,
    Sparse17,
}

impl KeypointLayout {
    pub fn len(self) -> usize {
        match self {
            KeypointLayout::WholeBody133 => 133,
            KeypointLayout::Sampled93 => 93,
            KeypointLayout::Sparse17 => 17,
        }
    }

    pub fn from_len(n: usize) -> Option<Self> {
        match n {
            133 => Some(KeypointLayout::WholeBody133),
            93 => Some(KeypointLayout::Sampled93),
            17 => Some(KeypointLayout::Sparse17),
            _ => None,
        }
    }
}

/// Ordered keypoints in one of the supported layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    layout: KeypointLayout,
    points: Vec<Keypoint>,
}

impl KeypointSet {
    pub fn new(layout: KeypointLayout, points: Vec<Keypoint>) -> Result<Self, DomainError> {
        if points.len() != layout.len() {
            return Err(DomainError::KeypointCount {
                layout,
                expected: layout.len(),
                got: points.len(),
            });
        }
        Ok(Self { layout, points })
    }

    pub fn layout(&self) -> KeypointLayout {
        self.layout
    }

    pub fn points(&self) -> &[Keypoint] {
        &self.points
    }

    pub fn visible_count(&self) -> usize {
        self.points.iter().filter(|p| p.visible).count()
    }
}

/// How a character is written into the prompt. Ordered by richness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RepresentationTier {
    BoxOnly,
    Sparse17,
    WholeBody93,
}

impl RepresentationTier {
    /// Number of integer words this tier occupies in a prompt.
    pub fn word_count(self) -> usize {
        match self {
            RepresentationTier::BoxOnly => 4,
            RepresentationTier::Sparse17 => 34,
            RepresentationTier::WholeBody93 => 186,
        }
    }

    pub fn from_word_count(n: usize) -> Option<Self> {
        match n {
            4 => Some(RepresentationTier::BoxOnly),
            34 => Some(RepresentationTier::Sparse17),
            186 => Some(RepresentationTier::WholeBody93),
            _ => None,
        }
    }

    pub fn has_keypoints(self) -> bool {
        self != RepresentationTier::BoxOnly
    }

    /// Keypoint layout a tier is emitted in, if any.
    pub fn emitted_layout(self) -> Option<KeypointLayout> {
        match self {
            RepresentationTier::BoxOnly => None,
            RepresentationTier::Sparse17 => Some(KeypointLayout::Sparse17),
            RepresentationTier::WholeBody93 => Some(KeypointLayout::Sampled93),
        }
    }
}

/// Tier for a character box of area `a` (source pixels squared).
///
/// Both 32² and 96² fall in the sparse tier.
pub fn tier_of_area(a: f64) -> Result<RepresentationTier, DomainError> {
    if !(a > 0.0) {
        return Err(DomainError::NonPositiveArea(a));
    }
    Ok(if a > SPARSE_MAX_AREA {
        RepresentationTier::WholeBody93
    } else if a >= SPARSE_MIN_AREA {
        RepresentationTier::Sparse17
    } else {
        RepresentationTier::BoxOnly
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterAnnotation {
    pub character_id: u32,
    pub mention: String,
    pub bbox: BoundingBox,
    pub keypoints: Option<KeypointSet>,
    pub tier: RepresentationTier,
}

impl CharacterAnnotation {
    /// Builds an annotation whose tier follows the box area. Keypoints are
    /// dropped for box-only characters.
    pub fn new(
        character_id: u32,
        mention: impl Into<String>,
        bbox: BoundingBox,
        keypoints: Option<KeypointSet>,
    ) -> Result<Self, DomainError> {
        let tier = tier_of_area(area(&bbox))?;
        let keypoints = if tier.has_keypoints() { keypoints } else { None };
        Ok(Self {
            character_id,
            mention: mention.into(),
            bbox,
            keypoints,
            tier,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilmSetAnnotation {
    pub category: String,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub frame_width: f64,
    pub frame_height: f64,
    pub characters: Vec<CharacterAnnotation>,
    pub film_sets: Vec<FilmSetAnnotation>,
    pub description: Option<String>,
}

impl Shot {
    pub fn empty(frame_width: f64, frame_height: f64) -> Self {
        Self {
            frame_width,
            frame_height,
            characters: Vec::new(),
            film_sets: Vec::new(),
            description: None,
        }
    }

    pub fn box_count(&self) -> usize {
        self.characters.len() + self.film_sets.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SynopsisKind {
    Condensed,
    ShotByShot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synopsis {
    pub kind: SynopsisKind,
    pub texts: Vec<String>,
}

impl Synopsis {
    pub fn condensed(text: impl Into<String>) -> Self {
        Self {
            kind: SynopsisKind::Condensed,
            texts: vec![text.into()],
        }
    }

    pub fn shot_by_shot<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self {
            kind: SynopsisKind::ShotByShot,
            texts: texts.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummativeAnnotation {
    pub title: String,
    pub genre: String,
    pub emotion: String,
    pub scene: String,
    pub summary: String,
}

/// Where a storyboard came from. Decoded layouts live on the square canvas
/// and take their tier from the keypoint arity rather than the box area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Annotated,
    Decoded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Storyboard {
    pub id: String,
    pub shots: Vec<Shot>,
    pub synopsis: Synopsis,
    pub summative: Option<SummativeAnnotation>,
    pub provenance: Provenance,
}

impl Storyboard {
    pub fn has_keypoints(&self) -> bool {
        self.shots
            .iter()
            .flat_map(|s| &s.characters)
            .any(|c| c.tier.has_keypoints())
    }
}
