//! On-disk storyboard record, one JSON document per storyboard.
//!
//! ```json
//! {"id": "b0",
//!  "synopsis": {"kind": "condensed", "texts": ["..."]},
//!  "summative": {"title": "", "genre": "", "emotion": "", "scene": "", "summary": ""},
//!  "shots": [{"width": 1024, "height": 576, "description": "...",
//!             "characters": [{"id": 0, "mention": "he", "bbox": [x0, y0, x1, y1],
//!                             "keypoints": {"layout": "whole_body_133",
//!                                           "points": [[x, y, v], ...]}}],
//!             "film_sets": [{"category": "fork", "bbox": [x0, y0, x1, y1]}]}]}
//! ```
//!
//! `v > 0` marks a visible point. `summative`, `description` and `keypoints`
//! are optional. The JSON schema ships as `data/storyboard.schema.json`.

use serde::{Deserialize, Serialize};

use crate::types::{
    BoundingBox, CharacterAnnotation, FilmSetAnnotation, Keypoint, KeypointLayout, KeypointSet,
    Provenance, RepresentationTier, Shot, Storyboard, SummativeAnnotation, Synopsis, SynopsisKind,
};

pub const SCHEMA: &str = include_str!("../../data/storyboard.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynopsisKindRecord {
    Condensed,
    ShotByShot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutRecord {
    WholeBody133,
    Sampled93,
    Sparse17,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynopsisRecord {
    pub kind: SynopsisKindRecord,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointsRecord {
    pub layout: LayoutRecord,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterRecord {
    pub id: u32,
    pub mention: String,
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<KeypointsRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilmSetRecord {
    pub category: String,
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotRecord {
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub characters: Vec<CharacterRecord>,
    #[serde(default)]
    pub film_sets: Vec<FilmSetRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoryboardRecord {
    pub id: String,
    pub synopsis: SynopsisRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summative: Option<SummativeAnnotation>,
    #[serde(default, skip_serializing_if = "is_annotated")]
    pub provenance: Provenance,
    pub shots: Vec<ShotRecord>,
}

fn is_annotated(p: &Provenance) -> bool {
    *p == Provenance::Annotated
}

fn bbox(b: [f64; 4]) -> BoundingBox {
    BoundingBox::new(b[0], b[1], b[2], b[3])
}

fn bbox_record(b: &BoundingBox) -> [f64; 4] {
    [b.x_min, b.y_min, b.x_max, b.y_max]
}

impl StoryboardRecord {
    /// Converts to the domain type. Errors are schema-level problems;
    /// semantic checks are left to `validate`.
    pub fn into_storyboard(self) -> Result<Storyboard, String> {
        if self.shots.is_empty() {
            return Err(format!("storyboard {:?}: shots must be non-empty", self.id));
        }
        let mut shots = Vec::with_capacity(self.shots.len());
        for (si, s) in self.shots.into_iter().enumerate() {
            let mut characters = Vec::with_capacity(s.characters.len());
            for (ci, c) in s.characters.into_iter().enumerate() {
                let here = format!("shots[{si}].characters[{ci}]");
                let keypoints = match c.keypoints {
                    None => None,
                    Some(k) => {
                        let layout = match k.layout {
                            LayoutRecord::WholeBody133 => KeypointLayout::WholeBody133,
                            LayoutRecord::Sampled93 => KeypointLayout::Sampled93,
                            LayoutRecord::Sparse17 => KeypointLayout::Sparse17,
                        };
                        let pts = k
                            .points
                            .iter()
                            .map(|p| Keypoint {
                                x: p[0],
                                y: p[1],
                                visible: p[2] > 0.0,
                            })
                            .collect();
                        Some(KeypointSet::new(layout, pts).map_err(|e| format!("{here}.keypoints: {e}"))?)
                    }
                };
                let character = match self.provenance {
                    Provenance::Annotated => CharacterAnnotation::new(c.id, c.mention, bbox(c.bbox), keypoints)
                        .map_err(|e| format!("{here}.bbox: {e}"))?,
                    Provenance::Decoded => CharacterAnnotation {
                        character_id: c.id,
                        mention: c.mention,
                        bbox: bbox(c.bbox),
                        tier: match keypoints.as_ref().map(|k| k.layout()) {
                            None => RepresentationTier::BoxOnly,
                            Some(KeypointLayout::Sparse17) => RepresentationTier::Sparse17,
                            Some(_) => RepresentationTier::WholeBody93,
                        },
                        keypoints,
                    },
                };
                characters.push(character);
            }
            shots.push(Shot {
                frame_width: s.width,
                frame_height: s.height,
                characters,
                film_sets: s
                    .film_sets
                    .into_iter()
                    .map(|f| FilmSetAnnotation {
                        category: f.category,
                        bbox: bbox(f.bbox),
                    })
                    .collect(),
                description: s.description,
            });
        }
        Ok(Storyboard {
            id: self.id,
            shots,
            synopsis: Synopsis {
                kind: match self.synopsis.kind {
                    SynopsisKindRecord::Condensed => SynopsisKind::Condensed,
                    SynopsisKindRecord::ShotByShot => SynopsisKind::ShotByShot,
                },
                texts: self.synopsis.texts,
            },
            summative: self.summative,
            provenance: self.provenance,
        })
    }

    pub fn from_storyboard(sb: &Storyboard) -> Self {
        Self {
            id: sb.id.clone(),
            synopsis: SynopsisRecord {
                kind: match sb.synopsis.kind {
                    SynopsisKind::Condensed => SynopsisKindRecord::Condensed,
                    SynopsisKind::ShotByShot => SynopsisKindRecord::ShotByShot,
                },
                texts: sb.synopsis.texts.clone(),
            },
            summative: sb.summative.clone(),
            provenance: sb.provenance,
            shots: sb
                .shots
                .iter()
                .map(|s| ShotRecord {
                    width: s.frame_width,
                    height: s.frame_height,
                    description: s.description.clone(),
                    characters: s
                        .characters
                        .iter()
                        .map(|c| CharacterRecord {
                            id: c.character_id,
                            mention: c.mention.clone(),
                            bbox: bbox_record(&c.bbox),
                            keypoints: c.keypoints.as_ref().map(|k| KeypointsRecord {
                                layout: match k.layout() {
                                    KeypointLayout::WholeBody133 => LayoutRecord::WholeBody133,
                                    KeypointLayout::Sampled93 => LayoutRecord::Sampled93,
                                    KeypointLayout::Sparse17 => LayoutRecord::Sparse17,
                                },
                                points: k
                                    .points()
                                    .iter()
                                    .map(|p| [p.x, p.y, if p.visible { 2.0 } else { 0.0 }])
                                    .collect(),
                            }),
                        })
                        .collect(),
                    film_sets: s
                        .film_sets
                        .iter()
                        .map(|f| FilmSetRecord {
                            category: f.category.clone(),
                            bbox: bbox_record(&f.bbox),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}
