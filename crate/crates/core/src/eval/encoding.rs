//! Fixed-size storyboard layout encoding.
//!
//! | range   | feature                                                        |
//! |---------|----------------------------------------------------------------|
//! | 0..32   | film-set category histogram, category hashed into 32 buckets   |
//! | 32..35  | character count per tier (box-only, sparse 17, whole body 93)  |
//! | 35..37  | character count, film-set count                                |
//! | 37..42  | characters: sums of centre x, centre y, width, height, area    |
//! | 42..47  | film sets: same sums                                           |
//! | 47..63  | 4 × 4 grid of box centres (all boxes)                          |
//! | 63      | visible keypoint count                                         |
//!
//! Geometry is normalized by the frame size. Every feature is a sum over
//! boxes, so box order does not matter and repeating boxes scales counts.

use sha2::{Digest, Sha256};

use crate::types::{BoundingBox, RepresentationTier, Shot, Storyboard};

pub const CATEGORY_BUCKETS: usize = 32;
pub const GRID: usize = 4;
pub const ENCODING_DIM: usize = CATEGORY_BUCKETS + 3 + 2 + 5 + 5 + GRID * GRID + 1;

const TIERS_AT: usize = CATEGORY_BUCKETS;
const COUNTS_AT: usize = TIERS_AT + 3;
const CHAR_GEOM_AT: usize = COUNTS_AT + 2;
const SET_GEOM_AT: usize = CHAR_GEOM_AT + 5;
const GRID_AT: usize = SET_GEOM_AT + 5;
const KEYPOINTS_AT: usize = GRID_AT + GRID * GRID;

/// Bucket of a film-set category (case-insensitive, trimmed).
pub fn category_bucket(category: &str) -> usize {
    let h = Sha256::digest(category.trim().to_lowercase().as_bytes());
    u32::from_le_bytes([h[0], h[1], h[2], h[3]]) as usize % CATEGORY_BUCKETS
}

fn add_box(v: &mut [f64], at: usize, b: &BoundingBox, fw: f64, fh: f64) {
    let cx = (b.x_min + b.x_max) / 2.0 / fw;
    let cy = (b.y_min + b.y_max) / 2.0 / fh;
    let w = b.width() / fw;
    let h = b.height() / fh;
    v[at] += cx;
    v[at + 1] += cy;
    v[at + 2] += w;
    v[at + 3] += h;
    v[at + 4] += w * h;
    let gx = ((cx * GRID as f64) as usize).min(GRID - 1);
    let gy = ((cy * GRID as f64) as usize).min(GRID - 1);
    v[GRID_AT + gy * GRID + gx] += 1.0;
}

fn add_shot(v: &mut [f64], shot: &Shot) {
    let (fw, fh) = (shot.frame_width, shot.frame_height);
    for c in &shot.characters {
        let t = match c.tier {
            RepresentationTier::BoxOnly => 0,
            RepresentationTier::Sparse17 => 1,
            RepresentationTier::WholeBody93 => 2,
        };
        v[TIERS_AT + t] += 1.0;
        v[COUNTS_AT] += 1.0;
        add_box(v, CHAR_GEOM_AT, &c.bbox, fw, fh);
        if let Some(k) = &c.keypoints {
            v[KEYPOINTS_AT] += k.visible_count() as f64;
        }
    }
    for f in &shot.film_sets {
        v[category_bucket(&f.category)] += 1.0;
        v[COUNTS_AT + 1] += 1.0;
        add_box(v, SET_GEOM_AT, &f.bbox, fw, fh);
    }
}

/// Encoding of a whole storyboard (sum over its shots).
pub fn layout_encoding(sb: &Storyboard) -> Vec<f64> {
    let mut v = vec![0.0; ENCODING_DIM];
    for shot in &sb.shots {
        add_shot(&mut v, shot);
    }
    v
}

/// Encoding of a single shot.
pub fn shot_encoding(shot: &Shot) -> Vec<f64> {
    let mut v = vec![0.0; ENCODING_DIM];
    add_shot(&mut v, shot);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{CharacterAnnotation, FilmSetAnnotation, Provenance, Synopsis};

    fn board() -> Storyboard {
        let mut shot = Shot::empty(512.0, 512.0);
        shot.characters.push(CharacterAnnotation::new(
            0,
            "he",
            BoundingBox::new(10.0, 10.0, 30.0, 40.0),
            None,
        )
        .unwrap());
        shot.film_sets.push(FilmSetAnnotation {
            category: "fork".into(),
            bbox: BoundingBox::new(300.0, 400.0, 350.0, 500.0),
        });
        shot.film_sets.push(FilmSetAnnotation {
            category: "table".into(),
            bbox: BoundingBox::new(0.0, 0.0, 512.0, 512.0),
        });
        Storyboard {
            id: "b".into(),
            shots: vec![shot],
            synopsis: Synopsis::condensed("x"),
            summative: None,
            provenance: Provenance::Annotated,
        }
    }

    #[test]
    fn empty_board_is_zero() {
        let mut sb = board();
        sb.shots.clear();
        assert!(layout_encoding(&sb).iter().all(|&v| v == 0.0));
        assert_eq!(ENCODING_DIM, 64);
    }

    #[test]
    fn permutation_invariant_and_linear() {
        let sb = board();
        let base = layout_encoding(&sb);
        let mut perm = sb.clone();
        perm.shots[0].film_sets.reverse();
        assert_eq!(layout_encoding(&perm), base);
        let mut dup = sb.clone();
        let s = &mut dup.shots[0];
        s.characters = [s.characters.clone(), s.characters.clone()].concat();
        s.film_sets = [s.film_sets.clone(), s.film_sets.clone()].concat();
        let doubled = layout_encoding(&dup);
        for (a, b) in doubled.iter().zip(&base) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
        assert_eq!(base[COUNTS_AT], 1.0);
        assert_eq!(base[COUNTS_AT + 1], 2.0);
        assert_eq!(base[category_bucket("Fork ")], base[category_bucket("fork")]);
    }
}
