//! Seeded generator of schema-compatible storyboards with templated synopses.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pose::PoseTemplate;
use crate::types::{
    BoundingBox, CharacterAnnotation, FilmSetAnnotation, Keypoint, KeypointLayout, KeypointSet,
    Provenance, RepresentationTier, Shot, Storyboard, SummativeAnnotation, Synopsis,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub count: usize,
    pub frame_width: f64,
    pub frame_height: f64,
    pub names: Vec<String>,
    pub pronouns: Vec<String>,
    /// Probability that a cast member is referred to by a pronoun.
    pub pronoun_rate: f64,
    pub categories: Vec<String>,
    pub scenes: Vec<String>,
    pub genres: Vec<String>,
    pub emotions: Vec<String>,
    pub verbs: Vec<String>,
    /// Weight of 1, 2, ... shots for boards with keypoints.
    pub keypoint_shot_weights: Vec<f64>,
    /// Weight of 1, 2, ... shots for box-only boards.
    pub box_only_shot_weights: Vec<f64>,
    /// Probability that a board carries keypoint characters.
    pub keypoint_rate: f64,
    /// Tier weights (box only, sparse 17, whole body) on keypoint boards.
    pub tier_weights: [f64; 3],
    pub max_cast: usize,
    pub max_characters_per_shot: usize,
    pub max_film_sets_per_shot: usize,
    pub hidden_rate: f64,
    pub shot_by_shot_rate: f64,
    pub poses: Vec<PoseTemplate>,
    pub pose_jitter: f64,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 100,
            frame_width: 1024.0,
            frame_height: 576.0,
            names: strings(&["Tom", "Anna", "Mark", "Lucy", "Jack", "Emma", "Sam", "Nora"]),
            pronouns: strings(&["he", "she"]),
            pronoun_rate: 0.3,
            categories: strings(&[
                "table", "chair", "door", "window", "car", "fork", "cup", "lamp", "bed", "book",
            ]),
            scenes: strings(&["room", "kitchen", "street", "office", "park", "garden", "bar"]),
            genres: strings(&["action", "drama", "comedy", "romance", "thriller"]),
            emotions: strings(&["happy", "tense", "sad", "calm", "angry"]),
            verbs: strings(&[
                "walks toward",
                "looks at",
                "points at",
                "sits near",
                "reaches for",
                "stands beside",
            ]),
            keypoint_shot_weights: vec![1.0; 6],
            box_only_shot_weights: vec![1.0; 12],
            keypoint_rate: 0.6,
            tier_weights: [0.4, 0.3, 0.3],
            max_cast: 3,
            max_characters_per_shot: 2,
            max_film_sets_per_shot: 2,
            hidden_rate: 0.1,
            shot_by_shot_rate: 0.5,
            poses: PoseTemplate::ALL.to_vec(),
            pose_jitter: 0.01,
        }
    }
}

impl SyntheticConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.count == 0 {
            return Err("count must be positive".into());
        }
        if self.names.is_empty() || self.categories.is_empty() || self.scenes.is_empty() || self.verbs.is_empty() {
            return Err("names, categories, scenes and verbs must be non-empty".into());
        }
        if self.genres.is_empty() || self.emotions.is_empty() {
            return Err("genres and emotions must be non-empty".into());
        }
        if self.max_cast == 0 || self.max_characters_per_shot == 0 {
            return Err("max_cast and max_characters_per_shot must be positive".into());
        }
        if self.poses.is_empty() {
            return Err("at least one pose template is required".into());
        }
        let bad = |w: &[f64]| w.is_empty() || w.iter().any(|&x| !(x >= 0.0)) || w.iter().sum::<f64>() <= 0.0;
        if bad(&self.keypoint_shot_weights) || bad(&self.box_only_shot_weights) || bad(&self.tier_weights) {
            return Err("weights must be non-negative with a positive sum".into());
        }
        for (name, p) in [
            ("pronoun_rate", self.pronoun_rate),
            ("keypoint_rate", self.keypoint_rate),
            ("hidden_rate", self.hidden_rate),
            ("shot_by_shot_rate", self.shot_by_shot_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.frame_width < 64.0 || self.frame_height < 64.0 {
            return Err("frame must be at least 64 × 64".into());
        }
        let texts = self.names.iter().chain(&self.pronouns).chain(&self.categories);
        if texts.clone().any(|s| s.trim().is_empty() || s.contains('#')) {
            return Err("names, pronouns and categories must be non-empty and free of '#'".into());
        }
        Ok(())
    }
}

struct Gen<'a> {
    cfg: &'a SyntheticConfig,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    fn pick<'b>(&mut self, v: &'b [String]) -> &'b str {
        v.choose(&mut self.rng).expect("non-empty")
    }

    fn place(&mut self, w: f64, h: f64) -> BoundingBox {
        let (fw, fh) = (self.cfg.frame_width, self.cfg.frame_height);
        let w = w.min(fw);
        let h = h.min(fh);
        let x = self.rng.gen_range(0.0..=(fw - w));
        let y = self.rng.gen_range(0.0..=(fh - h));
        BoundingBox::new(x, y, x + w, y + h)
    }

    fn person_box(&mut self, tier: RepresentationTier) -> BoundingBox {
        let (fw, fh) = (self.cfg.frame_width, self.cfg.frame_height);
        match tier {
            RepresentationTier::BoxOnly => {
                let w = self.rng.gen_range(10.0..30.0);
                let h = self.rng.gen_range(10.0..(1000.0f64 / w).min(40.0));
                self.place(w, h)
            }
            RepresentationTier::Sparse17 => {
                let a = self.rng.gen_range(1200.0..9000.0);
                let r: f64 = self.rng.gen_range(1.2..2.5);
                let w = (a / r).sqrt();
                self.place(w, a / w)
            }
            RepresentationTier::WholeBody93 => {
                let a = self.rng.gen_range(12_000.0..(fw * fh * 0.25).max(12_001.0));
                let r: f64 = self.rng.gen_range(1.2..2.5);
                let h = (a * r).sqrt().min(fh * 0.95);
                let w = (a / h).min(fw * 0.9).max(9300.0 / h);
                self.place(w, h)
            }
        }
    }

    fn keypoints(&mut self, bbox: &BoundingBox) -> KeypointSet {
        let pose = *self.cfg.poses.choose(&mut self.rng).expect("non-empty");
        let unit = pose.sample(self.cfg.pose_jitter, &mut self.rng);
        let pts = unit
            .into_iter()
            .map(|(u, v)| {
                if self.rng.gen_bool(self.cfg.hidden_rate) {
                    Keypoint::hidden()
                } else {
                    Keypoint::visible(bbox.x_min + u * bbox.width(), bbox.y_min + v * bbox.height())
                }
            })
            .collect();
        KeypointSet::new(KeypointLayout::WholeBody133, pts).expect("133 points")
    }

    fn film_set(&mut self) -> FilmSetAnnotation {
        let (fw, fh) = (self.cfg.frame_width, self.cfg.frame_height);
        let w = self.rng.gen_range(8.0..fw * 0.5);
        let h = self.rng.gen_range(8.0..fh * 0.5);
        FilmSetAnnotation {
            category: self.pick(&self.cfg.categories).to_string(),
            bbox: self.place(w, h),
        }
    }

    fn board(&mut self, index: usize) -> Storyboard {
        let cfg = self.cfg;
        let with_keypoints = self.rng.gen_bool(cfg.keypoint_rate);
        let weights = if with_keypoints {
            &cfg.keypoint_shot_weights
        } else {
            &cfg.box_only_shot_weights
        };
        let n_shots = WeightedIndex::new(weights).expect("checked weights").sample(&mut self.rng) + 1;

        let cast_size = self.rng.gen_range(1..=cfg.max_cast.min(cfg.names.len()));
        let mut names = cfg.names.clone();
        names.shuffle(&mut self.rng);
        let cast: Vec<String> = names
            .into_iter()
            .take(cast_size)
            .map(|n| {
                if !cfg.pronouns.is_empty() && self.rng.gen_bool(cfg.pronoun_rate) {
                    self.pick(&cfg.pronouns).to_string()
                } else {
                    n
                }
            })
            .collect();
        let tiers = WeightedIndex::new(cfg.tier_weights).expect("checked weights");
        let scene = self.pick(&cfg.scenes).to_string();

        let mut shots = Vec::with_capacity(n_shots);
        let mut lines = Vec::with_capacity(n_shots);
        for _ in 0..n_shots {
            let mut shot = Shot::empty(cfg.frame_width, cfg.frame_height);
            let k = self.rng.gen_range(1..=cfg.max_characters_per_shot.min(cast_size));
            let mut ids: Vec<u32> = (0..cast_size as u32).collect();
            ids.shuffle(&mut self.rng);
            ids.truncate(k);
            ids.sort_unstable();
            for id in ids {
                let tier = if with_keypoints {
                    [
                        RepresentationTier::BoxOnly,
                        RepresentationTier::Sparse17,
                        RepresentationTier::WholeBody93,
                    ][tiers.sample(&mut self.rng)]
                } else {
                    RepresentationTier::BoxOnly
                };
                let bbox = self.person_box(tier);
                let kps = tier.has_keypoints().then(|| self.keypoints(&bbox));
                let ch = CharacterAnnotation::new(id, cast[id as usize].clone(), bbox, kps)
                    .expect("positive area");
                debug_assert_eq!(ch.tier, tier);
                shot.characters.push(ch);
            }
            let n_sets = self.rng.gen_range(0..=cfg.max_film_sets_per_shot);
            for _ in 0..n_sets {
                shot.film_sets.push(self.film_set());
            }
            let actor = &shot.characters[0].mention;
            let verb = self.pick(&cfg.verbs);
            let object = match shot.film_sets.first() {
                Some(f) => f.category.clone(),
                None => self.pick(&cfg.categories).to_string(),
            };
            let mut line = format!("{actor} {verb} the {object}");
            if let Some(other) = shot.characters.get(1) {
                line.push_str(&format!(" while {} watches", other.mention));
            }
            line.push('.');
            shot.description = Some(line.clone());
            lines.push(line);
            shots.push(shot);
        }

        let synopsis = if self.rng.gen_bool(cfg.shot_by_shot_rate) {
            Synopsis::shot_by_shot(lines.clone())
        } else {
            Synopsis::condensed(format!("In the {scene}, {}", lines.join(" ")))
        };
        let genre = self.pick(&cfg.genres).to_string();
        let emotion = self.pick(&cfg.emotions).to_string();
        Storyboard {
            id: format!("syn-{}-{index:05}", cfg.seed),
            summative: Some(SummativeAnnotation {
                title: format!("The {scene} {index}"),
                genre,
                emotion,
                scene,
                summary: lines.join(" "),
            }),
            shots,
            synopsis,
            provenance: Provenance::Annotated,
        }
    }
}

/// Retries before a colliding synopsis is made unique with a take number.
const UNIQUE_ATTEMPTS: usize = 50;

/// Generates `cfg.count` storyboards. Every board passes validation and all
/// synopses in the output are distinct.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Vec<Storyboard>, String> {
    cfg.check()?;
    let mut g = Gen {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(cfg.count);
    for index in 0..cfg.count {
        let mut sb = g.board(index);
        let mut attempts = 1;
        while seen.contains(&sb.synopsis.texts) && attempts < UNIQUE_ATTEMPTS {
            sb = g.board(index);
            attempts += 1;
        }
        let base = sb.synopsis.texts.last().cloned().expect("non-empty synopsis");
        let mut take = 2;
        while seen.contains(&sb.synopsis.texts) {
            *sb.synopsis.texts.last_mut().expect("non-empty synopsis") = format!("{base} Take {take}.");
            take += 1;
        }
        seen.insert(sb.synopsis.texts.clone());
        out.push(sb);
    }
    Ok(out)
}
