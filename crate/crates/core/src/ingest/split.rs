use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::types::{Storyboard, SynopsisKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "train")]
    Train,
    #[serde(rename = "testA")]
    TestA,
    #[serde(rename = "testB")]
    TestB,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::TestA => "testA",
            Split::TestB => "testB",
        }
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "testA" | "testa" => Ok(Split::TestA),
            "testB" | "testb" => Ok(Split::TestB),
            _ => Err(format!("unknown split {s:?} (expected train, testA or testB)")),
        }
    }
}

/// Indices into the input per split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    #[serde(rename = "testA")]
    pub test_a: Vec<usize>,
    #[serde(rename = "testB")]
    pub test_b: Vec<usize>,
    pub warnings: Vec<String>,
}

impl Splits {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train.len(), self.test_a.len(), self.test_b.len())
    }
}

/// Assigns every storyboard to a split. Tagged boards keep their tag unless
/// the tag contradicts the synopsis kind (testA holds condensed synopses only,
/// testB shot-by-shot only), in which case they go to train. Untagged boards
/// are held out with probability `held_out` (seeded), then routed to testA or
/// testB by synopsis kind.
pub fn split(storyboards: &[Storyboard], tags: &[Option<Split>], held_out: f64, seed: u64) -> Splits {
    let mut out = Splits::default();
    let mut untagged = Vec::new();
    for (i, sb) in storyboards.iter().enumerate() {
        let kind = sb.synopsis.kind;
        match tags.get(i).copied().flatten() {
            Some(Split::Train) => out.train.push(i),
            Some(Split::TestA) if kind == SynopsisKind::Condensed => out.test_a.push(i),
            Some(Split::TestB) if kind == SynopsisKind::ShotByShot => out.test_b.push(i),
            Some(t) => {
                let msg = format!("storyboard {:?} tagged {} has a {:?} synopsis; moved to train", sb.id, t.as_str(), kind);
                warn!("{msg}");
                out.warnings.push(msg);
                out.train.push(i);
            }
            None => untagged.push(i),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    untagged.shuffle(&mut rng);
    let n_held = (untagged.len() as f64 * held_out.clamp(0.0, 1.0)).round() as usize;
    for (k, &i) in untagged.iter().enumerate() {
        if k < n_held {
            match storyboards[i].synopsis.kind {
                SynopsisKind::Condensed => out.test_a.push(i),
                SynopsisKind::ShotByShot => out.test_b.push(i),
            }
        } else {
            out.train.push(i);
        }
    }
    out.train.sort_unstable();
    out.test_a.sort_unstable();
    out.test_b.sort_unstable();
    for (name, v) in [("testA", &out.test_a), ("testB", &out.test_b)] {
        if v.is_empty() {
            let msg = format!("{name} is empty");
            warn!("{msg}");
            out.warnings.push(msg);
        }
    }
    out
}
