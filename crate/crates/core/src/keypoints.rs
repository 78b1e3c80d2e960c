//! Keypoint index sets, projection from the whole-body layout, and the
//! skeleton topology used for drawing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Keypoint, KeypointLayout, KeypointSet};

const DEFAULT_SCHEME: &str = include_str!("../data/keypoints.toml");

#[derive(Debug, Error, PartialEq)]
pub enum KeypointError {
    #[error("projection needs a 133-point set, got {0:?}")]
    WrongInputLayout(KeypointLayout),
    #[error("{name} index set: {reason}")]
    BadIndexSet { name: &'static str, reason: String },
    #[error("no layout has {0} points")]
    UnsupportedLength(usize),
    #[error("invalid keypoint scheme: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    /// Bone list on whole-body indices.
    pub edges: Vec<[usize; 2]>,
    /// Polylines on whole-body indices.
    pub chains: Vec<Vec<usize>>,
}

/// The 93- and 17-point subsets plus skeleton, editable as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointScheme {
    pub sampled: Vec<usize>,
    pub sparse: Vec<usize>,
    pub skeleton: Skeleton,
}

impl Default for KeypointScheme {
    fn default() -> Self {
        Self::from_toml(DEFAULT_SCHEME).expect("bundled keypoint scheme is valid")
    }
}

impl KeypointScheme {
    pub fn from_toml(text: &str) -> Result<Self, KeypointError> {
        let scheme: Self = toml::from_str(text).map_err(|e| KeypointError::Parse(e.to_string()))?;
        scheme.check()?;
        Ok(scheme)
    }

    pub fn check(&self) -> Result<(), KeypointError> {
        check_index_set("sampled", &self.sampled, 93)?;
        check_index_set("sparse", &self.sparse, 17)?;
        let bad = self
            .skeleton
            .edges
            .iter()
            .flatten()
            .chain(self.skeleton.chains.iter().flatten())
            .any(|&i| i >= 133);
        if bad {
            return Err(KeypointError::Parse("skeleton index out of range".into()));
        }
        Ok(())
    }

    /// Whole-body indices kept by `layout`, in emission order.
    pub fn indices(&self, layout: KeypointLayout) -> Vec<usize> {
        match layout {
            KeypointLayout::WholeBody133 => (0..133).collect(),
            KeypointLayout::Sampled93 => self.sampled.clone(),
            KeypointLayout::Sparse17 => self.sparse.clone(),
        }
    }

    /// Bones expressed as positions within `layout`.
    pub fn edges_for(&self, layout: KeypointLayout) -> Vec<(usize, usize)> {
        let kept = self.indices(layout);
        let pos = |wb: usize| kept.iter().position(|&k| k == wb);
        let mut out = Vec::new();
        for &[a, b] in &self.skeleton.edges {
            if let (Some(pa), Some(pb)) = (pos(a), pos(b)) {
                out.push((pa, pb));
            }
        }
        for chain in &self.skeleton.chains {
            let linked: Vec<usize> = chain.iter().filter_map(|&i| pos(i)).collect();
            for w in linked.windows(2) {
                if w[0] != w[1] {
                    out.push((w[0], w[1]));
                }
            }
        }
        out
    }
}

fn check_index_set(name: &'static str, idx: &[usize], len: usize) -> Result<(), KeypointError> {
    if idx.len() != len {
        return Err(KeypointError::BadIndexSet {
            name,
            reason: format!("needs {len} indices, has {}", idx.len()),
        });
    }
    if idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(KeypointError::BadIndexSet {
            name,
            reason: "indices must be strictly increasing".into(),
        });
    }
    if idx.iter().any(|&i| i >= 133) {
        return Err(KeypointError::BadIndexSet {
            name,
            reason: "index outside [0, 133)".into(),
        });
    }
    Ok(())
}

/// Selects `indices` from a whole-body set, preserving their order. Hidden
/// points come out as `(0, 0)`.
pub fn project_keypoints(kps: &KeypointSet, indices: &[usize]) -> Result<KeypointSet, KeypointError> {
    if kps.layout() != KeypointLayout::WholeBody133 {
        return Err(KeypointError::WrongInputLayout(kps.layout()));
    }
    let layout =
        KeypointLayout::from_len(indices.len()).ok_or(KeypointError::UnsupportedLength(indices.len()))?;
    let mut points = Vec::with_capacity(indices.len());
    for &i in indices {
        let p = kps.points().get(i).ok_or_else(|| KeypointError::BadIndexSet {
            name: "projection",
            reason: format!("index {i} outside [0, 133)"),
        })?;
        points.push(if p.visible { *p } else { Keypoint::hidden() });
    }
    Ok(KeypointSet::new(layout, points).expect("length matches layout"))
}
