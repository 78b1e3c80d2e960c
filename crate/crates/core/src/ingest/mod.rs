//! Annotation records, manifests, splits and the synthetic corpus generator.

mod load;
mod pose;
mod record;
mod split;
mod synthetic;

pub use load::{load_file, load_manifest, save, to_jsonl, Dataset, IngestError, Origin};
pub use pose::PoseTemplate;
pub use record::{
    CharacterRecord, FilmSetRecord, KeypointsRecord, LayoutRecord, ShotRecord, StoryboardRecord,
    SynopsisKindRecord, SynopsisRecord, SCHEMA,
};
pub use split::{split, Split, Splits};
pub use synthetic::{generate_synthetic, SyntheticConfig};
