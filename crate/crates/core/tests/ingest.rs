use std::fs;

use storyprior::ingest::{
    generate_synthetic, load_file, load_manifest, save, split, IngestError, Split, SyntheticConfig,
};
use storyprior::{
    parse, serialize, validate, Provenance, QuantizerConfig, RepresentationTier, SerializerConfig, SynopsisKind,
    ViolationKind,
};

fn cfg(seed: u64, count: usize) -> SyntheticConfig {
    SyntheticConfig {
        seed,
        count,
        ..Default::default()
    }
}

#[test]
fn synthetic_is_valid_and_deterministic() {
    let a = generate_synthetic(&cfg(0, 100)).unwrap();
    let b = generate_synthetic(&cfg(0, 100)).unwrap();
    assert_eq!(a.len(), 100);
    assert_eq!(a, b);
    for sb in &a {
        let r = validate(sb);
        assert!(r.is_valid(), "{}: {:?}", sb.id, r.violations);
    }
    assert_ne!(a, generate_synthetic(&cfg(1, 100)).unwrap());
}

#[test]
fn synthetic_covers_tiers_and_synopsis_kinds() {
    let boards = generate_synthetic(&cfg(3, 1000)).unwrap();
    let mut tiers = [0usize; 3];
    for c in boards.iter().flat_map(|b| &b.shots).flat_map(|s| &s.characters) {
        tiers[match c.tier {
            RepresentationTier::BoxOnly => 0,
            RepresentationTier::Sparse17 => 1,
            RepresentationTier::WholeBody93 => 2,
        }] += 1;
    }
    assert!(tiers.iter().all(|&n| n > 0), "{tiers:?}");
    assert!(boards.iter().any(|b| b.synopsis.kind == SynopsisKind::Condensed));
    assert!(boards.iter().any(|b| b.synopsis.kind == SynopsisKind::ShotByShot));
    let mut synopses: Vec<_> = boards.iter().map(|b| b.synopsis.texts.clone()).collect();
    synopses.sort();
    synopses.dedup();
    assert_eq!(synopses.len(), boards.len());
}

#[test]
fn shot_counts_follow_weights() {
    let c = SyntheticConfig {
        seed: 9,
        count: 3000,
        keypoint_rate: 0.0,
        box_only_shot_weights: vec![1.0, 2.0, 3.0, 4.0],
        ..Default::default()
    };
    let boards = generate_synthetic(&c).unwrap();
    let mut observed = [0f64; 4];
    for b in &boards {
        observed[b.shots.len() - 1] += 1.0;
    }
    let n = boards.len() as f64;
    let chi2: f64 = (0..4)
        .map(|i| {
            let e = n * (i + 1) as f64 / 10.0;
            (observed[i] - e).powi(2) / e
        })
        .sum();
    // 3 degrees of freedom, p = 0.001 critical value.
    assert!(chi2 < 16.27, "chi2 = {chi2}, observed {observed:?}");
}

#[test]
fn save_then_load_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let boards = generate_synthetic(&cfg(5, 40)).unwrap();
    let path = dir.path().join("boards.jsonl");
    save(&path, &boards).unwrap();
    let back: Vec<_> = load_file(&path).unwrap().into_iter().map(|(b, _)| b).collect();
    assert_eq!(back, boards);
}

#[test]
fn decoded_boards_keep_provenance_through_records() {
    let q = QuantizerConfig::default();
    let scfg = SerializerConfig::default();
    let decoded: Vec<_> = generate_synthetic(&cfg(6, 30))
        .unwrap()
        .iter()
        .map(|b| parse(&serialize(b, &q, &scfg).unwrap().text, &q).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("decoded.jsonl");
    save(&path, &decoded).unwrap();
    let back: Vec<_> = load_file(&path).unwrap().into_iter().map(|(b, _)| b).collect();
    assert_eq!(back, decoded);
    assert!(back.iter().all(|b| b.provenance == Provenance::Decoded && validate(b).is_valid()));
}

const ONE: &str = r#"{"id": "x", "synopsis": {"kind": "condensed", "texts": ["A man eats."]},
 "shots": [
  {"width": 100, "height": 100, "characters": [{"id": 0, "mention": "he", "bbox": [1, 1, 20, 30]}]},
  {"width": 100, "height": 100, "characters": [{"id": 0, "mention": "he", "bbox": [1, 1, 20, 30]}],
   "film_sets": [{"category": "fork", "bbox": [50, 50, 60, 70]}]},
  {"width": 100, "height": 100}
 ]}"#;

#[test]
fn loads_single_record_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("one.json");
    fs::write(&p, ONE).unwrap();
    let boards = load_file(&p).unwrap();
    assert_eq!(boards.len(), 1);
    let sb = &boards[0].0;
    assert_eq!(sb.synopsis.kind, SynopsisKind::Condensed);
    assert_eq!(sb.shots.len(), 3);
    assert!(validate(sb).is_valid());
}

#[test]
fn schema_errors_carry_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.jsonl");
    let good = ONE.replace('\n', " ");
    let empty = r#"{"id": "e", "synopsis": {"kind": "condensed", "texts": ["x"]}, "shots": []}"#;
    fs::write(&p, format!("{good}\n\n{empty}\n")).unwrap();
    match load_file(&p) {
        Err(IngestError::Schema { line, message, .. }) => {
            assert_eq!(line, 3);
            assert!(message.contains("shots"), "{message}");
        }
        other => panic!("expected schema error, got {other:?}"),
    }
    fs::write(&p, r#"{"id": "e", "synopsis": {"kind": "condensed", "texts": ["x"]}, "shots": [], "extra": 1}"#).unwrap();
    assert!(matches!(load_file(&p), Err(IngestError::Schema { line: 1, .. })));
}

#[test]
fn renamed_character_loads_but_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("renamed.json");
    fs::write(&p, ONE.replacen(r#""mention": "he""#, r#""mention": "Tom""#, 1)).unwrap();
    let sb = &load_file(&p).unwrap()[0].0;
    assert_eq!(validate(sb).count(ViolationKind::IdConsistency), 1);
}

#[test]
fn manifest_tags_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let boards = generate_synthetic(&cfg(2, 10)).unwrap();
    save(&dir.path().join("a.jsonl"), &boards[..6]).unwrap();
    save(&dir.path().join("b.jsonl"), &boards[6..]).unwrap();
    let m = dir.path().join("manifest.txt");
    fs::write(&m, "# corpus\na.jsonl train\nb.jsonl\n").unwrap();
    let ds = load_manifest(&m).unwrap();
    assert_eq!(ds.storyboards, boards);
    assert_eq!(ds.tags[0], Some(Split::Train));
    assert_eq!(ds.tags[9], None);
    assert!(ds.violations().is_empty());
    fs::write(&m, "missing.jsonl\n").unwrap();
    assert!(matches!(load_manifest(&m), Err(IngestError::Io { .. })));
    fs::write(&m, "a.jsonl valid\n").unwrap();
    assert!(matches!(load_manifest(&m), Err(IngestError::Manifest { line: 1, .. })));
}

#[test]
fn split_routes_by_synopsis_kind() {
    let boards = generate_synthetic(&cfg(4, 400)).unwrap();
    let tags = vec![None; boards.len()];
    let s = split(&boards, &tags, 0.2, 7);
    assert_eq!(s, split(&boards, &tags, 0.2, 7));
    let (tr, a, b) = s.counts();
    assert_eq!(tr + a + b, 400);
    assert_eq!(a + b, 80);
    assert!(s.test_a.iter().all(|&i| boards[i].synopsis.kind == SynopsisKind::Condensed));
    assert!(s.test_b.iter().all(|&i| boards[i].synopsis.kind == SynopsisKind::ShotByShot));
    let mut all: Vec<usize> = s.train.iter().chain(&s.test_a).chain(&s.test_b).copied().collect();
    all.sort();
    assert_eq!(all, (0..400).collect::<Vec<_>>());
}

#[test]
fn condensed_only_corpus_leaves_test_b_empty_with_warning() {
    let c = SyntheticConfig {
        shot_by_shot_rate: 0.0,
        ..cfg(6, 50)
    };
    let boards = generate_synthetic(&c).unwrap();
    let s = split(&boards, &[None; 50], 0.1, 0);
    assert!(s.test_b.is_empty());
    assert_eq!(s.test_a.len(), 5);
    assert!(s.warnings.iter().any(|w| w.contains("testB")));
}

#[test]
fn split_counts_match_explicit_tags() {
    let boards = generate_synthetic(&cfg(8, 300)).unwrap();
    let tags: Vec<Option<Split>> = boards
        .iter()
        .enumerate()
        .map(|(i, b)| match (i % 10, b.synopsis.kind) {
            (0, SynopsisKind::Condensed) => Some(Split::TestA),
            (0, SynopsisKind::ShotByShot) => Some(Split::TestB),
            _ => Some(Split::Train),
        })
        .collect();
    let s = split(&boards, &tags, 0.5, 0);
    assert_eq!(s.test_a.len() + s.test_b.len(), 30);
    assert!(s.warnings.is_empty());
}
