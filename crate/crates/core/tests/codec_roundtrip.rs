use proptest::prelude::*;
use storyprior::codec::{parse, serialize, shot_cap, QuantizerConfig, SerializerConfig};
use storyprior::ingest::{generate_synthetic, SyntheticConfig};
use storyprior::{build_vocabulary, validate, PromptSequence};

fn boards(seed: u64, count: usize) -> Vec<storyprior::Storyboard> {
    generate_synthetic(&SyntheticConfig {
        seed,
        count,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn round_trip_is_token_identical() {
    let q = QuantizerConfig::default();
    let cfg = SerializerConfig::default();
    for sb in boards(0, 200) {
        let text = serialize(&sb, &q, &cfg).unwrap();
        let parsed = parse(&text.text, &q).unwrap_or_else(|e| panic!("{}: {e:?}", sb.id));
        assert!(validate(&parsed).is_valid(), "{}: {:?}", sb.id, validate(&parsed).violations);
        let again = serialize(&parsed, &q, &cfg).unwrap();
        assert_eq!(again.lexemes(), text.lexemes(), "{}", sb.id);
    }
}

#[test]
fn budgets_hold_over_corpus() {
    let q = QuantizerConfig::default();
    let cfg = SerializerConfig::default();
    for sb in boards(1, 300) {
        let text = serialize(&sb, &q, &cfg).unwrap();
        let parsed = parse(&text.text, &q).unwrap();
        let cap = if sb.has_keypoints() { 4 } else { 10 };
        assert_eq!(shot_cap(&sb, &cfg), sb.shots.len().min(cap));
        assert_eq!(parsed.shots.len(), sb.shots.len().min(cap));
        assert!(text.token_count() <= 2560);
    }
}

#[test]
fn vocabulary_covers_corpus_and_is_lossless() {
    let q = QuantizerConfig::default();
    let cfg = SerializerConfig::default();
    let seqs: Vec<PromptSequence> = boards(2, 100)
        .iter()
        .map(|b| serialize(b, &q, &cfg).unwrap())
        .collect();
    let vocab = build_vocabulary(&seqs, 1, q.bins).unwrap();
    for s in &seqs {
        let ids = vocab.tokenize(s);
        assert!(!ids.ids.contains(&vocab.unk_id()));
        assert_eq!(vocab.detokenize(&ids.ids), s.lexemes().join(" "));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn any_seed_round_trips(seed in 0u64..1_000_000) {
        let q = QuantizerConfig::default();
        let cfg = SerializerConfig::default();
        for sb in boards(seed, 5) {
            let text = serialize(&sb, &q, &cfg).unwrap();
            let parsed = parse(&text.text, &q).unwrap();
            let again = serialize(&parsed, &q, &cfg).unwrap();
            prop_assert_eq!(again.lexemes(), text.lexemes());
        }
    }
}
